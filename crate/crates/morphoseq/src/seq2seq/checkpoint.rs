//! Checkpoint serialization.
//!
//! Layout: the magic line `morphoseq-checkpoint`, a text header of
//! `key value` lines (format version, dims, config, vocabulary entries in
//! index order with their token kinds), then one `tensor <name> <rows>
//! <cols>` line per parameter followed by rows*cols little-endian 8-byte
//! IEEE-754 values in row-major order, and a final `end` line. Loading
//! restores the parameters bit-exactly.

use std::io::{Read, Write};

use thiserror::Error;

use crate::tokenizer::{Mode, Token, TokenKind, Vocabulary};

use super::params::{ModelConfig, ModelParams, TENSOR_NAMES};

const MAGIC: &str = "morphoseq-checkpoint";
const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("not a morphoseq checkpoint (bad magic)")]
    BadMagic,
    #[error("unsupported checkpoint version {found} (expected {VERSION})")]
    VersionMismatch { found: String },
    #[error("truncated checkpoint: {0}")]
    Truncated(String),
    #[error("tensor {name}: shape mismatch, expected {expected:?}, found {found:?}")]
    ShapeMismatch {
        name: String,
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error("malformed checkpoint: {0}")]
    Malformed(String),
}

/// A loaded model: parameters, the config snapshot it was trained with and
/// the vocabulary it indexes into.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub params: ModelParams,
    pub config: ModelConfig,
    pub vocab: Vocabulary,
}

pub fn save_checkpoint<W: Write>(
    params: &ModelParams,
    config: &ModelConfig,
    vocab: &Vocabulary,
    mut sink: W,
) -> Result<(), CheckpointError> {
    let mut header = String::new();
    header.push_str(MAGIC);
    header.push('\n');
    header.push_str(&format!("version {VERSION}\n"));
    header.push_str(&format!("mode {}\n", vocab.mode()));
    header.push_str(&format!("embed_dim {}\n", config.embed_dim));
    header.push_str(&format!("hidden_dim {}\n", config.hidden_dim));
    header.push_str(&format!("batch_size {}\n", config.batch_size));
    header.push_str(&format!("epochs {}\n", config.epochs));
    header.push_str(&format!("vocab_size {}\n", vocab.len()));
    header.push_str(&format!("max_decode_len {}\n", config.max_decode_len));
    header.push_str(&format!("seed {}\n", config.seed));
    header.push_str(&format!("rho {}\n", config.rho));
    header.push_str(&format!("eps {}\n", config.eps));
    for token in vocab.tokens() {
        header.push_str(&format!("vocab {} {}\n", token.kind().as_str(), token.text()));
    }
    sink.write_all(header.as_bytes())?;
    for (name, tensor) in params.tensors() {
        sink.write_all(format!("tensor {name} {} {}\n", tensor.rows(), tensor.cols()).as_bytes())?;
        let mut bytes = Vec::with_capacity(tensor.len() * 8);
        for v in tensor.data() {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        sink.write_all(&bytes)?;
    }
    sink.write_all(b"end\n")?;
    Ok(())
}

struct LineReader<R: Read> {
    inner: R,
}

impl<R: Read> LineReader<R> {
    /// Read bytes up to a newline; used for the text parts between blobs.
    /// Every well-formed line ends with a newline, so EOF mid-line means
    /// the file was cut short.
    fn line(&mut self) -> Result<Option<String>, CheckpointError> {
        let mut buf = Vec::new();
        let mut byte = [0u8; 1];
        loop {
            match self.inner.read(&mut byte)? {
                0 => {
                    if buf.is_empty() {
                        return Ok(None);
                    }
                    return Err(CheckpointError::Truncated(format!(
                        "unterminated line {:?}",
                        String::from_utf8_lossy(&buf)
                    )));
                }
                _ => {
                    if byte[0] == b'\n' {
                        break;
                    }
                    buf.push(byte[0]);
                }
            }
        }
        String::from_utf8(buf)
            .map(Some)
            .map_err(|e| CheckpointError::Malformed(format!("non-UTF-8 header line: {e}")))
    }

    fn required_line(&mut self, what: &str) -> Result<String, CheckpointError> {
        self.line()?
            .ok_or_else(|| CheckpointError::Truncated(format!("missing {what}")))
    }

    fn exact(&mut self, buf: &mut [u8], what: &str) -> Result<(), CheckpointError> {
        let mut filled = 0;
        while filled < buf.len() {
            let n = self.inner.read(&mut buf[filled..])?;
            if n == 0 {
                return Err(CheckpointError::Truncated(format!(
                    "unexpected end of file inside {what}"
                )));
            }
            filled += n;
        }
        Ok(())
    }
}

fn header_value<'a>(line: &'a str, key: &str) -> Result<&'a str, CheckpointError> {
    line.strip_prefix(key)
        .and_then(|rest| rest.strip_prefix(' '))
        .ok_or_else(|| CheckpointError::Malformed(format!("expected `{key} ...`, found {line:?}")))
}

fn parse_num<T: std::str::FromStr>(s: &str, what: &str) -> Result<T, CheckpointError> {
    s.parse()
        .map_err(|_| CheckpointError::Malformed(format!("bad {what}: {s:?}")))
}

pub fn load_checkpoint<R: Read>(source: R) -> Result<Checkpoint, CheckpointError> {
    let mut r = LineReader { inner: source };
    if r.required_line("magic")? != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let version = header_value(&r.required_line("version")?, "version")?.to_string();
    if version != VERSION.to_string() {
        return Err(CheckpointError::VersionMismatch { found: version });
    }
    let mode_str = header_value(&r.required_line("mode")?, "mode")?.to_string();
    let mode = Mode::parse(&mode_str)
        .ok_or_else(|| CheckpointError::Malformed(format!("unknown mode {mode_str:?}")))?;

    let mut config = ModelConfig::default();
    config.embed_dim = parse_num(
        header_value(&r.required_line("embed_dim")?, "embed_dim")?,
        "embed_dim",
    )?;
    config.hidden_dim = parse_num(
        header_value(&r.required_line("hidden_dim")?, "hidden_dim")?,
        "hidden_dim",
    )?;
    config.batch_size = parse_num(
        header_value(&r.required_line("batch_size")?, "batch_size")?,
        "batch_size",
    )?;
    config.epochs = parse_num(header_value(&r.required_line("epochs")?, "epochs")?, "epochs")?;
    config.vocab_size = parse_num(
        header_value(&r.required_line("vocab_size")?, "vocab_size")?,
        "vocab_size",
    )?;
    config.max_decode_len = parse_num(
        header_value(&r.required_line("max_decode_len")?, "max_decode_len")?,
        "max_decode_len",
    )?;
    config.seed = parse_num(header_value(&r.required_line("seed")?, "seed")?, "seed")?;
    config.rho = parse_num(header_value(&r.required_line("rho")?, "rho")?, "rho")?;
    config.eps = parse_num(header_value(&r.required_line("eps")?, "eps")?, "eps")?;

    let mut tokens = Vec::with_capacity(config.vocab_size);
    for i in 0..config.vocab_size {
        let line = r.required_line(&format!("vocab entry {i}"))?;
        let rest = header_value(&line, "vocab")?;
        let (kind_str, text) = rest
            .split_once(' ')
            .ok_or_else(|| CheckpointError::Malformed(format!("bad vocab line {line:?}")))?;
        let kind = TokenKind::parse(kind_str)
            .ok_or_else(|| CheckpointError::Malformed(format!("bad token kind {kind_str:?}")))?;
        tokens.push(Token::new(kind, text));
    }
    let vocab = Vocabulary::from_index_order(mode, tokens)
        .ok_or_else(|| CheckpointError::Malformed("reserved vocabulary slots out of place".into()))?;

    let mut params = ModelParams::zeros(config.vocab_size, config.embed_dim, config.hidden_dim);
    for (expected_name, tensor) in params.tensors_mut() {
        let line = r.required_line(&format!("tensor header for {expected_name}"))?;
        let rest = header_value(&line, "tensor")?;
        let fields: Vec<&str> = rest.split(' ').collect();
        if fields.len() != 3 {
            return Err(CheckpointError::Malformed(format!("bad tensor line {line:?}")));
        }
        if fields[0] != expected_name {
            return Err(CheckpointError::Malformed(format!(
                "expected tensor {expected_name}, found {}",
                fields[0]
            )));
        }
        let rows: usize = parse_num(fields[1], "tensor rows")?;
        let cols: usize = parse_num(fields[2], "tensor cols")?;
        if (rows, cols) != tensor.shape() {
            return Err(CheckpointError::ShapeMismatch {
                name: expected_name.to_string(),
                expected: tensor.shape(),
                found: (rows, cols),
            });
        }
        let mut bytes = vec![0u8; rows * cols * 8];
        r.exact(&mut bytes, &format!("tensor {expected_name}"))?;
        for (v, chunk) in tensor.data_mut().iter_mut().zip(bytes.chunks_exact(8)) {
            *v = f64::from_le_bytes(chunk.try_into().expect("8-byte chunk"));
        }
    }
    if r.required_line("end marker")? != "end" {
        return Err(CheckpointError::Malformed("missing end marker".into()));
    }
    debug_assert_eq!(TENSOR_NAMES.len(), params.tensors().len());
    Ok(Checkpoint {
        params,
        config,
        vocab,
    })
}
