//! Model configuration, parameter tensors and their initialization.

use crate::numcore::Matrix;
use crate::rng::Rng;
use crate::tokenizer::Vocabulary;

/// Hyperparameters. Defaults are batch 20, hidden 100, embedding 300,
/// 20 epochs, Adadelta with rho 0.95 and eps 1e-6.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelConfig {
    pub embed_dim: usize,
    pub hidden_dim: usize,
    pub batch_size: usize,
    pub epochs: usize,
    /// Filled in from the vocabulary when a model is initialized; kept here
    /// so a config snapshot fully describes a trained model.
    pub vocab_size: usize,
    /// Hard cap on decode length; per-input decoding uses
    /// `max(2 * input_len + 10, max_decode_len)`.
    pub max_decode_len: usize,
    pub seed: u64,
    pub rho: f64,
    pub eps: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            embed_dim: 300,
            hidden_dim: 100,
            batch_size: 20,
            epochs: 20,
            vocab_size: 0,
            max_decode_len: 0,
            seed: 1,
            rho: 0.95,
            eps: 1e-6,
        }
    }
}

impl ModelConfig {
    pub fn decode_limit(&self, input_len: usize) -> usize {
        (2 * input_len + 10).max(self.max_decode_len).max(1)
    }
}

/// One GRU weight set: input projections (hidden x input), recurrent
/// projections (hidden x hidden) and biases (hidden x 1) for the update,
/// reset and candidate gates.
#[derive(Clone, Debug, PartialEq)]
pub struct GruWeights {
    pub w_z: Matrix,
    pub w_r: Matrix,
    pub w_h: Matrix,
    pub u_z: Matrix,
    pub u_r: Matrix,
    pub u_h: Matrix,
    pub b_z: Matrix,
    pub b_r: Matrix,
    pub b_h: Matrix,
}

impl GruWeights {
    fn zeros(input_dim: usize, hidden_dim: usize) -> Self {
        GruWeights {
            w_z: Matrix::zeros(hidden_dim, input_dim),
            w_r: Matrix::zeros(hidden_dim, input_dim),
            w_h: Matrix::zeros(hidden_dim, input_dim),
            u_z: Matrix::zeros(hidden_dim, hidden_dim),
            u_r: Matrix::zeros(hidden_dim, hidden_dim),
            u_h: Matrix::zeros(hidden_dim, hidden_dim),
            b_z: Matrix::zeros(hidden_dim, 1),
            b_r: Matrix::zeros(hidden_dim, 1),
            b_h: Matrix::zeros(hidden_dim, 1),
        }
    }
}

/// All learned tensors. `tensors()` fixes the canonical order used by the
/// optimizer, the gradient checker and the checkpoint format.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    /// vocab x embed; row i embeds token i.
    pub embedding: Matrix,
    pub encoder: GruWeights,
    pub decoder: GruWeights,
    /// hidden x 2*hidden; maps [context; decoder state] before the tanh.
    pub attn_wc: Matrix,
    /// vocab x hidden output projection.
    pub out_wo: Matrix,
    /// vocab x 1 output bias.
    pub out_bo: Matrix,
}

/// Gradients use the same layout as the parameters they belong to.
pub type ModelGrads = ModelParams;

pub const TENSOR_NAMES: [&str; 22] = [
    "embedding",
    "enc_wz",
    "enc_wr",
    "enc_wh",
    "enc_uz",
    "enc_ur",
    "enc_uh",
    "enc_bz",
    "enc_br",
    "enc_bh",
    "dec_wz",
    "dec_wr",
    "dec_wh",
    "dec_uz",
    "dec_ur",
    "dec_uh",
    "dec_bz",
    "dec_br",
    "dec_bh",
    "attn_wc",
    "out_wo",
    "out_bo",
];

impl ModelParams {
    pub fn zeros(vocab_size: usize, embed_dim: usize, hidden_dim: usize) -> Self {
        ModelParams {
            embedding: Matrix::zeros(vocab_size, embed_dim),
            encoder: GruWeights::zeros(embed_dim, hidden_dim),
            decoder: GruWeights::zeros(embed_dim, hidden_dim),
            attn_wc: Matrix::zeros(hidden_dim, 2 * hidden_dim),
            out_wo: Matrix::zeros(vocab_size, hidden_dim),
            out_bo: Matrix::zeros(vocab_size, 1),
        }
    }

    pub fn zeros_like(&self) -> Self {
        ModelParams::zeros(self.vocab_size(), self.embed_dim(), self.hidden_dim())
    }

    pub fn vocab_size(&self) -> usize {
        self.embedding.rows()
    }

    pub fn embed_dim(&self) -> usize {
        self.embedding.cols()
    }

    pub fn hidden_dim(&self) -> usize {
        self.attn_wc.rows()
    }

    /// Tensors in canonical order, paired with their names.
    pub fn tensors(&self) -> Vec<(&'static str, &Matrix)> {
        vec![
            ("embedding", &self.embedding),
            ("enc_wz", &self.encoder.w_z),
            ("enc_wr", &self.encoder.w_r),
            ("enc_wh", &self.encoder.w_h),
            ("enc_uz", &self.encoder.u_z),
            ("enc_ur", &self.encoder.u_r),
            ("enc_uh", &self.encoder.u_h),
            ("enc_bz", &self.encoder.b_z),
            ("enc_br", &self.encoder.b_r),
            ("enc_bh", &self.encoder.b_h),
            ("dec_wz", &self.decoder.w_z),
            ("dec_wr", &self.decoder.w_r),
            ("dec_wh", &self.decoder.w_h),
            ("dec_uz", &self.decoder.u_z),
            ("dec_ur", &self.decoder.u_r),
            ("dec_uh", &self.decoder.u_h),
            ("dec_bz", &self.decoder.b_z),
            ("dec_br", &self.decoder.b_r),
            ("dec_bh", &self.decoder.b_h),
            ("attn_wc", &self.attn_wc),
            ("out_wo", &self.out_wo),
            ("out_bo", &self.out_bo),
        ]
    }

    pub fn tensors_mut(&mut self) -> Vec<(&'static str, &mut Matrix)> {
        vec![
            ("embedding", &mut self.embedding),
            ("enc_wz", &mut self.encoder.w_z),
            ("enc_wr", &mut self.encoder.w_r),
            ("enc_wh", &mut self.encoder.w_h),
            ("enc_uz", &mut self.encoder.u_z),
            ("enc_ur", &mut self.encoder.u_r),
            ("enc_uh", &mut self.encoder.u_h),
            ("enc_bz", &mut self.encoder.b_z),
            ("enc_br", &mut self.encoder.b_r),
            ("enc_bh", &mut self.encoder.b_h),
            ("dec_wz", &mut self.decoder.w_z),
            ("dec_wr", &mut self.decoder.w_r),
            ("dec_wh", &mut self.decoder.w_h),
            ("dec_uz", &mut self.decoder.u_z),
            ("dec_ur", &mut self.decoder.u_r),
            ("dec_uh", &mut self.decoder.u_h),
            ("dec_bz", &mut self.decoder.b_z),
            ("dec_br", &mut self.decoder.b_r),
            ("dec_bh", &mut self.decoder.b_h),
            ("attn_wc", &mut self.attn_wc),
            ("out_wo", &mut self.out_wo),
            ("out_bo", &mut self.out_bo),
        ]
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|(_, t)| t.is_finite())
    }
}

/// Weights uniform in (-s, s) with s = 1/sqrt(fan_in); biases exactly zero.
/// Bit-identical for identical (config, seed). The embedding acts as a
/// linear map from one-hot token vectors, so its fan-in is the vocabulary
/// size; every other matrix's fan-in is its input width.
pub fn init_params(config: &ModelConfig, vocab: &Vocabulary) -> ModelParams {
    let mut params = ModelParams::zeros(vocab.len(), config.embed_dim, config.hidden_dim);
    let vocab_len = vocab.len();
    let mut rng = Rng::new(config.seed).derive("init");
    for (name, tensor) in params.tensors_mut() {
        if name.contains("_b") {
            continue; // biases stay zero
        }
        let fan_in = if name == "embedding" {
            vocab_len
        } else {
            tensor.cols()
        };
        let s = 1.0 / (fan_in as f64).sqrt();
        for v in tensor.data_mut() {
            *v = rng.uniform(-s, s);
        }
    }
    params
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::parse_corpus_str;
    use crate::tokenizer::{Mode, Vocabulary};

    fn small_vocab() -> Vocabulary {
        let entries = parse_corpus_str("fin\t|ab|\tNOUN\t|ab|c\tNOUN;Case=Gen").unwrap();
        Vocabulary::build(&entries, Mode::CharMorpheme)
    }

    fn small_config() -> ModelConfig {
        ModelConfig {
            embed_dim: 4,
            hidden_dim: 3,
            seed: 99,
            ..ModelConfig::default()
        }
    }

    #[test]
    fn init_is_deterministic() {
        let vocab = small_vocab();
        let cfg = small_config();
        assert_eq!(init_params(&cfg, &vocab), init_params(&cfg, &vocab));
        let other = ModelConfig { seed: 100, ..cfg };
        assert_ne!(init_params(&other, &vocab), init_params(&cfg, &vocab));
    }

    #[test]
    fn biases_are_zero_weights_bounded() {
        let vocab = small_vocab();
        let cfg = small_config();
        let params = init_params(&cfg, &vocab);
        for (name, t) in params.tensors() {
            if name.contains("_b") {
                assert!(t.data().iter().all(|&v| v == 0.0), "{name}");
            } else {
                let s = 1.0 / (t.cols() as f64).sqrt();
                assert!(t.data().iter().all(|&v| -s < v && v < s), "{name}");
            }
        }
    }

    #[test]
    fn tensor_order_matches_names() {
        let params = ModelParams::zeros(5, 4, 3);
        let names: Vec<&str> = params.tensors().iter().map(|(n, _)| *n).collect();
        assert_eq!(names, TENSOR_NAMES);
        let mut p2 = params.clone();
        let names_mut: Vec<&str> = p2.tensors_mut().iter().map(|(n, _)| *n).collect();
        assert_eq!(names_mut, TENSOR_NAMES);
    }

    #[test]
    fn decode_limit_rule() {
        let cfg = ModelConfig::default();
        assert_eq!(cfg.decode_limit(5), 20);
        let capped = ModelConfig {
            max_decode_len: 50,
            ..cfg
        };
        assert_eq!(capped.decode_limit(5), 50);
    }
}
