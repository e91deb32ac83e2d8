//! Symbol streams for the two model regimes.
//!
//! An entry becomes one space-joinable token sequence: `IN=` feature tags,
//! `OUT=` feature tags, then the lemma. In char-morpheme mode the stem is
//! split into characters while each affix stays one symbol, with the zero
//! morpheme `∅` filling an empty prefix or suffix slot; in char-only mode
//! the whole surface is split into characters. `<\w>` terminates the input
//! and, internally, every target.

use std::collections::HashMap;
use std::fmt;

use crate::corpus::{FeatureSet, InflectionEntry, Segmentation, EOW_SYMBOL, ZERO_SYMBOL};

/// Reserved vocabulary slots, fixed for every vocabulary.
pub const PAD_INDEX: usize = 0;
pub const UNKNOWN_INDEX: usize = 1;
pub const ZERO_INDEX: usize = 2;
pub const EOW_INDEX: usize = 3;
const RESERVED: usize = 4;

/// Input regime: stems as characters with whole-affix symbols, or plain
/// characters throughout.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Mode {
    CharMorpheme,
    CharOnly,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::CharMorpheme => "charmorph",
            Mode::CharOnly => "char",
        }
    }

    pub fn parse(s: &str) -> Option<Mode> {
        match s {
            "charmorph" => Some(Mode::CharMorpheme),
            "char" => Some(Mode::CharOnly),
            _ => None,
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TokenKind {
    Pad,
    Unknown,
    Zero,
    EndOfWord,
    FeatureIn,
    FeatureOut,
    StemChar,
    Affix,
}

impl TokenKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TokenKind::Pad => "pad",
            TokenKind::Unknown => "unknown",
            TokenKind::Zero => "zero",
            TokenKind::EndOfWord => "eow",
            TokenKind::FeatureIn => "feat_in",
            TokenKind::FeatureOut => "feat_out",
            TokenKind::StemChar => "stem_char",
            TokenKind::Affix => "affix",
        }
    }

    pub fn parse(s: &str) -> Option<TokenKind> {
        Some(match s {
            "pad" => TokenKind::Pad,
            "unknown" => TokenKind::Unknown,
            "zero" => TokenKind::Zero,
            "eow" => TokenKind::EndOfWord,
            "feat_in" => TokenKind::FeatureIn,
            "feat_out" => TokenKind::FeatureOut,
            "stem_char" => TokenKind::StemChar,
            "affix" => TokenKind::Affix,
            _ => return None,
        })
    }
}

/// One symbol of the stream. The kind participates in vocabulary identity,
/// so the affix "s" and the stem character "s" are distinct items.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Token {
    kind: TokenKind,
    text: String,
}

impl Token {
    pub fn new(kind: TokenKind, text: impl Into<String>) -> Token {
        let token = Token {
            kind,
            text: text.into(),
        };
        debug_assert!(
            match token.kind {
                TokenKind::Zero => token.text == ZERO_SYMBOL,
                TokenKind::EndOfWord => token.text == EOW_SYMBOL,
                TokenKind::StemChar => token.text.chars().count() == 1,
                _ => true,
            },
            "malformed token {token:?}"
        );
        token
    }

    pub fn pad() -> Token {
        Token::new(TokenKind::Pad, "<pad>")
    }

    pub fn unknown() -> Token {
        Token::new(TokenKind::Unknown, "<unk>")
    }

    pub fn zero() -> Token {
        Token::new(TokenKind::Zero, ZERO_SYMBOL)
    }

    pub fn end_of_word() -> Token {
        Token::new(TokenKind::EndOfWord, EOW_SYMBOL)
    }

    pub fn stem_char(c: char) -> Token {
        Token::new(TokenKind::StemChar, c.to_string())
    }

    pub fn affix(text: &str) -> Token {
        Token::new(TokenKind::Affix, text)
    }

    pub fn kind(&self) -> TokenKind {
        self.kind
    }

    pub fn text(&self) -> &str {
        &self.text
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}

/// Space-joined printable form of a stream, as the debugging dump prints it.
pub fn join_tokens(tokens: &[Token]) -> String {
    tokens
        .iter()
        .map(Token::text)
        .collect::<Vec<_>>()
        .join(" ")
}

fn feature_tokens(feats: &FeatureSet, kind: TokenKind, prefix: &str) -> Vec<Token> {
    let mut out = vec![Token::new(kind, format!("{prefix}{}", feats.pos()))];
    for (k, v) in feats.features() {
        out.push(Token::new(kind, format!("{prefix}{k}={v}")));
    }
    out
}

fn word_tokens(seg: &Segmentation, mode: Mode) -> Vec<Token> {
    let mut out = Vec::new();
    match mode {
        Mode::CharMorpheme => {
            if seg.prefixes().is_empty() {
                out.push(Token::zero());
            } else {
                out.extend(seg.prefixes().iter().map(|p| Token::affix(p)));
            }
            out.extend(seg.stem().chars().map(Token::stem_char));
            if seg.suffixes().is_empty() {
                out.push(Token::zero());
            } else {
                out.extend(seg.suffixes().iter().map(|s| Token::affix(s)));
            }
        }
        Mode::CharOnly => {
            out.extend(seg.surface().chars().map(Token::stem_char));
        }
    }
    out
}

/// Encode a prediction query: input features, target features, lemma, `<\w>`.
pub fn encode_query(
    lemma_seg: &Segmentation,
    lemma_feats: &FeatureSet,
    target_feats: &FeatureSet,
    mode: Mode,
) -> Vec<Token> {
    let mut out = feature_tokens(lemma_feats, TokenKind::FeatureIn, "IN=");
    out.extend(feature_tokens(target_feats, TokenKind::FeatureOut, "OUT="));
    out.extend(word_tokens(lemma_seg, mode));
    out.push(Token::end_of_word());
    out
}

/// The model input for an entry (its lemma side plus both feature bundles).
pub fn encode_input(entry: &InflectionEntry, mode: Mode) -> Vec<Token> {
    encode_query(&entry.lemma_seg, &entry.lemma_feats, &entry.form_feats, mode)
}

/// The training target for an entry: the form tokens plus the `<\w>` stop
/// symbol, which detokenize strips again.
pub fn encode_target(entry: &InflectionEntry, mode: Mode) -> Vec<Token> {
    let mut out = word_tokens(&entry.form_seg, mode);
    out.push(Token::end_of_word());
    out
}

/// Surface string of a stream: stem characters and affixes concatenated in
/// order; zero morphemes, padding, feature tags and unknowns carry no
/// surface material; stops at the first `<\w>`.
pub fn detokenize(tokens: &[Token]) -> String {
    let mut out = String::new();
    for t in tokens {
        match t.kind {
            TokenKind::EndOfWord => break,
            TokenKind::StemChar | TokenKind::Affix => out.push_str(&t.text),
            _ => {}
        }
    }
    out
}

/// Index map over the symbols observed in a training set, one per regime.
/// Indices 0..4 are reserved (pad, unknown, zero, `<\w>`); the rest are
/// sorted by (kind, text) so a rebuild from the same data is identical.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocabulary {
    mode: Mode,
    tokens: Vec<Token>,
    index: HashMap<Token, usize>,
}

impl Vocabulary {
    /// Collect every token of the encoded inputs and targets of the
    /// training entries.
    pub fn build(train_entries: &[InflectionEntry], mode: Mode) -> Vocabulary {
        let mut observed: Vec<Token> = Vec::new();
        let mut seen: std::collections::HashSet<Token> = std::collections::HashSet::new();
        for e in train_entries {
            for t in encode_input(e, mode).into_iter().chain(encode_target(e, mode)) {
                if !matches!(
                    t.kind,
                    TokenKind::Pad | TokenKind::Unknown | TokenKind::Zero | TokenKind::EndOfWord
                ) && seen.insert(t.clone())
                {
                    observed.push(t);
                }
            }
        }
        observed.sort();
        Vocabulary::from_tokens(mode, observed)
    }

    fn from_tokens(mode: Mode, non_reserved: Vec<Token>) -> Vocabulary {
        let mut tokens = vec![
            Token::pad(),
            Token::unknown(),
            Token::zero(),
            Token::end_of_word(),
        ];
        tokens.extend(non_reserved);
        let index = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Vocabulary {
            mode,
            tokens,
            index,
        }
    }

    /// Rebuild from an index-ordered token list (checkpoint loading).
    /// Returns None when the reserved slots are not in place.
    pub fn from_index_order(mode: Mode, tokens: Vec<Token>) -> Option<Vocabulary> {
        if tokens.len() < RESERVED
            || tokens[PAD_INDEX] != Token::pad()
            || tokens[UNKNOWN_INDEX] != Token::unknown()
            || tokens[ZERO_INDEX] != Token::zero()
            || tokens[EOW_INDEX] != Token::end_of_word()
        {
            return None;
        }
        Some(Vocabulary::from_tokens(mode, tokens[RESERVED..].to_vec()))
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty() // never true: reserved tokens are always present
    }

    pub fn token(&self, index: usize) -> &Token {
        &self.tokens[index]
    }

    pub fn tokens(&self) -> &[Token] {
        &self.tokens
    }

    /// Index of a token; unseen symbols map to the unknown index.
    pub fn lookup(&self, token: &Token) -> usize {
        self.index.get(token).copied().unwrap_or(UNKNOWN_INDEX)
    }

    pub fn encode_ids(&self, tokens: &[Token]) -> Vec<usize> {
        tokens.iter().map(|t| self.lookup(t)).collect()
    }

    pub fn decode_tokens(&self, ids: &[usize]) -> Vec<Token> {
        ids.iter().map(|&i| self.tokens[i].clone()).collect()
    }
}
