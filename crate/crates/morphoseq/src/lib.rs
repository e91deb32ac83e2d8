//! Morphological inflection generation with seq2seq models.
//!
//! The library trains a single-layer GRU encoder-decoder with dot-product
//! attention to map a lemma plus input/output feature tags onto an inflected
//! word form. Two input regimes are supported: a character-morpheme hybrid
//! (stems split into characters, affixes kept as whole symbols) and a plain
//! character stream. Everything is f64 and fully deterministic given a seed.

pub mod corpus;
pub mod eval;
pub mod numcore;
pub mod rng;
pub mod seq2seq;
pub mod tokenizer;
