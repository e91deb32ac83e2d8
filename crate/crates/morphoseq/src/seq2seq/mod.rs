//! Single-layer GRU encoder-decoder with dot-product attention.
//!
//! The encoder reads the whole input stream (feature tags, lemma, `<\w>`);
//! the decoder starts from the final encoder state with `<\w>` as its first
//! input token and emits one output symbol per step. Attention follows the
//! multiplicative score `h_t · h̄_s`; the context vector is concatenated with
//! the decoder state, squashed through a tanh projection and mapped onto the
//! vocabulary. Training is teacher-forced cross-entropy under Adadelta, with
//! a hand-written backward pass checked against central finite differences.

mod backward;
mod checkpoint;
mod decode;
mod forward;
mod params;
mod train;

pub use backward::backward;
pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CheckpointError};
pub use decode::{greedy_decode, AttentionTrace};
pub use forward::{attend, decode_step, encode, forward_loss, ForwardCache};
pub use params::{init_params, GruWeights, ModelConfig, ModelGrads, ModelParams};
pub use train::{train, Trainer};

use thiserror::Error;

use crate::numcore::NumError;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("empty training set")]
    EmptyTrainSet,
    #[error("token index {index} outside vocabulary of size {vocab}")]
    VocabIndex { index: usize, vocab: usize },
    #[error("non-finite loss at decoder step {step}")]
    NonFiniteLoss { step: usize },
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error(transparent)]
    Num(#[from] NumError),
}
