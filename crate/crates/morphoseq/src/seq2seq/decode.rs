//! Greedy decoding with attention traces.

use crate::tokenizer::{Vocabulary, EOW_INDEX};

use super::forward::{decode_core, encode_with_cache};
use super::params::ModelParams;
use super::ModelError;

/// Attention weights recorded while decoding: one row per emitted token,
/// one column per input token; every row sums to 1.
#[derive(Clone, Debug, PartialEq)]
pub struct AttentionTrace {
    weights: Vec<Vec<f64>>,
    row_labels: Vec<String>,
    col_labels: Vec<String>,
}

impl AttentionTrace {
    pub fn new(weights: Vec<Vec<f64>>, row_labels: Vec<String>, col_labels: Vec<String>) -> Self {
        assert_eq!(weights.len(), row_labels.len(), "one label per row");
        for row in &weights {
            assert_eq!(row.len(), col_labels.len(), "one label per column");
        }
        AttentionTrace {
            weights,
            row_labels,
            col_labels,
        }
    }

    pub fn rows(&self) -> usize {
        self.weights.len()
    }

    pub fn cols(&self) -> usize {
        self.col_labels.len()
    }

    pub fn weights(&self) -> &[Vec<f64>] {
        &self.weights
    }

    pub fn row_labels(&self) -> &[String] {
        &self.row_labels
    }

    pub fn col_labels(&self) -> &[String] {
        &self.col_labels
    }
}

/// Argmax with ties broken toward the lowest index, for determinism.
pub(crate) fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in xs.iter().enumerate().skip(1) {
        if v > xs[best] {
            best = i;
        }
    }
    best
}

/// Decode greedily: emit the argmax token each step, feeding it back, until
/// `<\w>` or `max_len` tokens. The emitted `<\w>` is included in the output
/// and the trace.
pub fn greedy_decode(
    params: &ModelParams,
    vocab: &Vocabulary,
    input_ids: &[usize],
    max_len: usize,
) -> Result<(Vec<usize>, AttentionTrace), ModelError> {
    assert!(max_len > 0, "greedy_decode: max_len must be positive");
    let enc = encode_with_cache(params, input_ids)?;
    let states: Vec<Vec<f64>> = enc.iter().map(|s| s.h.clone()).collect();

    let mut predicted = Vec::new();
    let mut rows = Vec::new();
    let mut prev = *input_ids.last().expect("non-empty input");
    let mut hidden = states[states.len() - 1].clone();
    for _ in 0..max_len {
        let step = decode_core(params, prev, &hidden, &states)?;
        let token = argmax(&step.probs);
        predicted.push(token);
        rows.push(step.weights.clone());
        hidden = step.gru.h;
        prev = token;
        if token == EOW_INDEX {
            break;
        }
    }

    let row_labels = predicted
        .iter()
        .map(|&id| vocab.token(id).text().to_string())
        .collect();
    let col_labels = input_ids
        .iter()
        .map(|&id| vocab.token(id).text().to_string())
        .collect();
    Ok((predicted, AttentionTrace::new(rows, row_labels, col_labels)))
}
