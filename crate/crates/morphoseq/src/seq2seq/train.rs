//! Teacher-forced training under Adadelta.

use crate::corpus::InflectionEntry;
use crate::numcore::{adadelta_step, AdadeltaState};
use crate::rng::Rng;
use crate::tokenizer::{encode_input, encode_target, Vocabulary};

use super::backward::backward;
use super::forward::forward_loss;
use super::params::{init_params, ModelConfig, ModelParams};
use super::ModelError;

/// Incremental trainer, so callers can stop once a target is reached.
/// Epoch order, shuffling and updates are a pure function of (entries in
/// order, vocabulary, config).
pub struct Trainer {
    params: ModelParams,
    opt: Vec<AdadeltaState>,
    pairs: Vec<(Vec<usize>, Vec<usize>)>,
    config: ModelConfig,
    shuffle_rng: Rng,
    loss_log: Vec<f64>,
}

impl Trainer {
    pub fn new(
        train_entries: &[InflectionEntry],
        vocab: &Vocabulary,
        config: &ModelConfig,
    ) -> Result<Trainer, ModelError> {
        if train_entries.is_empty() {
            return Err(ModelError::EmptyTrainSet);
        }
        let pairs: Vec<(Vec<usize>, Vec<usize>)> = train_entries
            .iter()
            .map(|e| {
                (
                    vocab.encode_ids(&encode_input(e, vocab.mode())),
                    vocab.encode_ids(&encode_target(e, vocab.mode())),
                )
            })
            .collect();
        let params = init_params(config, vocab);
        let opt = params
            .tensors()
            .into_iter()
            .map(|(_, t)| AdadeltaState::new(t, config.rho, config.eps))
            .collect::<Result<Vec<_>, _>>()?;
        let longest_target = pairs.iter().map(|(_, t)| t.len()).max().unwrap_or(0);
        let config = ModelConfig {
            batch_size: config.batch_size.max(1),
            vocab_size: vocab.len(),
            max_decode_len: config.max_decode_len.max(longest_target),
            ..config.clone()
        };
        let shuffle_rng = Rng::new(config.seed).derive("shuffle");
        Ok(Trainer {
            params,
            opt,
            pairs,
            config,
            shuffle_rng,
            loss_log: Vec::new(),
        })
    }

    /// The configuration in effect, with `vocab_size` filled in and
    /// `max_decode_len` raised to the longest training target.
    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    /// One pass over the data: shuffle, batch, one Adadelta update per batch
    /// per parameter. Returns the mean per-example loss of the epoch.
    pub fn run_epoch(&mut self) -> Result<f64, ModelError> {
        let mut order: Vec<usize> = (0..self.pairs.len()).collect();
        self.shuffle_rng.shuffle(&mut order);

        let mut loss_sum = 0.0;
        for batch in order.chunks(self.config.batch_size) {
            let (batch_loss, grads) = batch_gradients(&self.params, &self.pairs, batch)?;
            loss_sum += batch_loss * batch.len() as f64;
            let mut grads = grads;
            for (((_, param), (_, grad)), state) in self
                .params
                .tensors_mut()
                .into_iter()
                .zip(grads.tensors_mut())
                .zip(&mut self.opt)
            {
                adadelta_step(param, grad, state)?;
            }
        }
        let epoch_loss = loss_sum / self.pairs.len() as f64;
        self.loss_log.push(epoch_loss);
        Ok(epoch_loss)
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn loss_log(&self) -> &[f64] {
        &self.loss_log
    }

    pub fn into_parts(self) -> (ModelParams, Vec<f64>) {
        (self.params, self.loss_log)
    }
}

/// Mean loss and mean gradients over one batch of encoded pairs. Examples
/// are processed at their own lengths, so the batch loss equals the mean of
/// the per-example losses exactly.
pub(crate) fn batch_gradients(
    params: &ModelParams,
    pairs: &[(Vec<usize>, Vec<usize>)],
    batch: &[usize],
) -> Result<(f64, ModelParams), ModelError> {
    let mut acc: Option<ModelParams> = None;
    let mut loss_sum = 0.0;
    for &idx in batch {
        let (input, target) = &pairs[idx];
        let (loss, cache) = forward_loss(params, input, target)?;
        loss_sum += loss;
        let grads = backward(params, &cache);
        match &mut acc {
            None => acc = Some(grads),
            Some(a) => {
                for ((_, dst), (_, src)) in a.tensors_mut().into_iter().zip(grads.tensors()) {
                    dst.add_assign(src)?;
                }
            }
        }
    }
    let scale = 1.0 / batch.len() as f64;
    let mut grads = acc.expect("non-empty batch");
    for (_, t) in grads.tensors_mut() {
        t.scale(scale);
    }
    Ok((loss_sum * scale, grads))
}

/// Train from scratch for `config.epochs` epochs. Returns the final
/// parameters and the per-epoch mean loss log.
pub fn train(
    train_entries: &[InflectionEntry],
    vocab: &Vocabulary,
    config: &ModelConfig,
) -> Result<(ModelParams, Vec<f64>), ModelError> {
    let mut trainer = Trainer::new(train_entries, vocab, config)?;
    for _ in 0..config.epochs {
        trainer.run_epoch()?;
    }
    Ok(trainer.into_parts())
}
