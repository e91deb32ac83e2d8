//! Forward computation: GRU recurrences, attention, output distributions
//! and the teacher-forced loss, caching every intermediate for backward.

use crate::numcore::{dot, matvec, sigmoid, softmax, Matrix};

use super::params::{GruWeights, ModelParams};
use super::ModelError;

/// Per-step GRU intermediates:
/// z = sigma(W_z x + U_z h_prev + b_z)
/// r = sigma(W_r x + U_r h_prev + b_r)
/// h~ = tanh(W_h x + U_h (r .* h_prev) + b_h)
/// h = (1 - z) .* h_prev + z .* h~
#[derive(Clone, Debug)]
pub(crate) struct GruStep {
    pub z: Vec<f64>,
    pub r: Vec<f64>,
    pub hr: Vec<f64>,
    pub h_tilde: Vec<f64>,
    pub h: Vec<f64>,
}

pub(crate) fn gru_forward(w: &GruWeights, x: &[f64], h_prev: &[f64]) -> GruStep {
    let gate = |wx: &Matrix, ux: &Matrix, b: &Matrix, through: &[f64]| -> Vec<f64> {
        let mut pre = matvec(wx, x);
        let rec = matvec(ux, through);
        for (p, (rv, bv)) in pre.iter_mut().zip(rec.iter().zip(b.data())) {
            *p += rv + bv;
        }
        pre
    };
    let z: Vec<f64> = gate(&w.w_z, &w.u_z, &w.b_z, h_prev)
        .into_iter()
        .map(sigmoid)
        .collect();
    let r: Vec<f64> = gate(&w.w_r, &w.u_r, &w.b_r, h_prev)
        .into_iter()
        .map(sigmoid)
        .collect();
    let hr: Vec<f64> = r.iter().zip(h_prev).map(|(rv, hv)| rv * hv).collect();
    let h_tilde: Vec<f64> = gate(&w.w_h, &w.u_h, &w.b_h, &hr)
        .into_iter()
        .map(f64::tanh)
        .collect();
    let h: Vec<f64> = z
        .iter()
        .zip(&h_tilde)
        .zip(h_prev)
        .map(|((zv, htv), hv)| (1.0 - zv) * hv + zv * htv)
        .collect();
    GruStep {
        z,
        r,
        hr,
        h_tilde,
        h,
    }
}

fn embedding_row<'a>(params: &'a ModelParams, id: usize) -> Result<&'a [f64], ModelError> {
    if id >= params.vocab_size() {
        return Err(ModelError::VocabIndex {
            index: id,
            vocab: params.vocab_size(),
        });
    }
    Ok(params.embedding.row(id))
}

pub(crate) fn encode_with_cache(
    params: &ModelParams,
    input_ids: &[usize],
) -> Result<Vec<GruStep>, ModelError> {
    if input_ids.is_empty() {
        return Err(ModelError::Argument("encode: empty input sequence".into()));
    }
    let mut steps = Vec::with_capacity(input_ids.len());
    let zero = vec![0.0; params.hidden_dim()];
    for &id in input_ids {
        let x = embedding_row(params, id)?;
        let h_prev = steps.last().map_or(zero.as_slice(), |s: &GruStep| &s.h);
        steps.push(gru_forward(&params.encoder, x, h_prev));
    }
    Ok(steps)
}

/// Encoder states h̄_1..h̄_S for an input id sequence; h_0 is the zero vector.
pub fn encode(params: &ModelParams, input_ids: &[usize]) -> Result<Vec<Vec<f64>>, ModelError> {
    Ok(encode_with_cache(params, input_ids)?
        .into_iter()
        .map(|s| s.h)
        .collect())
}

/// Dot-product attention: weights = softmax over s of h_t · h̄_s, context is
/// the weighted sum of encoder states. Returns (context, weights).
pub fn attend(h_t: &[f64], states: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    assert!(!states.is_empty(), "attend: no encoder states");
    let scores: Vec<f64> = states.iter().map(|s| dot(h_t, s)).collect();
    let weights = softmax(&scores).expect("non-empty finite scores");
    let mut context = vec![0.0; h_t.len()];
    for (w, s) in weights.iter().zip(states) {
        for (c, v) in context.iter_mut().zip(s) {
            *c += w * v;
        }
    }
    (context, weights)
}

/// Everything one decoder step produces and remembers.
#[derive(Clone, Debug)]
pub(crate) struct DecStep {
    pub prev_id: usize,
    pub gru: GruStep,
    pub weights: Vec<f64>,
    pub context: Vec<f64>,
    /// tanh(W_c [context; h]) — the attentional vector fed to the output.
    pub attn_out: Vec<f64>,
    pub probs: Vec<f64>,
}

pub(crate) fn decode_core(
    params: &ModelParams,
    prev_id: usize,
    h_prev: &[f64],
    states: &[Vec<f64>],
) -> Result<DecStep, ModelError> {
    let x = embedding_row(params, prev_id)?;
    let gru = gru_forward(&params.decoder, x, h_prev);
    let (context, weights) = attend(&gru.h, states);
    let concat: Vec<f64> = context.iter().chain(&gru.h).copied().collect();
    let attn_out: Vec<f64> = matvec(&params.attn_wc, &concat)
        .into_iter()
        .map(f64::tanh)
        .collect();
    let mut logits = matvec(&params.out_wo, &attn_out);
    for (l, b) in logits.iter_mut().zip(params.out_bo.data()) {
        *l += b;
    }
    let probs = softmax(&logits)?;
    Ok(DecStep {
        prev_id,
        gru,
        weights,
        context,
        attn_out,
        probs,
    })
}

/// One decoder step: consume the previous token, return the output
/// distribution, the new hidden state and the attention weights.
pub fn decode_step(
    params: &ModelParams,
    prev_token: usize,
    h_prev: &[f64],
    states: &[Vec<f64>],
) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>), ModelError> {
    let step = decode_core(params, prev_token, h_prev, states)?;
    Ok((step.probs, step.gru.h, step.weights))
}

/// Intermediates of one teacher-forced pass, consumed by `backward`.
#[derive(Clone, Debug)]
pub struct ForwardCache {
    pub(crate) input_ids: Vec<usize>,
    pub(crate) target_ids: Vec<usize>,
    pub(crate) enc: Vec<GruStep>,
    pub(crate) dec: Vec<DecStep>,
    pub(crate) loss: f64,
}

impl ForwardCache {
    pub fn loss(&self) -> f64 {
        self.loss
    }
}

/// Teacher-forced loss: the decoder starts from the final encoder state with
/// the terminating `<\w>` of the input as its first input token, then
/// consumes gold target tokens; the loss is the mean per-target-token
/// negative log-likelihood.
pub fn forward_loss(
    params: &ModelParams,
    input_ids: &[usize],
    target_ids: &[usize],
) -> Result<(f64, ForwardCache), ModelError> {
    if target_ids.is_empty() {
        return Err(ModelError::Argument("forward_loss: empty target".into()));
    }
    let enc = encode_with_cache(params, input_ids)?;
    let states: Vec<Vec<f64>> = enc.iter().map(|s| s.h.clone()).collect();
    let mut dec: Vec<DecStep> = Vec::with_capacity(target_ids.len());
    let mut nll_sum = 0.0;
    for (j, &gold) in target_ids.iter().enumerate() {
        let prev_id = if j == 0 {
            *input_ids.last().expect("non-empty input")
        } else {
            target_ids[j - 1]
        };
        let h_prev = if j == 0 {
            &states[states.len() - 1]
        } else {
            &dec[j - 1].gru.h
        };
        let step = decode_core(params, prev_id, h_prev, &states)?;
        if gold >= params.vocab_size() {
            return Err(ModelError::VocabIndex {
                index: gold,
                vocab: params.vocab_size(),
            });
        }
        let nll = -step.probs[gold].ln();
        if !nll.is_finite() {
            return Err(ModelError::NonFiniteLoss { step: j });
        }
        nll_sum += nll;
        dec.push(step);
    }
    let loss = nll_sum / target_ids.len() as f64;
    let cache = ForwardCache {
        input_ids: input_ids.to_vec(),
        target_ids: target_ids.to_vec(),
        enc,
        dec,
        loss,
    };
    Ok((loss, cache))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seq2seq::params::{init_params, ModelConfig, ModelParams};
    use crate::tokenizer::{Mode, Vocabulary};

    fn test_vocab() -> Vocabulary {
        let entries =
            crate::corpus::parse_corpus_str("fin\t|ab|\tNOUN\t|ab|ta\tNOUN;Case=Par").unwrap();
        Vocabulary::build(&entries, Mode::CharMorpheme)
    }

    fn test_params(seed: u64) -> ModelParams {
        let cfg = ModelConfig {
            embed_dim: 5,
            hidden_dim: 4,
            seed,
            ..ModelConfig::default()
        };
        init_params(&cfg, &test_vocab())
    }

    #[test]
    fn zero_weights_give_zero_states() {
        let params = ModelParams::zeros(6, 5, 4);
        let states = encode(&params, &[0, 1, 2, 3]).unwrap();
        for s in states {
            assert!(s.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn single_token_single_state() {
        let params = test_params(3);
        let states = encode(&params, &[2]).unwrap();
        assert_eq!(states.len(), 1);
    }

    #[test]
    fn encoder_matches_scalar_recomputation() {
        // independent straight-line recomputation with hidden_dim=2 on a
        // 2-token input, reading raw weight entries
        let cfg = ModelConfig {
            embed_dim: 3,
            hidden_dim: 2,
            seed: 17,
            ..ModelConfig::default()
        };
        let vocab = test_vocab();
        let params = init_params(&cfg, &vocab);
        let ids = [4usize, 6];
        let got = encode(&params, &ids).unwrap();

        let sig = |x: f64| 1.0 / (1.0 + (-x).exp());
        let w = &params.encoder;
        let mut h_prev = [0.0f64; 2];
        let mut expected = Vec::new();
        for &id in &ids {
            let x: Vec<f64> = params.embedding.row(id).to_vec();
            let mut h_new = [0.0f64; 2];
            let mut gates = [[0.0f64; 2]; 3]; // z, r, h_tilde pre-activations
            for row in 0..2 {
                let lin = |m: &crate::numcore::Matrix| -> f64 {
                    (0..3).map(|c| m.get(row, c) * x[c]).sum::<f64>()
                };
                let rec = |m: &crate::numcore::Matrix, v: &[f64; 2]| -> f64 {
                    (0..2).map(|c| m.get(row, c) * v[c]).sum::<f64>()
                };
                gates[0][row] = sig(lin(&w.w_z) + rec(&w.u_z, &h_prev) + w.b_z.get(row, 0));
                gates[1][row] = sig(lin(&w.w_r) + rec(&w.u_r, &h_prev) + w.b_r.get(row, 0));
            }
            let rh = [gates[1][0] * h_prev[0], gates[1][1] * h_prev[1]];
            for row in 0..2 {
                let lin: f64 = (0..3).map(|c| w.w_h.get(row, c) * x[c]).sum();
                let rec: f64 = (0..2).map(|c| w.u_h.get(row, c) * rh[c]).sum();
                gates[2][row] = (lin + rec + w.b_h.get(row, 0)).tanh();
                h_new[row] =
                    (1.0 - gates[0][row]) * h_prev[row] + gates[0][row] * gates[2][row];
            }
            expected.push(h_new.to_vec());
            h_prev = h_new;
        }
        for (g, e) in got.iter().zip(&expected) {
            for (a, b) in g.iter().zip(e) {
                assert!((a - b).abs() < 1e-15, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn attend_singleton() {
        let state = vec![vec![0.3, -0.7, 0.1]];
        let (context, weights) = attend(&[1.0, 2.0, 3.0], &state);
        assert_eq!(weights, vec![1.0]);
        assert_eq!(context, state[0]);
    }

    #[test]
    fn attend_orthogonal_gives_uniform() {
        let states = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let h_t = [0.0, 0.0];
        let (context, weights) = attend(&h_t, &states);
        assert_eq!(weights, vec![0.5, 0.5]);
        assert_eq!(context, vec![0.5, 0.5]);
    }

    #[test]
    fn attend_ln2_scores() {
        // states chosen so scores are (0, ln 2)
        let states = vec![vec![0.0, 1.0], vec![2.0f64.ln(), 0.0]];
        let h_t = [1.0, 0.0];
        let (_, weights) = attend(&h_t, &states);
        assert!((weights[0] - 1.0 / 3.0).abs() < 1e-15);
        assert!((weights[1] - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn zero_output_projection_gives_uniform_distribution() {
        let mut params = test_params(5);
        params.out_wo.fill(0.0);
        params.out_bo.fill(0.0);
        let states = encode(&params, &[4, 5, 3]).unwrap();
        let (dist, _, _) = decode_step(&params, 3, &states[2], &states).unwrap();
        let v = params.vocab_size() as f64;
        for p in &dist {
            assert!((p - 1.0 / v).abs() < 1e-15);
        }
    }

    #[test]
    fn distribution_sums_to_one() {
        let params = test_params(8);
        let states = encode(&params, &[4, 5]).unwrap();
        let (dist, _, attn) = decode_step(&params, 3, &states[1], &states).unwrap();
        assert!((dist.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!((attn.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn decode_step_attention_matches_attend() {
        let params = test_params(9);
        let states = encode(&params, &[4, 5, 6]).unwrap();
        let (_, h_new, attn) = decode_step(&params, 3, &states[2], &states).unwrap();
        let (_, expected) = attend(&h_new, &states);
        assert_eq!(attn, expected);
    }

    #[test]
    fn uniform_distribution_loss_is_ln_vocab() {
        // all-zero parameters make every output distribution uniform
        let params = ModelParams::zeros(7, 5, 4);
        let (loss, _) = forward_loss(&params, &[1, 2, 3], &[4, 5, 3]).unwrap();
        assert!((loss - (7.0f64).ln()).abs() < 1e-12);
    }

    #[test]
    fn loss_nonnegative() {
        let params = test_params(10);
        let (loss, _) = forward_loss(&params, &[4, 5, 3], &[6, 3]).unwrap();
        assert!(loss >= 0.0);
    }

    #[test]
    fn loss_matches_decode_step_recomputation() {
        let params = test_params(11);
        let input = [4usize, 5, 6, 3];
        let target = [6usize, 4, 3];
        let (loss, _) = forward_loss(&params, &input, &target).unwrap();

        // recompute by composing the public ops
        let states = encode(&params, &input).unwrap();
        let mut h = states.last().unwrap().clone();
        let mut prev = *input.last().unwrap();
        let mut total = 0.0;
        for &gold in &target {
            let (dist, h_new, _) = decode_step(&params, prev, &h, &states).unwrap();
            total += -dist[gold].ln();
            h = h_new;
            prev = gold;
        }
        let expected = total / target.len() as f64;
        assert!((loss - expected).abs() < 1e-12);
    }

    #[test]
    fn empty_target_is_error() {
        let params = test_params(1);
        assert!(matches!(
            forward_loss(&params, &[3], &[]),
            Err(ModelError::Argument(_))
        ));
    }

    #[test]
    fn out_of_range_index_is_error() {
        let params = test_params(1);
        assert!(matches!(
            encode(&params, &[10_000]),
            Err(ModelError::VocabIndex { .. })
        ));
    }
}
