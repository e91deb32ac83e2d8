//! Exact reverse-mode gradients of the teacher-forced loss, mirroring the
//! forward pass step by step. Checked against central finite differences.

use crate::numcore::{dot, matvec_t_add, outer_add};

use super::forward::{ForwardCache, GruStep};
use super::params::{GruWeights, ModelGrads, ModelParams};

/// Backpropagate one GRU step. `dh` is the gradient arriving at h; returns
/// (dx, dh_prev) and accumulates weight gradients into `g`.
fn gru_backward(
    w: &GruWeights,
    g: &mut GruWeights,
    x: &[f64],
    h_prev: &[f64],
    step: &GruStep,
    dh: &[f64],
) -> (Vec<f64>, Vec<f64>) {
    let hidden = dh.len();
    // h = (1-z) .* h_prev + z .* h~
    let dz: Vec<f64> = step
        .h_tilde
        .iter()
        .zip(h_prev)
        .zip(dh)
        .map(|((ht, hp), d)| (ht - hp) * d)
        .collect();
    let dh_tilde: Vec<f64> = step.z.iter().zip(dh).map(|(z, d)| z * d).collect();
    let mut dh_prev: Vec<f64> = step.z.iter().zip(dh).map(|(z, d)| (1.0 - z) * d).collect();

    // candidate gate: h~ = tanh(W_h x + U_h (r .* h_prev) + b_h)
    let dpre_h: Vec<f64> = step
        .h_tilde
        .iter()
        .zip(&dh_tilde)
        .map(|(ht, d)| (1.0 - ht * ht) * d)
        .collect();
    outer_add(&mut g.w_h, &dpre_h, x);
    outer_add(&mut g.u_h, &dpre_h, &step.hr);
    for (b, d) in g.b_h.data_mut().iter_mut().zip(&dpre_h) {
        *b += d;
    }
    let mut dx = vec![0.0; x.len()];
    matvec_t_add(&mut dx, &w.w_h, &dpre_h);
    let mut dhr = vec![0.0; hidden];
    matvec_t_add(&mut dhr, &w.u_h, &dpre_h);
    let dr: Vec<f64> = h_prev.iter().zip(&dhr).map(|(hp, d)| hp * d).collect();
    for ((dhp, r), d) in dh_prev.iter_mut().zip(&step.r).zip(&dhr) {
        *dhp += r * d;
    }

    // update gate: z = sigma(W_z x + U_z h_prev + b_z)
    let dpre_z: Vec<f64> = step.z.iter().zip(&dz).map(|(z, d)| z * (1.0 - z) * d).collect();
    outer_add(&mut g.w_z, &dpre_z, x);
    outer_add(&mut g.u_z, &dpre_z, h_prev);
    for (b, d) in g.b_z.data_mut().iter_mut().zip(&dpre_z) {
        *b += d;
    }
    matvec_t_add(&mut dx, &w.w_z, &dpre_z);
    matvec_t_add(&mut dh_prev, &w.u_z, &dpre_z);

    // reset gate: r = sigma(W_r x + U_r h_prev + b_r)
    let dpre_r: Vec<f64> = step.r.iter().zip(&dr).map(|(r, d)| r * (1.0 - r) * d).collect();
    outer_add(&mut g.w_r, &dpre_r, x);
    outer_add(&mut g.u_r, &dpre_r, h_prev);
    for (b, d) in g.b_r.data_mut().iter_mut().zip(&dpre_r) {
        *b += d;
    }
    matvec_t_add(&mut dx, &w.w_r, &dpre_r);
    matvec_t_add(&mut dh_prev, &w.u_r, &dpre_r);

    (dx, dh_prev)
}

/// Gradients of `forward_loss` with respect to every parameter.
pub fn backward(params: &ModelParams, cache: &ForwardCache) -> ModelGrads {
    let hidden = params.hidden_dim();
    let n_steps = cache.dec.len();
    let scale = 1.0 / n_steps as f64;
    let mut grads = params.zeros_like();

    // gradient arriving at each encoder state through attention
    let mut d_states: Vec<Vec<f64>> = vec![vec![0.0; hidden]; cache.enc.len()];
    // gradient arriving at the decoder hidden state from the following step
    let mut dg_next = vec![0.0; hidden];

    for j in (0..n_steps).rev() {
        let step = &cache.dec[j];
        let gold = cache.target_ids[j];

        // softmax + NLL: d logits = (p - onehot) / L
        let mut d_logits = step.probs.clone();
        d_logits[gold] -= 1.0;
        d_logits.iter_mut().for_each(|v| *v *= scale);

        outer_add(&mut grads.out_wo, &d_logits, &step.attn_out);
        for (b, d) in grads.out_bo.data_mut().iter_mut().zip(&d_logits) {
            *b += d;
        }
        let mut da = vec![0.0; hidden];
        matvec_t_add(&mut da, &params.out_wo, &d_logits);

        // attn_out = tanh(W_c [context; h])
        let dv: Vec<f64> = step
            .attn_out
            .iter()
            .zip(&da)
            .map(|(a, d)| (1.0 - a * a) * d)
            .collect();
        let concat: Vec<f64> = step.context.iter().chain(&step.gru.h).copied().collect();
        outer_add(&mut grads.attn_wc, &dv, &concat);
        let mut du = vec![0.0; 2 * hidden];
        matvec_t_add(&mut du, &params.attn_wc, &dv);
        let (dc, dg_att) = du.split_at(hidden);

        // attention: context = sum_s alpha_s h_s, alpha = softmax(h_t . h_s)
        let d_alpha: Vec<f64> = cache.enc.iter().map(|s| dot(&s.h, dc)).collect();
        for (s, alpha) in step.weights.iter().enumerate() {
            for (ds, d) in d_states[s].iter_mut().zip(dc) {
                *ds += alpha * d;
            }
        }
        let weighted: f64 = dot(&step.weights, &d_alpha);
        let d_scores: Vec<f64> = step
            .weights
            .iter()
            .zip(&d_alpha)
            .map(|(a, d)| a * (d - weighted))
            .collect();
        let mut dg_total: Vec<f64> = dg_next
            .iter()
            .zip(dg_att)
            .map(|(next, att)| next + att)
            .collect();
        for (s, ds) in d_scores.iter().enumerate() {
            for (g, h) in dg_total.iter_mut().zip(&cache.enc[s].h) {
                *g += ds * h;
            }
            for (dst, g) in d_states[s].iter_mut().zip(&step.gru.h) {
                *dst += ds * g;
            }
        }

        let h_prev = if j == 0 {
            &cache.enc[cache.enc.len() - 1].h
        } else {
            &cache.dec[j - 1].gru.h
        };
        let x = params.embedding.row(step.prev_id);
        let (dx, dg_prev) = gru_backward(
            &params.decoder,
            &mut grads.decoder,
            x,
            h_prev,
            &step.gru,
            &dg_total,
        );
        for (e, d) in grads.embedding.row_mut(step.prev_id).iter_mut().zip(&dx) {
            *e += d;
        }
        dg_next = dg_prev;
    }

    // decoder initial hidden was the final encoder state
    let last = cache.enc.len() - 1;
    for (ds, d) in d_states[last].iter_mut().zip(&dg_next) {
        *ds += d;
    }

    let zero = vec![0.0; hidden];
    let mut dh_next = vec![0.0; hidden];
    for s in (0..cache.enc.len()).rev() {
        let dh_total: Vec<f64> = d_states[s].iter().zip(&dh_next).map(|(a, b)| a + b).collect();
        let h_prev = if s == 0 { &zero } else { &cache.enc[s - 1].h };
        let x = params.embedding.row(cache.input_ids[s]);
        let (dx, dh_prev) = gru_backward(
            &params.encoder,
            &mut grads.encoder,
            x,
            h_prev,
            &cache.enc[s],
            &dh_total,
        );
        for (e, d) in grads
            .embedding
            .row_mut(cache.input_ids[s])
            .iter_mut()
            .zip(&dx)
        {
            *e += d;
        }
        dh_next = dh_prev;
    }

    grads
}
