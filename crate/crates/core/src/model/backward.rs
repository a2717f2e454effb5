//! Analytic gradients of the total loss with respect to every parameter,
//! including the paths through row normalization, the similarity mask, and
//! the temperature scaling of the contrastive term.

use super::batch::Batch;
use super::forward::{forward, ContrastiveCache, ForwardOutput};
use super::params::{Gradients, ModelParams};
use super::{ContrastiveVariant, ModelError, TrainConfig};
use crate::corpus::Label;

/// dLoss/dSim for the active contrastive variant, already scaled by
/// `lambda_con / pos_pairs`. Returns a flat B x B matrix.
fn contrastive_sim_grad(
    cache: &ContrastiveCache,
    labels: &[Label],
    variant: ContrastiveVariant,
    lambda: f64,
) -> Vec<f64> {
    let b = cache.b;
    let mut grad = vec![0.0; b * b];
    if cache.pos_pairs == 0 || lambda == 0.0 {
        return grad;
    }
    let scale = lambda / cache.pos_pairs as f64;

    match variant {
        ContrastiveVariant::Literal => {
            for i in 0..b {
                let positives: Vec<usize> = (0..b)
                    .filter(|j| *j != i && labels[*j] == labels[i])
                    .collect();
                if positives.is_empty() {
                    continue;
                }
                let negatives: Vec<usize> = (0..b)
                    .filter(|k| *k != i && labels[*k] != labels[i])
                    .collect();
                // row denominator: exp of negative entries, exp(0) = 1 for
                // every masked slot (same label or diagonal)
                let denom: f64 = (b - negatives.len()) as f64
                    + negatives.iter().map(|k| cache.sim[i * b + k].exp()).sum::<f64>();
                for &j in &positives {
                    let e_pos = cache.sim[i * b + j].exp();
                    let total = e_pos + denom;
                    grad[i * b + j] += scale * (-denom / total);
                    for &k in &negatives {
                        grad[i * b + k] += scale * cache.sim[i * b + k].exp() / total;
                    }
                }
            }
        }
        ContrastiveVariant::InfoNce => {
            for i in 0..b {
                let pos_count =
                    (0..b).filter(|j| *j != i && labels[*j] == labels[i]).count();
                if pos_count == 0 {
                    continue;
                }
                let mut max = f64::NEG_INFINITY;
                for k in 0..b {
                    if k != i && cache.sim[i * b + k] > max {
                        max = cache.sim[i * b + k];
                    }
                }
                let z: f64 = (0..b)
                    .filter(|k| *k != i)
                    .map(|k| (cache.sim[i * b + k] - max).exp())
                    .sum();
                for k in 0..b {
                    if k == i {
                        continue;
                    }
                    let softmax = (cache.sim[i * b + k] - max).exp() / z;
                    grad[i * b + k] += scale * pos_count as f64 * softmax;
                    if labels[k] == labels[i] {
                        grad[i * b + k] -= scale;
                    }
                }
            }
        }
    }
    grad
}

/// Run a forward pass and compute gradients of `loss.total` for every
/// parameter tensor.
pub fn backward(
    batch: &Batch,
    params: &ModelParams,
    config: &TrainConfig,
) -> Result<(ForwardOutput, Gradients), ModelError> {
    let out = forward(batch, params, config)?;
    let b = out.batch_size;
    let h = params.hidden;
    let k = params.proj_dim();
    let inv_b = 1.0 / b as f64;
    let mut grads = Gradients::zeros(params);

    // --- contrastive head: dL/dprojections, dL/dtemperature ---
    let mut d_proj = vec![0.0; b * k];
    {
        let cache = &out.contrastive;
        let sim_grad = contrastive_sim_grad(
            cache,
            &batch.items.iter().map(|it| it.gold).collect::<Vec<_>>(),
            config.contrastive_variant,
            config.lambda_contrastive,
        );
        // sim = (unit unit^T) / temperature
        // d/d unit_i = ((G + G^T) unit)_i / temperature
        let mut d_unit = vec![0.0; b * k];
        for i in 0..b {
            for j in 0..b {
                let coeff = (sim_grad[i * b + j] + sim_grad[j * b + i]) / params.temperature;
                if coeff == 0.0 {
                    continue;
                }
                for d in 0..k {
                    d_unit[i * k + d] += coeff * cache.unit[j * k + d];
                }
            }
        }
        // d/d temperature: every sim entry scales as -sim/temperature
        let mut d_temp = 0.0;
        for idx in 0..b * b {
            d_temp -= sim_grad[idx] * cache.sim[idx] / params.temperature;
        }
        grads.temperature += d_temp;
        // unit = proj / ||proj||; zero rows stay zero and get no gradient
        for i in 0..b {
            let norm = cache.norms[i];
            if norm == 0.0 {
                continue;
            }
            let u = &cache.unit[i * k..(i + 1) * k];
            let du = &d_unit[i * k..(i + 1) * k];
            let du_dot_u: f64 = du.iter().zip(u).map(|(a, c)| a * c).sum();
            for d in 0..k {
                d_proj[i * k + d] = (du[d] - du_dot_u * u[d]) / norm;
            }
        }
    }

    // per-example buffers
    let mut d_pooled = vec![0.0; h];
    let mut d_hyp_rep = vec![0.0; h];
    let mut d_hyp_mean = vec![0.0; h];
    let mut d_z1 = vec![0.0; h];

    for (i, item) in batch.items.iter().enumerate() {
        let pooled = &out.pooled[i * h..(i + 1) * h];
        let hyp_mean = &out.hyp_mean[i * h..(i + 1) * h];
        let hyp_rep = &out.hyp_rep[i * h..(i + 1) * h];
        let a1 = &out.a1[i * h..(i + 1) * h];
        let z1 = &out.z1[i * h..(i + 1) * h];

        // cross-entropy: dlogits = (softmax - onehot) / B
        let mut d_logits = [0.0; 3];
        for c in 0..3 {
            d_logits[c] = out.probs[i * 3 + c] * inv_b;
        }
        d_logits[item.gold.code()] -= inv_b;

        // regression heads: d = lambda * 2 (pred - target) / B
        let d_len = config.lambda_length * 2.0 * (out.length_pred[i] - item.length_target) * inv_b;
        let d_ov = config.lambda_overlap * 2.0 * (out.overlap_pred[i] - item.overlap_target) * inv_b;

        d_pooled.iter_mut().for_each(|x| *x = 0.0);
        for hh in 0..h {
            let mut acc = 0.0;
            for c in 0..3 {
                grads.cls_w[hh * 3 + c] += pooled[hh] * d_logits[c];
                acc += params.cls_w[hh * 3 + c] * d_logits[c];
            }
            acc += d_len * params.len_w[hh] + d_ov * params.ov_w[hh];
            grads.len_w[hh] += d_len * pooled[hh];
            grads.ov_w[hh] += d_ov * pooled[hh];
            d_pooled[hh] = acc;
        }
        for c in 0..3 {
            grads.cls_b[c] += d_logits[c];
        }
        grads.len_b += d_len;
        grads.ov_b += d_ov;

        // projection head backward: z2 = a1 proj2_w + proj2_b
        let d_z2 = &d_proj[i * k..(i + 1) * k];
        d_z1.iter_mut().for_each(|x| *x = 0.0);
        for hh in 0..h {
            let mut acc = 0.0;
            for d in 0..k {
                grads.proj2_w[hh * k + d] += a1[hh] * d_z2[d];
                acc += params.proj2_w[hh * k + d] * d_z2[d];
            }
            // relu kink: pass gradient only where the pre-activation is positive
            d_z1[hh] = if z1[hh] > 0.0 { acc } else { 0.0 };
        }
        for d in 0..k {
            grads.proj2_b[d] += d_z2[d];
        }

        // z1 = hyp_rep proj1_w + proj1_b
        d_hyp_rep.iter_mut().for_each(|x| *x = 0.0);
        for hh in 0..h {
            let mut acc = 0.0;
            for o in 0..h {
                grads.proj1_w[hh * h + o] += hyp_rep[hh] * d_z1[o];
                acc += params.proj1_w[hh * h + o] * d_z1[o];
            }
            d_hyp_rep[hh] = acc;
        }
        for o in 0..h {
            grads.proj1_b[o] += d_z1[o];
        }

        // hyp_rep = hyp_mean hyp_w + hyp_b
        d_hyp_mean.iter_mut().for_each(|x| *x = 0.0);
        for hh in 0..h {
            let mut acc = 0.0;
            for o in 0..h {
                grads.hyp_w[hh * h + o] += hyp_mean[hh] * d_hyp_rep[o];
                acc += params.hyp_w[hh * h + o] * d_hyp_rep[o];
            }
            d_hyp_mean[hh] = acc;
        }
        for o in 0..h {
            grads.hyp_b[o] += d_hyp_rep[o];
        }

        // embedding rows: pooled averages premise + hypothesis tokens,
        // hyp_mean averages hypothesis tokens
        let bag_len = item.premise_ids.len() + item.hypothesis_ids.len();
        if bag_len > 0 {
            let inv_n = 1.0 / bag_len as f64;
            for id in item.premise_ids.iter().chain(item.hypothesis_ids.iter()) {
                let row = &mut grads.embed[id * h..(id + 1) * h];
                for (g, d) in row.iter_mut().zip(d_pooled.iter()) {
                    *g += d * inv_n;
                }
            }
        }
        if !item.hypothesis_ids.is_empty() {
            let inv_m = 1.0 / item.hypothesis_ids.len() as f64;
            for id in &item.hypothesis_ids {
                let row = &mut grads.embed[id * h..(id + 1) * h];
                for (g, d) in row.iter_mut().zip(d_hyp_mean.iter()) {
                    *g += d * inv_m;
                }
            }
        }
    }

    Ok((out, grads))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::BatchItem;
    use crate::rng::Xoshiro256StarStar;

    fn toy_config() -> TrainConfig {
        TrainConfig { hidden: 8, vocab: 64, ..TrainConfig::default() }
    }

    fn random_batch(rng: &mut Xoshiro256StarStar, b: usize, vocab: usize) -> Batch {
        let items = (0..b)
            .map(|_| {
                let plen = 2 + rng.below(5);
                let hlen = 1 + rng.below(4);
                BatchItem {
                    premise_ids: (0..plen).map(|_| rng.below(vocab)).collect(),
                    hypothesis_ids: (0..hlen).map(|_| rng.below(vocab)).collect(),
                    gold: Label::from_code(rng.below(3)).unwrap(),
                    length_target: rng.uniform(-1.0, 1.0),
                    overlap_target: rng.next_f64(),
                }
            })
            .collect();
        Batch { items }
    }

    /// Central finite differences against the analytic gradient; returns
    /// the maximum relative error over every parameter coordinate.
    fn finite_difference_max_rel_error(config: &TrainConfig, seed: u64) -> f64 {
        let mut rng = Xoshiro256StarStar::seed_from_u64(seed);
        let params = ModelParams::init(config, &mut rng).unwrap();
        let batch = random_batch(&mut rng, 4, config.vocab);
        let (_, grads) = backward(&batch, &params, config).unwrap();

        let eps = 1e-4;
        let mut max_rel = 0.0f64;
        let n_tensors = params.tensors().len();
        for t in 0..n_tensors {
            let len = params.tensors()[t].1.len();
            for c in 0..len {
                let analytic = grads.tensors()[t].1[c];
                let mut plus = params.clone();
                plus.tensors_mut()[t].1[c] += eps;
                let lp = forward(&batch, &plus, config).unwrap().loss.total;
                let mut minus = params.clone();
                minus.tensors_mut()[t].1[c] -= eps;
                let lm = forward(&batch, &minus, config).unwrap().loss.total;
                let numeric = (lp - lm) / (2.0 * eps);
                let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6);
                if rel > max_rel {
                    max_rel = rel;
                }
            }
        }
        max_rel
    }

    #[test]
    fn cls_bias_gradient_is_mean_softmax_minus_onehot() {
        let config = TrainConfig {
            lambda_length: 0.0,
            lambda_overlap: 0.0,
            lambda_contrastive: 0.0,
            ..toy_config()
        };
        let mut rng = Xoshiro256StarStar::seed_from_u64(3);
        let params = ModelParams::init(&config, &mut rng).unwrap();
        let batch = random_batch(&mut rng, 4, 64);
        let (out, grads) = backward(&batch, &params, &config).unwrap();
        for c in 0..3 {
            let mut expected = 0.0;
            for (i, item) in batch.items.iter().enumerate() {
                expected += out.probs[i * 3 + c] - f64::from(u8::from(item.gold.code() == c));
            }
            expected /= 4.0;
            assert!((grads.cls_b[c] - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn near_zero_loss_has_near_zero_gradient() {
        let config = TrainConfig {
            lambda_length: 0.0,
            lambda_overlap: 0.0,
            lambda_contrastive: 0.0,
            ..toy_config()
        };
        let mut rng = Xoshiro256StarStar::seed_from_u64(4);
        let mut params = ModelParams::init(&config, &mut rng).unwrap();
        // constant logits strongly favoring the gold class of every item
        params.embed.iter_mut().for_each(|x| *x = 0.0);
        params.cls_b = vec![40.0, 0.0, 0.0];
        let batch = Batch {
            items: vec![BatchItem {
                premise_ids: vec![1, 2, 3],
                hypothesis_ids: vec![4],
                gold: Label::Entailment,
                length_target: 0.0,
                overlap_target: 0.0,
            }],
        };
        let (out, grads) = backward(&batch, &params, &config).unwrap();
        assert!(out.loss.total < 1e-12);
        let norm = crate::model::global_grad_norm(&grads, true);
        assert!(norm < 1e-8, "gradient norm {norm}");
    }

    #[test]
    fn finite_differences_match_default_config() {
        let config = toy_config();
        for seed in [11, 12] {
            let err = finite_difference_max_rel_error(&config, seed);
            assert!(err <= 1e-4, "seed {seed}: max relative error {err}");
        }
    }

    #[test]
    fn finite_differences_match_infonce_variant() {
        let config = TrainConfig {
            contrastive_variant: ContrastiveVariant::InfoNce,
            ..toy_config()
        };
        for seed in [21, 22] {
            let err = finite_difference_max_rel_error(&config, seed);
            assert!(err <= 1e-4, "seed {seed}: max relative error {err}");
        }
    }

    #[test]
    fn finite_differences_match_nonunit_temperature() {
        let config = TrainConfig { temperature: 0.5, ..toy_config() };
        let err = finite_difference_max_rel_error(&config, 33);
        assert!(err <= 1e-4, "max relative error {err}");
    }
}
