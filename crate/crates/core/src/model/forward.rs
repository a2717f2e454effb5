//! Forward pass: shared bag-of-words encoder, the four heads, and the
//! combined loss.

use super::batch::Batch;
use super::params::ModelParams;
use super::{ContrastiveVariant, LossBreakdown, ModelError, TrainConfig};
use crate::corpus::Label;

/// y[o] = sum_i x[i] * w[i * out + o] + b[o]
fn affine(x: &[f64], w: &[f64], b: &[f64], out: &mut [f64]) {
    out.copy_from_slice(b);
    let width = out.len();
    for (i, xi) in x.iter().enumerate() {
        if *xi == 0.0 {
            continue;
        }
        let row = &w[i * width..(i + 1) * width];
        for (o, wo) in row.iter().enumerate() {
            out[o] += xi * wo;
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Encoder output for a single example.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodeOutput {
    /// Mean embedding over premise tokens followed by hypothesis tokens.
    pub pooled: Vec<f64>,
    /// Mean embedding over hypothesis tokens only.
    pub hyp_mean: Vec<f64>,
    /// Linear hypothesis encoder applied to `hyp_mean`.
    pub hyp_rep: Vec<f64>,
}

/// Mean-of-embeddings over the given token ids; zero vector when empty.
fn mean_embedding(ids: &[usize], params: &ModelParams, out: &mut [f64]) {
    out.iter_mut().for_each(|x| *x = 0.0);
    if ids.is_empty() {
        return;
    }
    let h = params.hidden;
    for id in ids {
        let row = &params.embed[id * h..(id + 1) * h];
        for (o, r) in out.iter_mut().zip(row) {
            *o += r;
        }
    }
    let inv = 1.0 / ids.len() as f64;
    out.iter_mut().for_each(|x| *x *= inv);
}

/// Encode one example: pooled bag over premise + hypothesis, and the
/// hypothesis-only representation.
pub fn encode(premise_ids: &[usize], hypothesis_ids: &[usize], params: &ModelParams) -> EncodeOutput {
    let h = params.hidden;
    let mut pooled = vec![0.0; h];
    let combined: Vec<usize> =
        premise_ids.iter().chain(hypothesis_ids.iter()).copied().collect();
    mean_embedding(&combined, params, &mut pooled);

    let mut hyp_mean = vec![0.0; h];
    mean_embedding(hypothesis_ids, params, &mut hyp_mean);

    let mut hyp_rep = vec![0.0; h];
    affine(&hyp_mean, &params.hyp_w, &params.hyp_b, &mut hyp_rep);
    EncodeOutput { pooled, hyp_mean, hyp_rep }
}

/// Numerically stable softmax over three logits.
pub(crate) fn softmax3(logits: &[f64]) -> [f64; 3] {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps = [
        (logits[0] - max).exp(),
        (logits[1] - max).exp(),
        (logits[2] - max).exp(),
    ];
    let sum = exps[0] + exps[1] + exps[2];
    [exps[0] / sum, exps[1] / sum, exps[2] / sum]
}

/// Everything produced by one forward pass, including the intermediate
/// activations the backward pass consumes. Per-example rows are stored
/// flat, row-major.
#[derive(Debug, Clone)]
pub struct ForwardOutput {
    pub batch_size: usize,
    /// B x 3 classification logits.
    pub logits: Vec<f64>,
    /// B x 3 softmax probabilities.
    pub probs: Vec<f64>,
    /// B length-head outputs.
    pub length_pred: Vec<f64>,
    /// B overlap-head outputs.
    pub overlap_pred: Vec<f64>,
    /// B x (hidden/2) projection rows.
    pub projections: Vec<f64>,
    pub loss: LossBreakdown,
    pub(crate) pooled: Vec<f64>,
    pub(crate) hyp_mean: Vec<f64>,
    pub(crate) hyp_rep: Vec<f64>,
    pub(crate) z1: Vec<f64>,
    pub(crate) a1: Vec<f64>,
    pub(crate) contrastive: ContrastiveCache,
}

/// Cached similarity structure shared by the contrastive loss and its
/// gradient.
#[derive(Debug, Clone)]
pub(crate) struct ContrastiveCache {
    pub b: usize,
    /// Row L2 norms of the raw projections.
    pub norms: Vec<f64>,
    /// Row-normalized projections, B x dim; zero rows stay zero.
    pub unit: Vec<f64>,
    /// Temperature-scaled similarity matrix, B x B.
    pub sim: Vec<f64>,
    /// Number of (i, j) positive pairs (same label, i != j).
    pub pos_pairs: usize,
    pub loss: f64,
}

fn check_finite(values: &[f64], head: &'static str) -> Result<(), ModelError> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(ModelError::NonFinite { head })
    }
}

/// Build the similarity cache and evaluate the contrastive loss.
pub(crate) fn contrastive_forward(
    projections: &[f64],
    dim: usize,
    labels: &[Label],
    temperature: f64,
    variant: ContrastiveVariant,
) -> Result<ContrastiveCache, ModelError> {
    if !(temperature > 0.0) {
        return Err(ModelError::BadTemperature(temperature));
    }
    let b = labels.len();
    debug_assert_eq!(projections.len(), b * dim);

    let mut norms = vec![0.0; b];
    let mut unit = vec![0.0; b * dim];
    for i in 0..b {
        let row = &projections[i * dim..(i + 1) * dim];
        let norm = dot(row, row).sqrt();
        norms[i] = norm;
        if norm > 0.0 {
            for (u, v) in unit[i * dim..(i + 1) * dim].iter_mut().zip(row) {
                *u = v / norm;
            }
        }
    }

    let mut sim = vec![0.0; b * b];
    for i in 0..b {
        for j in 0..b {
            sim[i * b + j] =
                dot(&unit[i * dim..(i + 1) * dim], &unit[j * dim..(j + 1) * dim]) / temperature;
        }
    }

    let mut pos_pairs = 0usize;
    let mut loss_sum = 0.0;
    match variant {
        ContrastiveVariant::Literal => {
            // Denominator row sums over the masked negative matrix, where
            // masked-out entries are zero and contribute exp(0) = 1 each.
            for i in 0..b {
                let mut denom = 0.0;
                for k in 0..b {
                    let negative = k != i && labels[k] != labels[i];
                    denom += if negative { sim[i * b + k].exp() } else { 1.0 };
                }
                for j in 0..b {
                    if j == i || labels[j] != labels[i] {
                        continue;
                    }
                    let e_pos = sim[i * b + j].exp();
                    loss_sum += -(e_pos / (e_pos + denom)).ln();
                    pos_pairs += 1;
                }
            }
        }
        ContrastiveVariant::InfoNce => {
            // Standard form: log-sum-exp over all non-self entries.
            for i in 0..b {
                let row = &sim[i * b..(i + 1) * b];
                let mut max = f64::NEG_INFINITY;
                for (k, s) in row.iter().enumerate() {
                    if k != i && *s > max {
                        max = *s;
                    }
                }
                if !max.is_finite() {
                    continue; // single-example batch: no non-self entries
                }
                let lse: f64 = row
                    .iter()
                    .enumerate()
                    .filter(|(k, _)| *k != i)
                    .map(|(_, s)| (s - max).exp())
                    .sum::<f64>()
                    .ln()
                    + max;
                for j in 0..b {
                    if j == i || labels[j] != labels[i] {
                        continue;
                    }
                    loss_sum += lse - row[j];
                    pos_pairs += 1;
                }
            }
        }
    }

    let loss = if pos_pairs == 0 { 0.0 } else { loss_sum / pos_pairs as f64 };
    Ok(ContrastiveCache { b, norms, unit, sim, pos_pairs, loss })
}

/// Contrastive loss over projection rows: pulls same-label rows together in
/// temperature-scaled cosine-similarity space. Returns 0 when no positive
/// pairs exist.
pub fn contrastive_loss(
    projections: &[f64],
    dim: usize,
    labels: &[Label],
    temperature: f64,
    variant: ContrastiveVariant,
) -> Result<f64, ModelError> {
    Ok(contrastive_forward(projections, dim, labels, temperature, variant)?.loss)
}

/// Full forward pass over a batch.
pub fn forward(
    batch: &Batch,
    params: &ModelParams,
    config: &TrainConfig,
) -> Result<ForwardOutput, ModelError> {
    batch.validate()?;
    let b = batch.len();
    let h = params.hidden;
    let k = params.proj_dim();

    let mut pooled = vec![0.0; b * h];
    let mut hyp_mean = vec![0.0; b * h];
    let mut hyp_rep = vec![0.0; b * h];
    let mut logits = vec![0.0; b * 3];
    let mut probs = vec![0.0; b * 3];
    let mut length_pred = vec![0.0; b];
    let mut overlap_pred = vec![0.0; b];
    let mut z1 = vec![0.0; b * h];
    let mut a1 = vec![0.0; b * h];
    let mut projections = vec![0.0; b * k];

    let mut ce = 0.0;
    let mut length_mse = 0.0;
    let mut overlap_mse = 0.0;
    let mut labels = Vec::with_capacity(b);

    for (i, item) in batch.items.iter().enumerate() {
        let enc = encode(&item.premise_ids, &item.hypothesis_ids, params);
        pooled[i * h..(i + 1) * h].copy_from_slice(&enc.pooled);
        hyp_mean[i * h..(i + 1) * h].copy_from_slice(&enc.hyp_mean);
        hyp_rep[i * h..(i + 1) * h].copy_from_slice(&enc.hyp_rep);

        let row_logits = &mut logits[i * 3..(i + 1) * 3];
        affine(&enc.pooled, &params.cls_w, &params.cls_b, row_logits);
        let p = softmax3(row_logits);
        probs[i * 3..(i + 1) * 3].copy_from_slice(&p);
        ce += -p[item.gold.code()].ln();

        length_pred[i] = dot(&enc.pooled, &params.len_w) + params.len_b;
        overlap_pred[i] = dot(&enc.pooled, &params.ov_w) + params.ov_b;
        length_mse += (length_pred[i] - item.length_target).powi(2);
        overlap_mse += (overlap_pred[i] - item.overlap_target).powi(2);

        let row_z1 = &mut z1[i * h..(i + 1) * h];
        affine(&enc.hyp_rep, &params.proj1_w, &params.proj1_b, row_z1);
        for (a, z) in a1[i * h..(i + 1) * h].iter_mut().zip(row_z1.iter()) {
            *a = z.max(0.0);
        }
        affine(
            &a1[i * h..(i + 1) * h],
            &params.proj2_w,
            &params.proj2_b,
            &mut projections[i * k..(i + 1) * k],
        );
        labels.push(item.gold);
    }

    check_finite(&logits, "classifier")?;
    check_finite(&length_pred, "length")?;
    check_finite(&overlap_pred, "overlap")?;
    check_finite(&projections, "projection")?;

    ce /= b as f64;
    length_mse /= b as f64;
    overlap_mse /= b as f64;

    let contrastive = contrastive_forward(
        &projections,
        k,
        &labels,
        params.temperature,
        config.contrastive_variant,
    )?;
    if !contrastive.loss.is_finite() {
        return Err(ModelError::NonFinite { head: "contrastive" });
    }
    if !ce.is_finite() {
        return Err(ModelError::NonFinite { head: "classifier" });
    }

    let loss = LossBreakdown::combine(ce, length_mse, overlap_mse, contrastive.loss, config);
    Ok(ForwardOutput {
        batch_size: b,
        logits,
        probs,
        length_pred,
        overlap_pred,
        projections,
        loss,
        pooled,
        hyp_mean,
        hyp_rep,
        z1,
        a1,
        contrastive,
    })
}
