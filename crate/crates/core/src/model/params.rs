//! Parameter and gradient containers plus seeded initialization.
//!
//! Weight matrices are stored row-major as `[input][output]`, so a linear
//! layer computes `y[o] = sum_i x[i] * w[i * out + o] + b[o]`.

use serde::{Deserialize, Serialize};

use super::{ModelError, TrainConfig};
use crate::rng::Xoshiro256StarStar;

/// All weights of the multi-head debiasing model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub hidden: usize,
    pub vocab: usize,
    /// vocab x hidden token-embedding table.
    pub embed: Vec<f64>,
    /// hidden x 3 classification head.
    pub cls_w: Vec<f64>,
    pub cls_b: Vec<f64>,
    /// hidden -> 1 length-difference regressor.
    pub len_w: Vec<f64>,
    pub len_b: f64,
    /// hidden -> 1 overlap regressor.
    pub ov_w: Vec<f64>,
    pub ov_b: f64,
    /// hidden x hidden hypothesis encoder.
    pub hyp_w: Vec<f64>,
    pub hyp_b: Vec<f64>,
    /// Projection head: hidden x hidden, then hidden x (hidden/2).
    pub proj1_w: Vec<f64>,
    pub proj1_b: Vec<f64>,
    pub proj2_w: Vec<f64>,
    pub proj2_b: Vec<f64>,
    /// Similarity temperature for the contrastive head.
    pub temperature: f64,
}

/// Gradients with the same shapes as [`ModelParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub embed: Vec<f64>,
    pub cls_w: Vec<f64>,
    pub cls_b: Vec<f64>,
    pub len_w: Vec<f64>,
    pub len_b: f64,
    pub ov_w: Vec<f64>,
    pub ov_b: f64,
    pub hyp_w: Vec<f64>,
    pub hyp_b: Vec<f64>,
    pub proj1_w: Vec<f64>,
    pub proj1_b: Vec<f64>,
    pub proj2_w: Vec<f64>,
    pub proj2_b: Vec<f64>,
    pub temperature: f64,
}

/// Identifies a tensor when walking parameters and gradients in the fixed
/// canonical order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TensorRole {
    Embed,
    ClsW,
    ClsB,
    LenW,
    LenB,
    OvW,
    OvB,
    HypW,
    HypB,
    Proj1W,
    Proj1B,
    Proj2W,
    Proj2B,
    Temperature,
}

impl TensorRole {
    pub const ALL: [TensorRole; 14] = [
        TensorRole::Embed,
        TensorRole::ClsW,
        TensorRole::ClsB,
        TensorRole::LenW,
        TensorRole::LenB,
        TensorRole::OvW,
        TensorRole::OvB,
        TensorRole::HypW,
        TensorRole::HypB,
        TensorRole::Proj1W,
        TensorRole::Proj1B,
        TensorRole::Proj2W,
        TensorRole::Proj2B,
        TensorRole::Temperature,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TensorRole::Embed => "embed",
            TensorRole::ClsW => "cls_w",
            TensorRole::ClsB => "cls_b",
            TensorRole::LenW => "len_w",
            TensorRole::LenB => "len_b",
            TensorRole::OvW => "ov_w",
            TensorRole::OvB => "ov_b",
            TensorRole::HypW => "hyp_w",
            TensorRole::HypB => "hyp_b",
            TensorRole::Proj1W => "proj1_w",
            TensorRole::Proj1B => "proj1_b",
            TensorRole::Proj2W => "proj2_w",
            TensorRole::Proj2B => "proj2_b",
            TensorRole::Temperature => "temperature",
        }
    }
}

fn xavier_limit(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

fn fill_uniform(rng: &mut Xoshiro256StarStar, data: &mut [f64], limit: f64) {
    for x in data.iter_mut() {
        *x = rng.uniform(-limit, limit);
    }
}

impl ModelParams {
    /// Seeded initialization: embeddings uniform within 1/sqrt(hidden),
    /// weight matrices Xavier-uniform, biases zero, temperature from the
    /// config.
    pub fn init(config: &TrainConfig, rng: &mut Xoshiro256StarStar) -> Result<Self, ModelError> {
        config.validate()?;
        let h = config.hidden;
        let v = config.vocab;
        let k = h / 2;
        let mut params = Self {
            hidden: h,
            vocab: v,
            embed: vec![0.0; v * h],
            cls_w: vec![0.0; h * 3],
            cls_b: vec![0.0; 3],
            len_w: vec![0.0; h],
            len_b: 0.0,
            ov_w: vec![0.0; h],
            ov_b: 0.0,
            hyp_w: vec![0.0; h * h],
            hyp_b: vec![0.0; h],
            proj1_w: vec![0.0; h * h],
            proj1_b: vec![0.0; h],
            proj2_w: vec![0.0; h * k],
            proj2_b: vec![0.0; k],
            temperature: config.temperature,
        };
        let embed_limit = 1.0 / (h as f64).sqrt();
        fill_uniform(rng, &mut params.embed, embed_limit);
        fill_uniform(rng, &mut params.cls_w, xavier_limit(h, 3));
        fill_uniform(rng, &mut params.len_w, xavier_limit(h, 1));
        fill_uniform(rng, &mut params.ov_w, xavier_limit(h, 1));
        fill_uniform(rng, &mut params.hyp_w, xavier_limit(h, h));
        fill_uniform(rng, &mut params.proj1_w, xavier_limit(h, h));
        fill_uniform(rng, &mut params.proj2_w, xavier_limit(h, k));
        Ok(params)
    }

    pub fn proj_dim(&self) -> usize {
        self.hidden / 2
    }

    /// Check shape consistency and finiteness.
    pub fn validate(&self) -> Result<(), ModelError> {
        let h = self.hidden;
        let checks: [(&'static str, usize, usize); 11] = [
            ("embed", self.embed.len(), self.vocab * h),
            ("cls_w", self.cls_w.len(), h * 3),
            ("cls_b", self.cls_b.len(), 3),
            ("len_w", self.len_w.len(), h),
            ("ov_w", self.ov_w.len(), h),
            ("hyp_w", self.hyp_w.len(), h * h),
            ("hyp_b", self.hyp_b.len(), h),
            ("proj1_w", self.proj1_w.len(), h * h),
            ("proj1_b", self.proj1_b.len(), h),
            ("proj2_w", self.proj2_w.len(), h * (h / 2)),
            ("proj2_b", self.proj2_b.len(), h / 2),
        ];
        if h == 0 || h % 2 != 0 {
            return Err(ModelError::BadConfig(format!(
                "hidden size must be a positive even number, got {h}"
            )));
        }
        for (what, got, expected) in checks {
            if got != expected {
                return Err(ModelError::ShapeMismatch { what, expected, got });
            }
        }
        if !(self.temperature > 0.0) {
            return Err(ModelError::BadTemperature(self.temperature));
        }
        if !self.all_finite() {
            return Err(ModelError::NonFinite { head: "parameters" });
        }
        Ok(())
    }

    pub fn all_finite(&self) -> bool {
        self.tensors().iter().all(|(_, t)| t.iter().all(|x| x.is_finite()))
    }

    /// Tensors in canonical order as (role, slice) pairs.
    pub fn tensors(&self) -> [(TensorRole, &[f64]); 14] {
        [
            (TensorRole::Embed, self.embed.as_slice()),
            (TensorRole::ClsW, self.cls_w.as_slice()),
            (TensorRole::ClsB, self.cls_b.as_slice()),
            (TensorRole::LenW, self.len_w.as_slice()),
            (TensorRole::LenB, std::slice::from_ref(&self.len_b)),
            (TensorRole::OvW, self.ov_w.as_slice()),
            (TensorRole::OvB, std::slice::from_ref(&self.ov_b)),
            (TensorRole::HypW, self.hyp_w.as_slice()),
            (TensorRole::HypB, self.hyp_b.as_slice()),
            (TensorRole::Proj1W, self.proj1_w.as_slice()),
            (TensorRole::Proj1B, self.proj1_b.as_slice()),
            (TensorRole::Proj2W, self.proj2_w.as_slice()),
            (TensorRole::Proj2B, self.proj2_b.as_slice()),
            (TensorRole::Temperature, std::slice::from_ref(&self.temperature)),
        ]
    }

    pub fn tensors_mut(&mut self) -> [(TensorRole, &mut [f64]); 14] {
        [
            (TensorRole::Embed, self.embed.as_mut_slice()),
            (TensorRole::ClsW, self.cls_w.as_mut_slice()),
            (TensorRole::ClsB, self.cls_b.as_mut_slice()),
            (TensorRole::LenW, self.len_w.as_mut_slice()),
            (TensorRole::LenB, std::slice::from_mut(&mut self.len_b)),
            (TensorRole::OvW, self.ov_w.as_mut_slice()),
            (TensorRole::OvB, std::slice::from_mut(&mut self.ov_b)),
            (TensorRole::HypW, self.hyp_w.as_mut_slice()),
            (TensorRole::HypB, self.hyp_b.as_mut_slice()),
            (TensorRole::Proj1W, self.proj1_w.as_mut_slice()),
            (TensorRole::Proj1B, self.proj1_b.as_mut_slice()),
            (TensorRole::Proj2W, self.proj2_w.as_mut_slice()),
            (TensorRole::Proj2B, self.proj2_b.as_mut_slice()),
            (TensorRole::Temperature, std::slice::from_mut(&mut self.temperature)),
        ]
    }

    /// Total number of scalar parameters.
    pub fn coordinate_count(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }
}

impl Gradients {
    pub fn zeros(params: &ModelParams) -> Self {
        let h = params.hidden;
        let k = h / 2;
        Self {
            embed: vec![0.0; params.vocab * h],
            cls_w: vec![0.0; h * 3],
            cls_b: vec![0.0; 3],
            len_w: vec![0.0; h],
            len_b: 0.0,
            ov_w: vec![0.0; h],
            ov_b: 0.0,
            hyp_w: vec![0.0; h * h],
            hyp_b: vec![0.0; h],
            proj1_w: vec![0.0; h * h],
            proj1_b: vec![0.0; h],
            proj2_w: vec![0.0; h * k],
            proj2_b: vec![0.0; k],
            temperature: 0.0,
        }
    }

    pub fn tensors(&self) -> [(TensorRole, &[f64]); 14] {
        [
            (TensorRole::Embed, self.embed.as_slice()),
            (TensorRole::ClsW, self.cls_w.as_slice()),
            (TensorRole::ClsB, self.cls_b.as_slice()),
            (TensorRole::LenW, self.len_w.as_slice()),
            (TensorRole::LenB, std::slice::from_ref(&self.len_b)),
            (TensorRole::OvW, self.ov_w.as_slice()),
            (TensorRole::OvB, std::slice::from_ref(&self.ov_b)),
            (TensorRole::HypW, self.hyp_w.as_slice()),
            (TensorRole::HypB, self.hyp_b.as_slice()),
            (TensorRole::Proj1W, self.proj1_w.as_slice()),
            (TensorRole::Proj1B, self.proj1_b.as_slice()),
            (TensorRole::Proj2W, self.proj2_w.as_slice()),
            (TensorRole::Proj2B, self.proj2_b.as_slice()),
            (TensorRole::Temperature, std::slice::from_ref(&self.temperature)),
        ]
    }

    pub fn tensors_mut(&mut self) -> [(TensorRole, &mut [f64]); 14] {
        [
            (TensorRole::Embed, self.embed.as_mut_slice()),
            (TensorRole::ClsW, self.cls_w.as_mut_slice()),
            (TensorRole::ClsB, self.cls_b.as_mut_slice()),
            (TensorRole::LenW, self.len_w.as_mut_slice()),
            (TensorRole::LenB, std::slice::from_mut(&mut self.len_b)),
            (TensorRole::OvW, self.ov_w.as_mut_slice()),
            (TensorRole::OvB, std::slice::from_mut(&mut self.ov_b)),
            (TensorRole::HypW, self.hyp_w.as_mut_slice()),
            (TensorRole::HypB, self.hyp_b.as_mut_slice()),
            (TensorRole::Proj1W, self.proj1_w.as_mut_slice()),
            (TensorRole::Proj1B, self.proj1_b.as_mut_slice()),
            (TensorRole::Proj2W, self.proj2_w.as_mut_slice()),
            (TensorRole::Proj2B, self.proj2_b.as_mut_slice()),
            (TensorRole::Temperature, std::slice::from_mut(&mut self.temperature)),
        ]
    }

    /// Accumulate `other` into self (element-wise add).
    pub fn add_assign(&mut self, other: &Gradients) {
        for ((_, mine), (_, theirs)) in self.tensors_mut().iter_mut().zip(other.tensors().iter())
        {
            for (a, b) in mine.iter_mut().zip(theirs.iter()) {
                *a += *b;
            }
        }
    }

    /// Scale every entry.
    pub fn scale(&mut self, factor: f64) {
        for (_, tensor) in self.tensors_mut().iter_mut() {
            for x in tensor.iter_mut() {
                *x *= factor;
            }
        }
    }
}
