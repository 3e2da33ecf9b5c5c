//! NARX predictor: one tanh hidden layer over tapped delay lines of two
//! exogenous inputs and the fed-back output, linear output unit.
//!
//! The regressor for step `n` is, in normalized units,
//!
//! ```text
//! [u1(n) … u1(n−d_u1), u2(n) … u2(n−d_u2), y(n−1) … y(n−d_y)]
//! ```
//!
//! so the current inputs take part in predicting the current output.

mod norm;
mod train;

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::math;
use crate::rng::stream_rng;
use crate::{Error, Result};

pub use norm::{fit_normalization, Affine, Normalization};
pub use train::{
    jacobian, jacobian_row, mse, train_lm, EpochLog, SplitPart, StopReason, TrainOutcome, TrainingSet,
};

/// Output-tap value used when delay lines are reset at the start of an epoch.
pub const RESET_OUTPUT: f64 = 0.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NarxConfig {
    pub hidden_nodes: usize,
    pub d_u1: usize,
    pub d_u2: usize,
    pub d_y: usize,
    pub lm_lambda0: f64,
    pub lambda_up: f64,
    pub lambda_down: f64,
    pub max_epochs: usize,
    pub early_stop_patience: usize,
    pub max_consecutive_rejections: usize,
}

impl Default for NarxConfig {
    fn default() -> Self {
        Self {
            hidden_nodes: 50,
            d_u1: 7,
            d_u2: 7,
            d_y: 7,
            lm_lambda0: 1e-3,
            lambda_up: 10.0,
            lambda_down: 0.1,
            max_epochs: 200,
            early_stop_patience: 6,
            max_consecutive_rejections: 20,
        }
    }
}

impl NarxConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden_nodes == 0 {
            return Err(Error::Config("hidden_nodes must be at least 1"));
        }
        if self.d_u1 < self.d_y || self.d_u2 < self.d_y {
            return Err(Error::Config("input delay orders must be at least the output delay order"));
        }
        if !(self.lm_lambda0 > 0.0) || !(self.lambda_up > 1.0) || !(self.lambda_down > 0.0 && self.lambda_down < 1.0) {
            return Err(Error::Config("damping parameters must satisfy λ0 > 0, up > 1, 0 < down < 1"));
        }
        if self.max_consecutive_rejections == 0 {
            return Err(Error::Config("max_consecutive_rejections must be at least 1"));
        }
        Ok(())
    }

    pub fn regressor_len(&self) -> usize {
        (self.d_u1 + 1) + (self.d_u2 + 1) + self.d_y
    }
}

/// Raw-unit series for one training or evaluation sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sequence {
    pub u1: Vec<f64>,
    pub u2: Vec<f64>,
    pub y: Vec<f64>,
    /// Primary network load the sequence was collected at.
    pub load: f64,
}

impl Sequence {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn check(&self) -> Result<()> {
        if self.u1.len() != self.y.len() {
            return Err(Error::Dimension { expected: self.y.len(), got: self.u1.len() });
        }
        if self.u2.len() != self.y.len() {
            return Err(Error::Dimension { expected: self.y.len(), got: self.u2.len() });
        }
        Ok(())
    }
}

/// Past samples that fill the delay lines before a prediction run.
#[derive(Debug, Clone, PartialEq)]
pub struct History {
    pub u1: Vec<f64>,
    pub u2: Vec<f64>,
    pub y: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NarxModel {
    pub d_u1: usize,
    pub d_u2: usize,
    pub d_y: usize,
    pub hidden_nodes: usize,
    /// `hidden_nodes × regressor_len`, row-major.
    pub input_weights: Vec<f64>,
    pub input_biases: Vec<f64>,
    pub output_weights: Vec<f64>,
    pub output_bias: f64,
    pub normalization: Normalization,
}

/// Uniform weights in `[−0.5, 0.5] / √fan_in`, identity normalization.
pub fn init_model(cfg: &NarxConfig, seed: u64) -> Result<NarxModel> {
    cfg.validate()?;
    let mut rng = stream_rng(seed, 0x4e41_5258);
    let r = cfg.regressor_len();
    let h = cfg.hidden_nodes;
    let mut draw = |fan_in: usize, n: usize| -> Vec<f64> {
        let bound = 1.0 / math::sqrt(fan_in as f64);
        (0..n).map(|_| (rng.random::<f64>() - 0.5) * bound).collect()
    };
    let input_weights = draw(r, h * r);
    let input_biases = draw(r, h);
    let output_weights = draw(h, h);
    let output_bias = draw(h, 1)[0];
    Ok(NarxModel {
        d_u1: cfg.d_u1,
        d_u2: cfg.d_u2,
        d_y: cfg.d_y,
        hidden_nodes: h,
        input_weights,
        input_biases,
        output_weights,
        output_bias,
        normalization: Normalization::default(),
    })
}

impl NarxModel {
    pub fn regressor_len(&self) -> usize {
        (self.d_u1 + 1) + (self.d_u2 + 1) + self.d_y
    }

    /// Samples of history needed before the first prediction.
    pub fn warmup(&self) -> usize {
        self.d_u1.max(self.d_u2).max(self.d_y)
    }

    pub fn param_count(&self) -> usize {
        self.hidden_nodes * (self.regressor_len() + 2) + 1
    }

    /// Checks internal dimensions (used after deserialization).
    pub fn validate(&self) -> Result<()> {
        let (h, r) = (self.hidden_nodes, self.regressor_len());
        if h == 0 {
            return Err(Error::Config("hidden_nodes must be at least 1"));
        }
        if self.input_weights.len() != h * r {
            return Err(Error::Dimension { expected: h * r, got: self.input_weights.len() });
        }
        if self.input_biases.len() != h {
            return Err(Error::Dimension { expected: h, got: self.input_biases.len() });
        }
        if self.output_weights.len() != h {
            return Err(Error::Dimension { expected: h, got: self.output_weights.len() });
        }
        let all_finite = self
            .input_weights
            .iter()
            .chain(&self.input_biases)
            .chain(&self.output_weights)
            .all(|w| w.is_finite())
            && self.output_bias.is_finite();
        if !all_finite {
            return Err(Error::Domain("model weights must be finite"));
        }
        Ok(())
    }

    /// Flattened parameters: input weights, input biases, output weights,
    /// output bias.
    pub fn params(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.param_count());
        p.extend_from_slice(&self.input_weights);
        p.extend_from_slice(&self.input_biases);
        p.extend_from_slice(&self.output_weights);
        p.push(self.output_bias);
        p
    }

    pub fn set_params(&mut self, p: &[f64]) -> Result<()> {
        if p.len() != self.param_count() {
            return Err(Error::Dimension { expected: self.param_count(), got: p.len() });
        }
        let (h, r) = (self.hidden_nodes, self.regressor_len());
        let (w, rest) = p.split_at(h * r);
        let (b, rest) = rest.split_at(h);
        let (v, c) = rest.split_at(h);
        self.input_weights.copy_from_slice(w);
        self.input_biases.copy_from_slice(b);
        self.output_weights.copy_from_slice(v);
        self.output_bias = c[0];
        Ok(())
    }

    /// One-step output in normalized units.
    pub fn forward(&self, regressor: &[f64]) -> Result<f64> {
        let r = self.regressor_len();
        if regressor.len() != r {
            return Err(Error::Dimension { expected: r, got: regressor.len() });
        }
        let mut out = self.output_bias;
        for (h, row) in self.input_weights.chunks_exact(r).enumerate() {
            let a = dot(row, regressor) + self.input_biases[h];
            out += self.output_weights[h] * math::tanh(a);
        }
        Ok(out)
    }

    /// Builds the normalized regressor for index `n` of normalized series.
    fn regressor_at(&self, u1: &[f64], u2: &[f64], y: &[f64], n: usize, out: &mut Vec<f64>) {
        out.clear();
        for k in 0..=self.d_u1 {
            out.push(u1[n - k]);
        }
        for k in 0..=self.d_u2 {
            out.push(u2[n - k]);
        }
        for k in 1..=self.d_y {
            out.push(y[n - k]);
        }
    }

    fn normalize(&self, u1: &[f64], u2: &[f64], y: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let n = &self.normalization;
        (
            u1.iter().map(|&v| n.u1.apply(v)).collect(),
            u2.iter().map(|&v| n.u2.apply(v)).collect(),
            y.iter().map(|&v| n.y.apply(v)).collect(),
        )
    }

    /// Delay lines reset to a steady state: every input tap holds the
    /// epoch's first input, every output tap holds [`RESET_OUTPUT`].
    pub fn reset_history(&self, u1_0: f64, u2_0: f64) -> History {
        let w = self.warmup();
        History { u1: vec![u1_0; w], u2: vec![u2_0; w], y: vec![RESET_OUTPUT; w] }
    }

    /// Closed-loop prediction over a whole epoch starting from a reset
    /// delay line. Output has one entry per input sample, in raw units.
    pub fn predict_epoch(&self, u1: &[f64], u2: &[f64]) -> Result<Vec<f64>> {
        if u1.is_empty() {
            return Ok(Vec::new());
        }
        let hist = self.reset_history(u1[0], u2[0]);
        closed_loop_predict(self, &hist, u1, u2)
    }

    /// Regressor/target pairs for every step of `seq` after a delay-line
    /// reset, using measured outputs (series-parallel), normalized.
    pub fn epoch_samples(&self, seq: &Sequence) -> Result<Vec<(Vec<f64>, f64)>> {
        seq.check()?;
        if seq.is_empty() {
            return Ok(Vec::new());
        }
        let hist = self.reset_history(seq.u1[0], seq.u2[0]);
        let u1: Vec<f64> = hist.u1.iter().chain(&seq.u1).copied().collect();
        let u2: Vec<f64> = hist.u2.iter().chain(&seq.u2).copied().collect();
        let y: Vec<f64> = hist.y.iter().chain(&seq.y).copied().collect();
        let (u1, u2, y) = self.normalize(&u1, &u2, &y);
        let mut out = Vec::with_capacity(seq.len());
        let mut reg = Vec::with_capacity(self.regressor_len());
        for n in self.warmup()..y.len() {
            self.regressor_at(&u1, &u2, &y, n, &mut reg);
            out.push((reg.clone(), y[n]));
        }
        Ok(out)
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// One-step-ahead predictions with measured output history
/// (series-parallel). Returns `len − warmup` raw-unit predictions, aligned
/// with `y[warmup..]`.
pub fn open_loop_predict(model: &NarxModel, u1: &[f64], u2: &[f64], y: &[f64]) -> Result<Vec<f64>> {
    if u1.len() != y.len() || u2.len() != y.len() {
        return Err(Error::Dimension { expected: y.len(), got: u1.len().min(u2.len()) });
    }
    let w = model.warmup();
    if y.len() <= w {
        return Err(Error::TooShort { needed: w + 1, got: y.len() });
    }
    let (u1, u2, y) = model.normalize(u1, u2, y);
    let mut reg = Vec::with_capacity(model.regressor_len());
    let mut out = Vec::with_capacity(y.len() - w);
    for n in w..y.len() {
        model.regressor_at(&u1, &u2, &y, n, &mut reg);
        out.push(model.normalization.y.invert(model.forward(&reg)?));
    }
    Ok(out)
}

/// Recursive multi-step prediction: each prediction is fed back into the
/// output delay line. `history` must hold at least `warmup` samples of every
/// signal; the result has one raw-unit entry per future input sample.
pub fn closed_loop_predict(model: &NarxModel, history: &History, u1_future: &[f64], u2_future: &[f64]) -> Result<Vec<f64>> {
    if u1_future.len() != u2_future.len() {
        return Err(Error::Dimension { expected: u1_future.len(), got: u2_future.len() });
    }
    let w = model.warmup();
    for len in [history.u1.len(), history.u2.len(), history.y.len()] {
        if len < w {
            return Err(Error::TooShort { needed: w, got: len });
        }
    }
    let norm = &model.normalization;
    let tail = |v: &[f64]| v[v.len() - w..].to_vec();
    let mut u1: Vec<f64> = tail(&history.u1).iter().map(|&v| norm.u1.apply(v)).collect();
    let mut u2: Vec<f64> = tail(&history.u2).iter().map(|&v| norm.u2.apply(v)).collect();
    let mut y: Vec<f64> = tail(&history.y).iter().map(|&v| norm.y.apply(v)).collect();
    let mut reg = Vec::with_capacity(model.regressor_len());
    let mut out = Vec::with_capacity(u1_future.len());
    for (&a, &b) in u1_future.iter().zip(u2_future) {
        u1.push(norm.u1.apply(a));
        u2.push(norm.u2.apply(b));
        let n = u1.len() - 1;
        model.regressor_at(&u1, &u2, &y, n, &mut reg);
        let z = model.forward(&reg)?;
        y.push(z);
        out.push(norm.y.invert(z));
    }
    Ok(out)
}
