//! Levenberg–Marquardt training in series-parallel mode.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{dot, fit_normalization, NarxConfig, NarxModel, Sequence};
use crate::linalg::{Cholesky, SquareMatrix};
use crate::math;
use crate::rng::stream_rng;
use crate::{Error, Result};

const LAMBDA_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SplitPart {
    Train,
    Validation,
    Test,
}

/// Sequences plus their train/validation/test assignment. Whole sequences
/// are assigned to one part so that no delay line straddles two parts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSet {
    pub sequences: Vec<Sequence>,
    pub parts: Vec<SplitPart>,
}

impl TrainingSet {
    /// Seeded shuffle of sequence indices, then contiguous blocks of
    /// `train` and `validation` fractions; the remainder is the test part.
    pub fn split(sequences: Vec<Sequence>, train: f64, validation: f64, seed: u64) -> Result<Self> {
        if !(train > 0.0) || !(validation >= 0.0) || train + validation > 1.0 + 1e-12 {
            return Err(Error::Config("split fractions must satisfy train > 0, train + validation ≤ 1"));
        }
        for s in &sequences {
            s.check()?;
        }
        let n = sequences.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut stream_rng(seed, 0x5350_4c54));
        let n_train = math::round(train * n as f64) as usize;
        let n_val = math::round(validation * n as f64) as usize;
        let mut parts = vec![SplitPart::Test; n];
        for (rank, &idx) in order.iter().enumerate() {
            parts[idx] = if rank < n_train {
                SplitPart::Train
            } else if rank < n_train + n_val {
                SplitPart::Validation
            } else {
                SplitPart::Test
            };
        }
        Ok(Self { sequences, parts })
    }

    pub fn sample_count(&self) -> usize {
        self.sequences.iter().map(Sequence::len).sum()
    }

    pub fn part(&self, part: SplitPart) -> impl Iterator<Item = &Sequence> + Clone {
        self.sequences.iter().zip(&self.parts).filter(move |(_, p)| **p == part).map(|(s, _)| s)
    }
}

/// Mean squared error over samples, in normalized units.
pub fn mse(model: &NarxModel, samples: &[(Vec<f64>, f64)]) -> Result<f64> {
    if samples.is_empty() {
        return Ok(0.0);
    }
    let mut acc = 0.0;
    for (x, t) in samples {
        let e = model.forward(x)? - t;
        acc += e * e;
    }
    Ok(acc / samples.len() as f64)
}

/// Writes `∂ŷ/∂θ` for one regressor into `out` and returns `ŷ`.
/// The derivative of the residual `ŷ − t` is the same row.
pub fn jacobian_row(model: &NarxModel, regressor: &[f64], out: &mut [f64]) -> Result<f64> {
    let (h, r) = (model.hidden_nodes, model.regressor_len());
    if regressor.len() != r {
        return Err(Error::Dimension { expected: r, got: regressor.len() });
    }
    if out.len() != model.param_count() {
        return Err(Error::Dimension { expected: model.param_count(), got: out.len() });
    }
    let (dw, rest) = out.split_at_mut(h * r);
    let (db, rest) = rest.split_at_mut(h);
    let (dv, dc) = rest.split_at_mut(h);
    let mut y = model.output_bias;
    for (k, row) in model.input_weights.chunks_exact(r).enumerate() {
        let z = math::tanh(dot(row, regressor) + model.input_biases[k]);
        let v = model.output_weights[k];
        y += v * z;
        let g = v * (1.0 - z * z);
        for (d, &x) in dw[k * r..(k + 1) * r].iter_mut().zip(regressor) {
            *d = g * x;
        }
        db[k] = g;
        dv[k] = z;
    }
    dc[0] = 1.0;
    Ok(y)
}

/// Per-sample Jacobian rows of the prediction error with respect to every
/// parameter, in [`NarxModel::params`] order.
pub fn jacobian(model: &NarxModel, batch: &[(Vec<f64>, f64)]) -> Result<Vec<Vec<f64>>> {
    batch
        .iter()
        .map(|(x, _)| {
            let mut row = vec![0.0; model.param_count()];
            jacobian_row(model, x, &mut row)?;
            Ok(row)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_mse: f64,
    pub val_mse: f64,
    pub lambda: f64,
    pub accepted: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StopReason {
    MaxEpochs,
    ValidationPatience,
    DampingSaturated,
    ZeroGradient,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    /// Parameters from the epoch with the lowest validation MSE.
    pub model: NarxModel,
    pub history: Vec<EpochLog>,
    pub initial_train_mse: f64,
    pub initial_val_mse: f64,
    /// Epoch of the returned parameters (0 = initial weights).
    pub best_epoch: usize,
    pub best_val_mse: f64,
    pub stop_reason: StopReason,
}

fn samples_of<'a>(model: &NarxModel, seqs: impl Iterator<Item = &'a Sequence>) -> Result<Vec<(Vec<f64>, f64)>> {
    let mut out = Vec::new();
    for s in seqs {
        out.extend(model.epoch_samples(s)?);
    }
    Ok(out)
}

/// Fits normalization on the training part, then runs Levenberg–Marquardt:
/// solve `(JᵀJ + λI) Δ = −Jᵀr`; accept when training MSE drops (λ ← λ·down),
/// otherwise reject and retry (λ ← λ·up). Early stopping on validation MSE.
pub fn train_lm(model: &NarxModel, data: &TrainingSet, cfg: &NarxConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    let mut model = model.clone();
    model.validate()?;
    if data.part(SplitPart::Train).next().is_none() {
        return Err(Error::Config("training part is empty"));
    }
    model.normalization = fit_normalization(data.part(SplitPart::Train));
    let train = samples_of(&model, data.part(SplitPart::Train))?;
    let val = samples_of(&model, data.part(SplitPart::Validation))?;
    if train.is_empty() {
        return Err(Error::TooShort { needed: 1, got: 0 });
    }
    let has_val = !val.is_empty();

    let p = model.param_count();
    let mut theta = model.params();
    let mut train_mse = mse(&model, &train)?;
    let initial_train_mse = train_mse;
    let initial_val = if has_val { mse(&model, &val)? } else { train_mse };
    let mut best = (theta.clone(), initial_val, 0usize);
    let mut lambda = cfg.lm_lambda0;
    let mut history = Vec::new();
    let mut fails = 0;
    let mut stop_reason = StopReason::MaxEpochs;
    let mut any_accepted = false;

    let mut row = vec![0.0; p];
    let mut grad = vec![0.0; p];

    for epoch in 1..=cfg.max_epochs {
        let mut jtj = SquareMatrix::zeros(p);
        grad.iter_mut().for_each(|g| *g = 0.0);
        for (x, t) in &train {
            let yhat = jacobian_row(&model, x, &mut row)?;
            let r = yhat - t;
            jtj.add_outer_upper(&row);
            for (g, &j) in grad.iter_mut().zip(&row) {
                *g += j * r;
            }
        }
        jtj.symmetrize_from_upper();
        if grad.iter().all(|g| *g == 0.0) {
            stop_reason = StopReason::ZeroGradient;
            break;
        }
        let neg_grad: Vec<f64> = grad.iter().map(|g| -g).collect();

        let mut rejections = 0;
        let mut accepted = false;
        while rejections < cfg.max_consecutive_rejections {
            if let Some(chol) = Cholesky::factor_shifted(&jtj, lambda) {
                let delta = chol.solve(&neg_grad);
                let trial: Vec<f64> = theta.iter().zip(&delta).map(|(a, d)| a + d).collect();
                model.set_params(&trial)?;
                let trial_mse = mse(&model, &train)?;
                if trial_mse < train_mse {
                    theta = trial;
                    train_mse = trial_mse;
                    lambda = (lambda * cfg.lambda_down).max(LAMBDA_FLOOR);
                    accepted = true;
                    break;
                }
                model.set_params(&theta)?;
            }
            lambda *= cfg.lambda_up;
            rejections += 1;
        }

        let val_mse = if has_val { mse(&model, &val)? } else { train_mse };
        history.push(EpochLog { epoch, train_mse, val_mse, lambda, accepted });
        if !accepted {
            stop_reason = StopReason::DampingSaturated;
            break;
        }
        any_accepted = true;
        if val_mse < best.1 {
            best = (theta.clone(), val_mse, epoch);
            fails = 0;
        } else {
            fails += 1;
            if has_val && fails >= cfg.early_stop_patience {
                stop_reason = StopReason::ValidationPatience;
                break;
            }
        }
    }

    if !any_accepted && stop_reason == StopReason::DampingSaturated {
        return Err(Error::TrainingAborted(cfg.max_consecutive_rejections));
    }
    model.set_params(&best.0)?;
    Ok(TrainOutcome {
        model,
        history,
        initial_train_mse,
        initial_val_mse: initial_val,
        best_epoch: best.2,
        best_val_mse: best.1,
        stop_reason,
    })
}
