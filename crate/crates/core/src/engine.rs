//! Per-SU cognitive engine: find the nearest primary link, probe it at
//! ascending powers, predict its throughput with the NARX model and pick a
//! transmit power under the configured policy.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::amc::{AmcTable, ModulationType};
use crate::math;
use crate::narx::NarxModel;
use crate::power_control::{primary_sinr_mw, SuDecision};
use crate::radio_env::ChannelGains;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "delta", rename_all = "snake_case")]
pub enum PolicyKind {
    NoModChange,
    MaxRelChange(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyConfig {
    pub kind: PolicyKind,
    /// Ascending probe schedule in dBm.
    pub probe_powers_dbm: Vec<f64>,
}

/// −30 dBm to 20 dBm in 5 dB steps.
pub fn default_probe_powers() -> Vec<f64> {
    (0..11).map(|i| -30.0 + 5.0 * i as f64).collect()
}

impl PolicyConfig {
    pub fn new(kind: PolicyKind) -> Self {
        Self { kind, probe_powers_dbm: default_probe_powers() }
    }

    pub fn validate(&self, sn_range_dbm: [f64; 2]) -> Result<()> {
        validate_schedule(&self.probe_powers_dbm, sn_range_dbm)?;
        if let PolicyKind::MaxRelChange(d) = self.kind {
            if !(d > 0.0 && d < 1.0) {
                return Err(Error::Config("relative change limit must lie in (0, 1)"));
            }
        }
        Ok(())
    }
}

pub fn validate_schedule(powers: &[f64], sn_range_dbm: [f64; 2]) -> Result<()> {
    if powers.is_empty() {
        return Err(Error::Config("probe schedule must not be empty"));
    }
    if powers.iter().any(|p| !(*p >= sn_range_dbm[0] && *p <= sn_range_dbm[1])) {
        return Err(Error::Config("probe powers must lie inside the SN power range"));
    }
    if powers.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Config("probe powers must be strictly ascending"));
    }
    Ok(())
}

/// What the simulator knows about a primary link at one instant. Only
/// `modulation` is visible to the SU; the rest is ground truth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub modulation: ModulationType,
    pub true_cqi: u8,
    pub true_kbps: f64,
}

pub fn observe(table: &AmcTable, sinr: f64) -> Result<Observation> {
    let mode = table.mode_for_sinr(sinr)?;
    Ok(Observation { modulation: mode.modulation, true_cqi: mode.cqi, true_kbps: table.effective_throughput(sinr)? })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeStep {
    pub power_dbm: f64,
    pub observation: Observation,
    pub predicted_kbps: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeEpochRecord {
    pub su_index: usize,
    pub nearest_link: Option<usize>,
    /// Nearest link with every SU silent; `None` when there is no link.
    pub baseline: Option<Observation>,
    pub baseline_throughput_pred: Option<f64>,
    /// One entry per schedule level; empty for SUs that did not probe.
    pub steps: Vec<ProbeStep>,
}

impl ProbeEpochRecord {
    /// NARX inputs for the epoch: the silent step at `silent_dbm`, then one
    /// entry per probe.
    pub fn inputs(&self, silent_dbm: f64) -> Option<(Vec<f64>, Vec<f64>)> {
        let base = self.baseline?;
        let mut u1 = vec![silent_dbm];
        let mut u2 = vec![f64::from(base.modulation.index())];
        for s in &self.steps {
            u1.push(s.power_dbm);
            u2.push(f64::from(s.observation.modulation.index()));
        }
        Some((u1, u2))
    }

    /// Ground-truth throughput aligned with [`Self::inputs`].
    pub fn targets(&self) -> Option<Vec<f64>> {
        let base = self.baseline?;
        Some(core::iter::once(base.true_kbps).chain(self.steps.iter().map(|s| s.observation.true_kbps)).collect())
    }
}

/// Primary link received strongest at SU `su`; ties go to the lower index.
pub fn nearest_primary_link(su: usize, gains: &ChannelGains, pn_powers_dbm: &[f64]) -> Option<usize> {
    let row = gains.gsp.get(su)?;
    let mut best: Option<(usize, f64)> = None;
    for (j, (&g, &p)) in row.iter().zip(pn_powers_dbm).enumerate() {
        let rx = g * math::db_to_lin(p);
        if best.map_or(true, |(_, b)| rx > b) {
            best = Some((j, rx));
        }
    }
    best.map(|(j, _)| j)
}

/// Error-free modulation classification of link `link`.
pub fn sense_modulation_oracle(table: &AmcTable, link: usize, link_sinr: &[f64]) -> Result<ModulationType> {
    let sinr = link_sinr.get(link).ok_or(Error::InactiveLink(link))?;
    Ok(table.mode_for_sinr(*sinr)?.modulation)
}

/// Nearest link and its silent-SN observation for every SU.
pub fn baseline_observations(
    gains: &ChannelGains,
    pn_powers_dbm: &[f64],
    sigma2: f64,
    table: &AmcTable,
) -> Result<Vec<(Option<usize>, Option<Observation>)>> {
    gains.validate()?;
    if pn_powers_dbm.len() != gains.n_p() {
        return Err(Error::Dimension { expected: gains.n_p(), got: pn_powers_dbm.len() });
    }
    let pn_mw: Vec<f64> = pn_powers_dbm.iter().map(|&p| math::db_to_lin(p)).collect();
    let sinr = primary_sinr_mw(&pn_mw, &vec![0.0; gains.n_s()], gains, sigma2);
    (0..gains.n_s())
        .map(|su| match nearest_primary_link(su, gains, pn_powers_dbm) {
            Some(link) => Ok((Some(link), Some(observe(table, sinr[link])?))),
            None => Ok((None, None)),
        })
        .collect()
}

/// Runs the shared probe schedule in lockstep. Step 0 is the silent
/// baseline; at every level each participating SU transmits that level at
/// the same time and records its nearest link's state.
pub fn execute_probe_epoch(
    gains: &ChannelGains,
    pn_powers_dbm: &[f64],
    sigma2: f64,
    table: &AmcTable,
    probe_powers_dbm: &[f64],
    participating: &[bool],
) -> Result<Vec<ProbeEpochRecord>> {
    let n_s = gains.n_s();
    if participating.len() != n_s {
        return Err(Error::Dimension { expected: n_s, got: participating.len() });
    }
    let base = baseline_observations(gains, pn_powers_dbm, sigma2, table)?;
    let mut records: Vec<ProbeEpochRecord> = base
        .iter()
        .enumerate()
        .map(|(su_index, &(nearest_link, baseline))| ProbeEpochRecord {
            su_index,
            nearest_link,
            baseline,
            baseline_throughput_pred: None,
            steps: Vec::new(),
        })
        .collect();
    let probing: Vec<bool> = (0..n_s).map(|j| participating[j] && base[j].0.is_some()).collect();
    if !probing.iter().any(|&b| b) {
        return Ok(records);
    }
    let pn_mw: Vec<f64> = pn_powers_dbm.iter().map(|&p| math::db_to_lin(p)).collect();
    for &p in probe_powers_dbm {
        let mw = math::db_to_lin(p);
        let sn_mw: Vec<f64> = probing.iter().map(|&on| if on { mw } else { 0.0 }).collect();
        let sinr = primary_sinr_mw(&pn_mw, &sn_mw, gains, sigma2);
        for (rec, _) in records.iter_mut().zip(&probing).filter(|(_, on)| **on) {
            let link = rec.nearest_link.ok_or(Error::InactiveLink(rec.su_index))?;
            rec.steps.push(ProbeStep { power_dbm: p, observation: observe(table, sinr[link])?, predicted_kbps: None });
        }
    }
    Ok(records)
}

/// Closed-loop throughput prediction for one epoch, `T̂₀` first, in kbps.
/// The silent step is fed to the network as the schedule's lowest power.
pub fn predict_throughput_vector(model: &NarxModel, record: &ProbeEpochRecord, probe_powers_dbm: &[f64]) -> Result<Vec<f64>> {
    if record.steps.len() != probe_powers_dbm.len() || record.steps.iter().zip(probe_powers_dbm).any(|(s, &p)| s.power_dbm != p) {
        return Err(Error::Dimension { expected: probe_powers_dbm.len(), got: record.steps.len() });
    }
    let silent = *probe_powers_dbm.first().ok_or(Error::Config("probe schedule must not be empty"))?;
    let (u1, u2) = record.inputs(silent).ok_or(Error::InactiveLink(record.su_index))?;
    model.predict_epoch(&u1, &u2)
}

/// `T̂₀` alone: the first closed-loop step depends on the silent step only.
pub fn predict_baseline(model: &NarxModel, baseline: &Observation, silent_dbm: f64) -> Result<f64> {
    let out = model.predict_epoch(&[silent_dbm], &[f64::from(baseline.modulation.index())])?;
    Ok(out[0])
}

/// Maps a throughput prediction to a mode; the nearest table throughput wins.
pub fn predicted_cqi(table: &AmcTable, kbps: f64) -> u8 {
    table.nearest_cqi_for_throughput(kbps)
}

/// Blocked when the predicted baseline sits at the bottom of the ladder.
pub fn blocked_by_prediction(table: &AmcTable, t0: f64) -> bool {
    !(t0 > 0.0) || predicted_cqi(table, t0) == 1
}

/// Picks the largest probe power that satisfies the policy. `t_hat` holds
/// `T̂₀` followed by one prediction per probe level.
pub fn select_power(table: &AmcTable, t_hat: &[f64], policy: &PolicyConfig) -> Result<SuDecision> {
    let levels = &policy.probe_powers_dbm;
    if t_hat.len() != levels.len() + 1 {
        return Err(Error::Dimension { expected: levels.len() + 1, got: t_hat.len() });
    }
    let t0 = t_hat[0];
    if blocked_by_prediction(table, t0) {
        return Ok(SuDecision::Blocked);
    }
    let base_type = table.mode(predicted_cqi(table, t0)).modulation;
    let ok = |t: f64| match policy.kind {
        PolicyKind::NoModChange => table.mode(predicted_cqi(table, t)).modulation == base_type,
        PolicyKind::MaxRelChange(delta) => (t0 - t) / t0 <= delta,
    };
    Ok(levels
        .iter()
        .zip(&t_hat[1..])
        .rev()
        .find(|(_, &t)| ok(t))
        .map_or(SuDecision::Off, |(&p, _)| SuDecision::Transmit(p)))
}

/// Probe epoch plus predictions, shared by every NN policy.
#[derive(Debug, Clone, PartialEq)]
pub struct EngineEpoch {
    pub records: Vec<ProbeEpochRecord>,
    /// Full prediction vector per SU; empty for SUs that did not probe.
    pub predictions: Vec<Vec<f64>>,
    pub blocked: Vec<bool>,
}

/// Senses baselines, blocks SUs whose predicted baseline is CQI 1, runs the
/// lockstep probe epoch for the rest and predicts every throughput vector.
pub fn run_engine_epoch(
    gains: &ChannelGains,
    pn_powers_dbm: &[f64],
    sigma2: f64,
    table: &AmcTable,
    model: &NarxModel,
    probe_powers_dbm: &[f64],
) -> Result<EngineEpoch> {
    let silent = *probe_powers_dbm.first().ok_or(Error::Config("probe schedule must not be empty"))?;
    let base = baseline_observations(gains, pn_powers_dbm, sigma2, table)?;
    let mut blocked = vec![false; base.len()];
    let mut t0 = vec![None; base.len()];
    for (j, (_, obs)) in base.iter().enumerate() {
        if let Some(obs) = obs {
            let t = predict_baseline(model, obs, silent)?;
            blocked[j] = blocked_by_prediction(table, t);
            t0[j] = Some(t);
        }
    }
    let participating: Vec<bool> = blocked.iter().map(|b| !b).collect();
    let mut records = execute_probe_epoch(gains, pn_powers_dbm, sigma2, table, probe_powers_dbm, &participating)?;
    let mut predictions = vec![Vec::new(); records.len()];
    for (j, rec) in records.iter_mut().enumerate() {
        rec.baseline_throughput_pred = t0[j];
        if rec.steps.is_empty() {
            continue;
        }
        let t_hat = predict_throughput_vector(model, rec, probe_powers_dbm)?;
        for (s, &t) in rec.steps.iter_mut().zip(&t_hat[1..]) {
            s.predicted_kbps = Some(t);
        }
        predictions[j] = t_hat;
    }
    Ok(EngineEpoch { records, predictions, blocked })
}

/// Per-SU decisions for one policy. SUs without a primary link in range
/// transmit at `sn_max_dbm`.
pub fn decide(epoch: &EngineEpoch, table: &AmcTable, policy: &PolicyConfig, sn_max_dbm: f64) -> Result<Vec<SuDecision>> {
    epoch
        .records
        .iter()
        .zip(&epoch.predictions)
        .zip(&epoch.blocked)
        .map(|((rec, t_hat), &blocked)| {
            if rec.nearest_link.is_none() {
                Ok(SuDecision::Transmit(sn_max_dbm))
            } else if blocked {
                Ok(SuDecision::Blocked)
            } else {
                select_power(table, t_hat, policy)
            }
        })
        .collect()
}
