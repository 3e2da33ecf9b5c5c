//! Monte Carlo harness: noise sweep, training-data collection, exhaustive
//! baselines, per-cell policy evaluation and deterministic aggregation.
//!
//! Every cell is a pure function of `(config, load index, run)` so callers
//! may evaluate cells in any order or in parallel.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::amc::{AmcTable, DEFAULT_SHANNON_K, DEFAULT_SYMBOL_BUDGET};
use crate::engine::{self, decide, default_probe_powers, run_engine_epoch, validate_schedule, PolicyConfig, PolicyKind};
use crate::math;
use crate::narx::{init_model, train_lm, NarxConfig, NarxModel, Sequence, TrainOutcome, TrainingSet};
use crate::power_control::{
    fm_with_modulation_constraint, primary_sinr_mw, run_primary_power_control, secondary_sinr, BaselineObservation,
    PowerState, SuDecision, TargetLadder,
};
use crate::radio_env::{gain_matrices, generate_scenario, ChannelGains, PlaygroundConfig, Scenario};
use crate::rng::derive_seed;
use crate::{Error, Result};

const TAG_NOISE: u64 = 0x4e4f_4953;
const TAG_MONTE_CARLO: u64 = 0x4d43_4152;
const TAG_TRAIN: u64 = 0x5452_4e44;
const TAG_HELD_OUT: u64 = 0x484f_4c44;
const TAG_SPLIT: u64 = 0x5350_4c49;
const TAG_INIT: u64 = 0x494e_4954;

/// Secondary-network control scheme under evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Policy {
    PnOnly,
    FmBaseline,
    NnNoModChange,
    NnRelChange(f64),
    ExhaustiveMin,
    ExhaustiveMax,
}

impl Policy {
    pub fn needs_model(self) -> bool {
        matches!(self, Policy::NnNoModChange | Policy::NnRelChange(_))
    }

    pub fn is_exhaustive(self) -> bool {
        matches!(self, Policy::ExhaustiveMin | Policy::ExhaustiveMax)
    }

    pub fn all_default() -> Vec<Policy> {
        vec![
            Policy::PnOnly,
            Policy::FmBaseline,
            Policy::NnNoModChange,
            Policy::NnRelChange(0.02),
            Policy::NnRelChange(0.05),
            Policy::NnRelChange(0.10),
            Policy::ExhaustiveMin,
            Policy::ExhaustiveMax,
        ]
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Policy::PnOnly => f.write_str("pn_only"),
            Policy::FmBaseline => f.write_str("fm_baseline"),
            Policy::NnNoModChange => f.write_str("nn_no_mod_change"),
            Policy::NnRelChange(d) => write!(f, "nn_rel_change:{d}"),
            Policy::ExhaustiveMin => f.write_str("exhaustive_min"),
            Policy::ExhaustiveMax => f.write_str("exhaustive_max"),
        }
    }
}

impl FromStr for Policy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "pn_only" => Policy::PnOnly,
            "fm_baseline" => Policy::FmBaseline,
            "nn_no_mod_change" => Policy::NnNoModChange,
            "exhaustive_min" => Policy::ExhaustiveMin,
            "exhaustive_max" => Policy::ExhaustiveMax,
            other => {
                let d = other
                    .strip_prefix("nn_rel_change:")
                    .and_then(|d| d.parse::<f64>().ok())
                    .ok_or(Error::Config("unknown policy"))?;
                if !(d > 0.0 && d < 1.0) {
                    return Err(Error::Config("relative change limit must lie in (0, 1)"));
                }
                Policy::NnRelChange(d)
            }
        })
    }
}

impl TryFrom<String> for Policy {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Policy> for String {
    fn from(p: Policy) -> String {
        p.to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AmcConfig {
    pub shannon_k: f64,
    pub symbol_budget: f64,
}

impl Default for AmcConfig {
    fn default() -> Self {
        Self { shannon_k: DEFAULT_SHANNON_K, symbol_budget: DEFAULT_SYMBOL_BUDGET }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingConfig {
    pub min_samples: usize,
    pub train_fraction: f64,
    pub validation_fraction: f64,
    /// Size of the independent held-out set used for the CQI histogram.
    pub held_out_min_samples: usize,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self { min_samples: 4000, train_fraction: 0.7, validation_fraction: 0.15, held_out_min_samples: 4000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub master_seed: u64,
    pub loads: Vec<f64>,
    pub runs: usize,
    pub policies: Vec<Policy>,
    pub noise_grid_dbm: Vec<f64>,
    pub probe_powers_dbm: Vec<f64>,
    /// Exhaustive policies are skipped when `(levels + 1)^N_S` exceeds this.
    pub exhaustive_cap: usize,
    pub playground: PlaygroundConfig,
    pub amc: AmcConfig,
    pub training: TrainingConfig,
    pub narx: NarxConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            master_seed: 1,
            loads: vec![0.16, 0.32, 0.48, 0.64],
            runs: 30,
            policies: Policy::all_default(),
            noise_grid_dbm: (0..=14).map(|i| -130.0 + 5.0 * i as f64).collect(),
            probe_powers_dbm: default_probe_powers(),
            exhaustive_cap: 100_000,
            playground: PlaygroundConfig::default(),
            amc: AmcConfig::default(),
            training: TrainingConfig::default(),
            narx: NarxConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.playground.validate()?;
        self.narx.validate()?;
        self.table()?;
        if self.runs == 0 {
            return Err(Error::Config("runs must be at least 1"));
        }
        if self.loads.is_empty() {
            return Err(Error::Config("loads must not be empty"));
        }
        for &l in &self.loads {
            self.n_p_for_load(l)?;
        }
        validate_schedule(&self.probe_powers_dbm, self.playground.sn_power_range_dbm)?;
        for p in &self.policies {
            if let Policy::NnRelChange(d) = p {
                if !(*d > 0.0 && *d < 1.0) {
                    return Err(Error::Config("relative change limit must lie in (0, 1)"));
                }
            }
        }
        let t = &self.training;
        if !(t.train_fraction > 0.0) || !(t.validation_fraction >= 0.0) || t.train_fraction + t.validation_fraction > 1.0 {
            return Err(Error::Config("training fractions must satisfy train > 0, train + validation ≤ 1"));
        }
        Ok(())
    }

    pub fn table(&self) -> Result<AmcTable> {
        AmcTable::standard(self.amc.shannon_k, self.amc.symbol_budget)
    }

    /// Active primary links for a load; the product with `N_PBS` must be integral.
    pub fn n_p_for_load(&self, load: f64) -> Result<usize> {
        let exact = load * self.playground.bs_count() as f64;
        let n = math::round(exact);
        if libm::fabs(exact - n) > 1e-9 || n < 1.0 || n > self.playground.bs_count() as f64 {
            return Err(Error::Config("every load times N_PBS must be an integer in 1..=N_PBS"));
        }
        Ok(n as usize)
    }

    pub fn policy_config(&self, kind: PolicyKind) -> PolicyConfig {
        PolicyConfig { kind, probe_powers_dbm: self.probe_powers_dbm.clone() }
    }

    pub fn needs_model(&self) -> bool {
        self.policies.iter().any(|p| p.needs_model())
    }

    fn scenario(&self, tag: u64, load_index: usize, run: usize) -> Result<Scenario> {
        let n_p = self.n_p_for_load(self.loads[load_index])?;
        let seed = derive_seed(self.master_seed, &[tag, load_index as u64, run as u64]);
        generate_scenario(&self.playground, n_p, seed)
    }

    /// The scenario [`monte_carlo_cell`] evaluates for `(load_index, run)`.
    pub fn monte_carlo_scenario(&self, load_index: usize, run: usize) -> Result<Scenario> {
        if load_index >= self.loads.len() {
            return Err(Error::Config("load index out of range"));
        }
        self.scenario(TAG_MONTE_CARLO, load_index, run)
    }
}

/// Mean effective throughput over primary links, kbps.
pub fn pn_avg_throughput(table: &AmcTable, sinr: &[f64]) -> Result<f64> {
    if sinr.is_empty() {
        return Ok(0.0);
    }
    let mut acc = 0.0;
    for &g in sinr {
        acc += table.effective_throughput(g)?;
    }
    Ok(acc / sinr.len() as f64)
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}

// ---------------------------------------------------------------- noise sweep

/// Average PN throughput of one `(load, run)` scenario at every noise level.
/// The placement is shared across noise levels.
pub fn noise_sweep_run(cfg: &ExperimentConfig, table: &AmcTable, load_index: usize, run: usize) -> Result<Vec<f64>> {
    let scenario = cfg.scenario(TAG_NOISE, load_index, run)?;
    let gains = gain_matrices(&scenario)?;
    cfg.noise_grid_dbm
        .iter()
        .map(|&noise| {
            let sigma2 = math::db_to_lin(noise);
            let pc = run_primary_power_control(&scenario, &gains, sigma2)?;
            let sinr = primary_sinr_mw(
                &pc.state.pn_powers_dbm.iter().map(|&p| math::db_to_lin(p)).collect::<Vec<_>>(),
                &vec![0.0; gains.n_s()],
                &gains,
                sigma2,
            );
            pn_avg_throughput(table, &sinr)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseCell {
    pub load_index: usize,
    pub run: usize,
    pub pn_kbps: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSweepRow {
    pub load: f64,
    pub noise_dbm: f64,
    pub pn_kbps: f64,
    /// Drop relative to the lowest noise level of the same load.
    pub rel_change: f64,
}

/// Averages cells over runs. Rows come out load-major, noise ascending
/// in grid order.
pub fn aggregate_noise_sweep(cfg: &ExperimentConfig, cells: &[NoiseCell]) -> Result<Vec<NoiseSweepRow>> {
    let mut cells: Vec<&NoiseCell> = cells.iter().collect();
    cells.sort_by_key(|c| (c.load_index, c.run));
    let mut rows = Vec::new();
    for (li, &load) in cfg.loads.iter().enumerate() {
        let mine: Vec<&&NoiseCell> = cells.iter().filter(|c| c.load_index == li).collect();
        if mine.is_empty() {
            continue;
        }
        let avg: Vec<f64> = (0..cfg.noise_grid_dbm.len())
            .map(|k| mean(mine.iter().map(|c| c.pn_kbps[k])))
            .collect();
        let reference = cfg
            .noise_grid_dbm
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .map(|(k, _)| avg[k])
            .ok_or(Error::Config("noise grid must not be empty"))?;
        for (k, &noise) in cfg.noise_grid_dbm.iter().enumerate() {
            let rel_change = if reference > 0.0 { (reference - avg[k]) / reference } else { 0.0 };
            rows.push(NoiseSweepRow { load, noise_dbm: noise, pn_kbps: avg[k], rel_change });
        }
    }
    Ok(rows)
}

/// Sequential sweep over every load and run.
pub fn run_noise_sweep(cfg: &ExperimentConfig) -> Result<Vec<NoiseSweepRow>> {
    cfg.validate()?;
    let table = cfg.table()?;
    let mut cells = Vec::new();
    for li in 0..cfg.loads.len() {
        for run in 0..cfg.runs {
            cells.push(NoiseCell { load_index: li, run, pn_kbps: noise_sweep_run(cfg, &table, li, run)? });
        }
    }
    aggregate_noise_sweep(cfg, &cells)
}

/// First noise level (ascending) whose relative drop exceeds `threshold`.
pub fn noise_elbow(rows: &[NoiseSweepRow], load: f64, threshold: f64) -> Option<f64> {
    let mut mine: Vec<&NoiseSweepRow> = rows.iter().filter(|r| r.load == load).collect();
    mine.sort_by(|a, b| a.noise_dbm.total_cmp(&b.noise_dbm));
    mine.iter().find(|r| r.rel_change > threshold).map(|r| r.noise_dbm)
}

// ----------------------------------------------------------- training data

fn baseline_pn(scenario: &Scenario, gains: &ChannelGains) -> Result<Vec<f64>> {
    Ok(run_primary_power_control(scenario, gains, scenario.config.noise_mw())?.state.pn_powers_dbm)
}

/// Probe-epoch sequences from fresh scenarios, cycling through the loads
/// in equal proportion until at least `min_samples` samples exist. Every
/// SU with a nearest link above CQI 1 probes; the target is the true
/// effective throughput of that link.
pub fn collect_sequences(cfg: &ExperimentConfig, table: &AmcTable, seed: u64, min_samples: usize) -> Result<Vec<Sequence>> {
    let n_loads = cfg.loads.len();
    let limit = 1000 + 100 * min_samples;
    let silent = cfg.probe_powers_dbm[0];
    let mut out = Vec::new();
    let mut samples = 0;
    let mut i = 0usize;
    while samples < min_samples || i % n_loads != 0 {
        if i >= limit {
            return Err(Error::TooShort { needed: min_samples, got: samples });
        }
        let li = i % n_loads;
        let n_p = cfg.n_p_for_load(cfg.loads[li])?;
        let scenario = generate_scenario(&cfg.playground, n_p, derive_seed(seed, &[i as u64]))?;
        let gains = gain_matrices(&scenario)?;
        let pn = baseline_pn(&scenario, &gains)?;
        let sigma2 = scenario.config.noise_mw();
        let base = engine::baseline_observations(&gains, &pn, sigma2, table)?;
        let participating: Vec<bool> = base.iter().map(|(_, o)| o.is_some_and(|o| o.true_cqi > 1)).collect();
        let records = engine::execute_probe_epoch(&gains, &pn, sigma2, table, &cfg.probe_powers_dbm, &participating)?;
        for rec in records.iter().filter(|r| !r.steps.is_empty()) {
            let (u1, u2) = rec.inputs(silent).ok_or(Error::InactiveLink(rec.su_index))?;
            let y = rec.targets().ok_or(Error::InactiveLink(rec.su_index))?;
            samples += y.len();
            out.push(Sequence { u1, u2, y, load: cfg.loads[li] });
        }
        i += 1;
    }
    Ok(out)
}

/// Training data with its seeded 70/15/15 split by whole sequence.
pub fn generate_training_data(cfg: &ExperimentConfig, seed: u64) -> Result<TrainingSet> {
    let table = cfg.table()?;
    let seqs = collect_sequences(cfg, &table, derive_seed(seed, &[TAG_TRAIN]), cfg.training.min_samples)?;
    TrainingSet::split(
        seqs,
        cfg.training.train_fraction,
        cfg.training.validation_fraction,
        derive_seed(seed, &[TAG_SPLIT]),
    )
}

/// Independent sequences from a seed stream disjoint from training.
pub fn generate_held_out(cfg: &ExperimentConfig, seed: u64) -> Result<Vec<Sequence>> {
    let table = cfg.table()?;
    collect_sequences(cfg, &table, derive_seed(seed, &[TAG_HELD_OUT]), cfg.training.held_out_min_samples)
}

pub fn train_model(cfg: &ExperimentConfig, data: &TrainingSet, seed: u64) -> Result<TrainOutcome> {
    let model = init_model(&cfg.narx, derive_seed(seed, &[TAG_INIT]))?;
    train_lm(&model, data, &cfg.narx)
}

// ------------------------------------------------------------- exhaustive

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExhaustiveResult {
    pub min_setting: Vec<Option<f64>>,
    pub max_setting: Vec<Option<f64>>,
    pub feasible_count: usize,
}

/// Enumerates every SU power permutation over `grid ∪ {off}` and keeps
/// those that leave every primary link on its silent-SN modulation.
/// The max setting maximizes PN throughput, then SN throughput, then
/// minimizes total SN power; the min setting minimizes PN throughput, then
/// total SN power. Returns `None` when the permutation count exceeds `cap`.
pub fn exhaustive_baselines(
    gains: &ChannelGains,
    pn_powers_dbm: &[f64],
    sigma2: f64,
    table: &AmcTable,
    grid_dbm: &[f64],
    cap: usize,
) -> Result<Option<ExhaustiveResult>> {
    gains.validate()?;
    let n_s = gains.n_s();
    let levels = grid_dbm.len() + 1;
    let mut total: usize = 1;
    for _ in 0..n_s {
        total = match total.checked_mul(levels) {
            Some(t) if t <= cap => t,
            _ => return Ok(None),
        };
    }
    let pn_mw: Vec<f64> = pn_powers_dbm.iter().map(|&p| math::db_to_lin(p)).collect();
    let base_sinr = primary_sinr_mw(&pn_mw, &vec![0.0; n_s], gains, sigma2);
    let mut base_mod = Vec::with_capacity(base_sinr.len());
    for &g in &base_sinr {
        base_mod.push(table.mode_for_sinr(g)?.modulation);
    }
    let level_mw: Vec<f64> = core::iter::once(0.0).chain(grid_dbm.iter().map(|&p| math::db_to_lin(p))).collect();
    let setting = |digits: &[usize]| -> Vec<Option<f64>> {
        digits.iter().map(|&d| if d == 0 { None } else { Some(grid_dbm[d - 1]) }).collect()
    };

    let mut digits = vec![0usize; n_s];
    let mut sn_mw = vec![0.0; n_s];
    // (pn, sn, power, digits)
    let mut best_max: Option<(f64, f64, f64, Vec<usize>)> = None;
    let mut best_min: Option<(f64, f64, Vec<usize>)> = None;
    let mut feasible_count = 0;
    for _ in 0..total {
        for (m, &d) in sn_mw.iter_mut().zip(&digits) {
            *m = level_mw[d];
        }
        let sinr = primary_sinr_mw(&pn_mw, &sn_mw, gains, sigma2);
        let mut feasible = true;
        for (g, &b) in sinr.iter().zip(&base_mod) {
            if table.mode_for_sinr(*g)?.modulation != b {
                feasible = false;
                break;
            }
        }
        if feasible {
            feasible_count += 1;
            let pn = pn_avg_throughput(table, &sinr)?;
            let power: f64 = sn_mw.iter().sum();
            let better_max = match &best_max {
                None => true,
                Some((bp, _, _, _)) if pn > *bp => true,
                Some((bp, _, _, _)) if pn < *bp => false,
                Some((_, bs, bw, _)) => {
                    let sn = sn_avg_throughput(gains, &pn_mw, &setting(&digits), sigma2, table)?;
                    sn > *bs || (sn == *bs && power < *bw)
                }
            };
            if better_max {
                let sn = sn_avg_throughput(gains, &pn_mw, &setting(&digits), sigma2, table)?;
                best_max = Some((pn, sn, power, digits.clone()));
            }
            let better_min = match &best_min {
                None => true,
                Some((bp, bw, _)) => pn < *bp || (pn == *bp && power < *bw),
            };
            if better_min {
                best_min = Some((pn, power, digits.clone()));
            }
        }
        for d in digits.iter_mut() {
            *d += 1;
            if *d < levels {
                break;
            }
            *d = 0;
        }
    }
    let off = vec![None; n_s];
    Ok(Some(ExhaustiveResult {
        max_setting: best_max.map_or(off.clone(), |b| setting(&b.3)),
        min_setting: best_min.map_or(off, |b| setting(&b.2)),
        feasible_count,
    }))
}

fn sn_avg_throughput(gains: &ChannelGains, pn_mw: &[f64], setting: &[Option<f64>], sigma2: f64, table: &AmcTable) -> Result<f64> {
    let pn_dbm: Vec<f64> = pn_mw.iter().map(|&p| math::lin_to_db(p)).collect();
    let state = PowerState::new(pn_dbm, setting.to_vec());
    let sinr = secondary_sinr(&state, gains, sigma2)?;
    let mut acc = 0.0;
    for g in sinr.iter().flatten() {
        acc += table.effective_throughput(*g)?;
    }
    Ok(acc / setting.len().max(1) as f64)
}

// ------------------------------------------------------------ Monte Carlo

/// True PN average throughput and per-SU throughput for a set of decisions.
pub fn evaluate_decisions(
    gains: &ChannelGains,
    pn_powers_dbm: &[f64],
    sigma2: f64,
    table: &AmcTable,
    decisions: &[SuDecision],
) -> Result<(f64, Vec<f64>)> {
    let state = PowerState::new(pn_powers_dbm.to_vec(), decisions.iter().map(SuDecision::power_dbm).collect());
    let pn = pn_avg_throughput(table, &crate::power_control::primary_sinr(&state, gains, sigma2)?)?;
    let sn = secondary_sinr(&state, gains, sigma2)?
        .into_iter()
        .map(|g| g.map_or(Ok(0.0), |g| table.effective_throughput(g)))
        .collect::<Result<Vec<f64>>>()?;
    Ok((pn, sn))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyOutcome {
    pub policy: Policy,
    pub load_index: usize,
    pub load: f64,
    pub run: usize,
    pub pn_kbps: f64,
    pub pn_only_kbps: f64,
    pub sn_kbps: Vec<f64>,
    pub blocked: usize,
}

impl PolicyOutcome {
    pub fn rel_change(&self) -> f64 {
        if self.pn_only_kbps > 0.0 {
            (self.pn_only_kbps - self.pn_kbps) / self.pn_only_kbps
        } else {
            0.0
        }
    }

    pub fn sn_avg(&self) -> f64 {
        mean(self.sn_kbps.iter().copied())
    }

    pub fn blocked_fraction(&self) -> f64 {
        if self.sn_kbps.is_empty() {
            0.0
        } else {
            self.blocked as f64 / self.sn_kbps.len() as f64
        }
    }
}

/// Evaluates every configured policy on one `(load, run)` scenario with PN
/// powers frozen at their silent-SN fixed point. Exhaustive policies are
/// omitted when the permutation count exceeds the cap.
pub fn monte_carlo_cell(
    cfg: &ExperimentConfig,
    table: &AmcTable,
    model: Option<&NarxModel>,
    load_index: usize,
    run: usize,
) -> Result<Vec<PolicyOutcome>> {
    if cfg.needs_model() && model.is_none() {
        return Err(Error::MissingModel("NN policies need a trained model"));
    }
    let scenario = cfg.scenario(TAG_MONTE_CARLO, load_index, run)?;
    let gains = gain_matrices(&scenario)?;
    let sigma2 = scenario.config.noise_mw();
    let pn = baseline_pn(&scenario, &gains)?;
    let n_s = gains.n_s();
    let sn_max = cfg.playground.sn_power_range_dbm[1];
    let (pn_only_kbps, _) = evaluate_decisions(&gains, &pn, sigma2, table, &vec![SuDecision::Off; n_s])?;

    let mut nn_epoch = None;
    let mut exhaustive = None;
    let mut out = Vec::with_capacity(cfg.policies.len());
    for &policy in &cfg.policies {
        let decisions: Vec<SuDecision> = match policy {
            Policy::PnOnly => vec![SuDecision::Off; n_s],
            Policy::FmBaseline => {
                let base: Vec<BaselineObservation> = engine::baseline_observations(&gains, &pn, sigma2, table)?
                    .into_iter()
                    .map(|(link, obs)| BaselineObservation { nearest_link: link, modulation: obs.map(|o| o.modulation) })
                    .collect();
                let ladder = TargetLadder::from_table(table);
                fm_with_modulation_constraint(&scenario, &gains, &pn, sigma2, &ladder, &base, table)?.decisions
            }
            Policy::NnNoModChange | Policy::NnRelChange(_) => {
                let model = model.ok_or(Error::MissingModel("NN policies need a trained model"))?;
                if nn_epoch.is_none() {
                    nn_epoch = Some(run_engine_epoch(&gains, &pn, sigma2, table, model, &cfg.probe_powers_dbm)?);
                }
                let kind = match policy {
                    Policy::NnRelChange(d) => PolicyKind::MaxRelChange(d),
                    _ => PolicyKind::NoModChange,
                };
                decide(nn_epoch.as_ref().expect("set above"), table, &cfg.policy_config(kind), sn_max)?
            }
            Policy::ExhaustiveMin | Policy::ExhaustiveMax => {
                if exhaustive.is_none() {
                    exhaustive =
                        Some(exhaustive_baselines(&gains, &pn, sigma2, table, &cfg.probe_powers_dbm, cfg.exhaustive_cap)?);
                }
                let Some(Some(ex)) = &exhaustive else { continue };
                let setting = if policy == Policy::ExhaustiveMax { &ex.max_setting } else { &ex.min_setting };
                setting.iter().map(|p| p.map_or(SuDecision::Off, SuDecision::Transmit)).collect()
            }
        };
        let (pn_kbps, sn_kbps) = evaluate_decisions(&gains, &pn, sigma2, table, &decisions)?;
        let blocked = decisions.iter().filter(|d| **d == SuDecision::Blocked).count();
        out.push(PolicyOutcome {
            policy,
            load_index,
            load: cfg.loads[load_index],
            run,
            pn_kbps,
            pn_only_kbps,
            sn_kbps,
            blocked,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub policy: Policy,
    pub load: f64,
    pub runs: usize,
    pub pn_avg_throughput: f64,
    /// `(T_pn_only − T_policy) / T_pn_only` over run-averaged throughputs.
    pub pn_rel_change: f64,
    pub sn_avg_throughput: f64,
    pub sn_throughput_samples: Vec<f64>,
    pub blocked_fraction: f64,
}

impl MetricsRecord {
    /// Fraction of SU samples with zero throughput.
    pub fn zero_mass(&self) -> f64 {
        if self.sn_throughput_samples.is_empty() {
            return 0.0;
        }
        self.sn_throughput_samples.iter().filter(|&&t| t == 0.0).count() as f64 / self.sn_throughput_samples.len() as f64
    }
}

/// Sorts outcomes by (policy, load, run) in configuration order.
pub fn sort_outcomes(cfg: &ExperimentConfig, outcomes: &mut [PolicyOutcome]) {
    let rank = |p: &Policy| cfg.policies.iter().position(|q| q == p).unwrap_or(usize::MAX);
    outcomes.sort_by_key(|o| (rank(&o.policy), o.load_index, o.run));
}

/// One record per (policy, load) present in `outcomes`.
pub fn aggregate_monte_carlo(cfg: &ExperimentConfig, outcomes: &[PolicyOutcome]) -> Vec<MetricsRecord> {
    let mut sorted = outcomes.to_vec();
    sort_outcomes(cfg, &mut sorted);
    let mut out = Vec::new();
    for &policy in &cfg.policies {
        for (li, &load) in cfg.loads.iter().enumerate() {
            let mine: Vec<&PolicyOutcome> = sorted.iter().filter(|o| o.policy == policy && o.load_index == li).collect();
            if mine.is_empty() {
                continue;
            }
            let pn = mean(mine.iter().map(|o| o.pn_kbps));
            let reference = mean(mine.iter().map(|o| o.pn_only_kbps));
            let samples: Vec<f64> = mine.iter().flat_map(|o| o.sn_kbps.iter().copied()).collect();
            let blocked: usize = mine.iter().map(|o| o.blocked).sum();
            out.push(MetricsRecord {
                policy,
                load,
                runs: mine.len(),
                pn_avg_throughput: pn,
                pn_rel_change: if reference > 0.0 { (reference - pn) / reference } else { 0.0 },
                sn_avg_throughput: mean(samples.iter().copied()),
                blocked_fraction: if samples.is_empty() { 0.0 } else { blocked as f64 / samples.len() as f64 },
                sn_throughput_samples: samples,
            });
        }
    }
    out
}

/// Sequential Monte Carlo over every load and run.
pub fn run_monte_carlo(cfg: &ExperimentConfig, model: Option<&NarxModel>) -> Result<(Vec<PolicyOutcome>, Vec<MetricsRecord>)> {
    cfg.validate()?;
    let table = cfg.table()?;
    let mut outcomes = Vec::new();
    for li in 0..cfg.loads.len() {
        for run in 0..cfg.runs {
            outcomes.extend(monte_carlo_cell(cfg, &table, model, li, run)?);
        }
    }
    sort_outcomes(cfg, &mut outcomes);
    let metrics = aggregate_monte_carlo(cfg, &outcomes);
    Ok((outcomes, metrics))
}

/// Empirical CDF at each distinct sample value, ascending.
pub fn sn_throughput_cdf(samples: &[f64]) -> Vec<(f64, f64)> {
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    let mut out: Vec<(f64, f64)> = Vec::new();
    for (i, &v) in s.iter().enumerate() {
        let c = (i + 1) as f64 / n;
        match out.last_mut() {
            Some(last) if last.0 == v => last.1 = c,
            _ => out.push((v, c)),
        }
    }
    out
}

// ----------------------------------------------------------- CQI accuracy

/// Relative frequency of `|predicted CQI − true CQI|` in bins 0, 1, 2, 3+.
pub fn cqi_error_bins(table: &AmcTable, pairs: impl IntoIterator<Item = (f64, f64)>) -> ([f64; 4], usize) {
    let mut counts = [0usize; 4];
    let mut n = 0;
    for (pred, truth) in pairs {
        let e = (i16::from(table.nearest_cqi_for_throughput(pred)) - i16::from(table.nearest_cqi_for_throughput(truth))).unsigned_abs();
        counts[usize::from(e.min(3))] += 1;
        n += 1;
    }
    let mut freq = [0.0; 4];
    if n > 0 {
        for (f, c) in freq.iter_mut().zip(counts) {
            *f = c as f64 / n as f64;
        }
    }
    (freq, n)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CqiHistogram {
    pub load: f64,
    pub samples: usize,
    pub freq: [f64; 4],
}

impl CqiHistogram {
    pub fn within_one(&self) -> f64 {
        self.freq[0] + self.freq[1]
    }
}

/// Closed-loop predictions over each held-out epoch, compared with the
/// true CQI step by step, one histogram per load in `loads` order.
pub fn cqi_error_histogram(model: &NarxModel, table: &AmcTable, held_out: &[Sequence], loads: &[f64]) -> Result<Vec<CqiHistogram>> {
    let mut out = Vec::new();
    for &load in loads {
        let mut pairs = Vec::new();
        for s in held_out.iter().filter(|s| s.load == load) {
            s.check()?;
            let pred = model.predict_epoch(&s.u1, &s.u2)?;
            pairs.extend(pred.into_iter().zip(s.y.iter().copied()));
        }
        let (freq, samples) = cqi_error_bins(table, pairs);
        out.push(CqiHistogram { load, samples, freq });
    }
    Ok(out)
}
