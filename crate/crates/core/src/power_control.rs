//! SINR evaluation and the two iterative power controllers.
//!
//! The primary network runs the product-of-SINR controller against its own
//! interference plus noise; it never sees the secondary network. Secondary
//! links run Foschini–Miljanic target tracking, stepping their target down a
//! ladder of AMC thresholds until the nearest primary link keeps the
//! modulation it had with the secondary network silent.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::amc::{AmcTable, ModulationType};
use crate::math;
use crate::radio_env::{ChannelGains, Scenario};
use crate::{Error, Result};

pub const PN_INITIAL_POWER_DBM: f64 = 10.0;
pub const PN_TOLERANCE_DB: f64 = 0.01;
pub const PN_MAX_ITERATIONS: usize = 200;
pub const FM_TOLERANCE_DB: f64 = 0.1;
pub const FM_MAX_ITERATIONS: usize = 30;

/// Transmit powers in dBm. A secondary entry of `None` means that SU is silent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerState {
    pub pn_powers_dbm: Vec<f64>,
    pub sn_powers_dbm: Vec<Option<f64>>,
    pub iteration: usize,
}

impl PowerState {
    pub fn new(pn_powers_dbm: Vec<f64>, sn_powers_dbm: Vec<Option<f64>>) -> Self {
        Self { pn_powers_dbm, sn_powers_dbm, iteration: 0 }
    }

    /// Primary powers only, every SU silent.
    pub fn pn_only(pn_powers_dbm: Vec<f64>, n_s: usize) -> Self {
        Self::new(pn_powers_dbm, vec![None; n_s])
    }

    fn check(&self, gains: &ChannelGains) -> Result<()> {
        if self.pn_powers_dbm.len() != gains.n_p() {
            return Err(Error::Dimension { expected: gains.n_p(), got: self.pn_powers_dbm.len() });
        }
        if self.sn_powers_dbm.len() != gains.n_s() {
            return Err(Error::Dimension { expected: gains.n_s(), got: self.sn_powers_dbm.len() });
        }
        Ok(())
    }
}

fn to_mw(p: &[f64]) -> Vec<f64> {
    p.iter().map(|&d| math::db_to_lin(d)).collect()
}

fn to_mw_opt(p: &[Option<f64>]) -> Vec<f64> {
    p.iter().map(|d| d.map_or(0.0, math::db_to_lin)).collect()
}

fn clamp(v: f64, range: [f64; 2]) -> f64 {
    if v < range[0] {
        range[0]
    } else if v > range[1] {
        range[1]
    } else {
        v
    }
}

/// Primary SINRs with secondary interference included (linear powers in mW).
pub fn primary_sinr_mw(pn_mw: &[f64], sn_mw: &[f64], gains: &ChannelGains, sigma2: f64) -> Vec<f64> {
    (0..pn_mw.len())
        .map(|i| {
            let row = &gains.gpp[i];
            let mut den = sigma2;
            for (j, &p) in pn_mw.iter().enumerate() {
                if j != i {
                    den += row[j] * p;
                }
            }
            for (j, &s) in sn_mw.iter().enumerate() {
                den += gains.gps[i][j] * s;
            }
            row[i] * pn_mw[i] / den
        })
        .collect()
}

/// Linear SINR at every primary receiver.
pub fn primary_sinr(state: &PowerState, gains: &ChannelGains, sigma2: f64) -> Result<Vec<f64>> {
    state.check(gains)?;
    Ok(primary_sinr_mw(&to_mw(&state.pn_powers_dbm), &to_mw_opt(&state.sn_powers_dbm), gains, sigma2))
}

fn secondary_sinr_mw(pn_mw: &[f64], sn_mw: &[f64], active: &[bool], gains: &ChannelGains, sigma2: f64) -> Vec<Option<f64>> {
    (0..sn_mw.len())
        .map(|i| {
            if !active[i] {
                return None;
            }
            let mut den = sigma2;
            for (j, &s) in sn_mw.iter().enumerate() {
                if j != i {
                    den += gains.gss[i][j] * s;
                }
            }
            for (j, &p) in pn_mw.iter().enumerate() {
                den += gains.gsp[i][j] * p;
            }
            Some(gains.gss[i][i] * sn_mw[i] / den)
        })
        .collect()
}

/// Linear SINR at every SU receiver; `None` for silent SUs.
pub fn secondary_sinr(state: &PowerState, gains: &ChannelGains, sigma2: f64) -> Result<Vec<Option<f64>>> {
    state.check(gains)?;
    let active: Vec<bool> = state.sn_powers_dbm.iter().map(Option::is_some).collect();
    Ok(secondary_sinr_mw(
        &to_mw(&state.pn_powers_dbm),
        &to_mw_opt(&state.sn_powers_dbm),
        &active,
        gains,
        sigma2,
    ))
}

/// One synchronous step of the product-of-SINR controller, in dBm.
///
/// Secondary interference is deliberately absent from the update. With a
/// single primary link the sum is empty and the link gets maximum power.
pub fn primary_power_update(state: &PowerState, gains: &ChannelGains, sigma2: f64, range_dbm: [f64; 2]) -> Result<Vec<f64>> {
    let n_p = gains.n_p();
    if state.pn_powers_dbm.len() != n_p {
        return Err(Error::Dimension { expected: n_p, got: state.pn_powers_dbm.len() });
    }
    if n_p == 1 {
        return Ok(vec![range_dbm[1]]);
    }
    let p = to_mw(&state.pn_powers_dbm);
    // interference-plus-noise at each receiver j
    let den: Vec<f64> = (0..n_p)
        .map(|j| {
            let mut d = sigma2;
            for (m, &pm) in p.iter().enumerate() {
                if m != j {
                    d += gains.gpp[j][m] * pm;
                }
            }
            d
        })
        .collect();
    Ok((0..n_p)
        .map(|i| {
            let mut s = 0.0;
            for j in 0..n_p {
                if j != i {
                    s += gains.gpp[j][i] / den[j];
                }
            }
            clamp(math::lin_to_db(1.0 / s), range_dbm)
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub link: usize,
    pub power_dbm: f64,
    pub sinr_db: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrimaryControlOutcome {
    pub state: PowerState,
    pub iterations: usize,
    pub converged: bool,
    pub trace: Vec<TraceRow>,
}

/// Iterates [`primary_power_update`] from 10 dBm until no power moves by
/// more than 0.01 dB, or 200 iterations.
pub fn run_primary_power_control(scenario: &Scenario, gains: &ChannelGains, sigma2: f64) -> Result<PrimaryControlOutcome> {
    run_primary_power_control_from(
        vec![PN_INITIAL_POWER_DBM; gains.n_p()],
        gains,
        sigma2,
        scenario.config.pn_power_range_dbm,
        false,
    )
}

/// Same as [`run_primary_power_control`] with the per-iteration trace kept.
pub fn run_primary_power_control_traced(scenario: &Scenario, gains: &ChannelGains, sigma2: f64) -> Result<PrimaryControlOutcome> {
    run_primary_power_control_from(
        vec![PN_INITIAL_POWER_DBM; gains.n_p()],
        gains,
        sigma2,
        scenario.config.pn_power_range_dbm,
        true,
    )
}

pub fn run_primary_power_control_from(
    initial_dbm: Vec<f64>,
    gains: &ChannelGains,
    sigma2: f64,
    range_dbm: [f64; 2],
    keep_trace: bool,
) -> Result<PrimaryControlOutcome> {
    gains.validate()?;
    let n_s = gains.n_s();
    let mut state = PowerState::pn_only(initial_dbm.iter().map(|&p| clamp(p, range_dbm)).collect(), n_s);
    let mut trace = Vec::new();
    let record = |state: &PowerState, trace: &mut Vec<TraceRow>| -> Result<()> {
        if keep_trace {
            let sinr = primary_sinr(state, gains, sigma2)?;
            for (link, (&p, &g)) in state.pn_powers_dbm.iter().zip(&sinr).enumerate() {
                trace.push(TraceRow { iteration: state.iteration, link, power_dbm: p, sinr_db: math::lin_to_db(g) });
            }
        }
        Ok(())
    };
    record(&state, &mut trace)?;
    let mut converged = false;
    while state.iteration < PN_MAX_ITERATIONS {
        let next = primary_power_update(&state, gains, sigma2, range_dbm)?;
        let moved = next
            .iter()
            .zip(&state.pn_powers_dbm)
            .map(|(a, b)| libm::fabs(a - b))
            .fold(0.0, f64::max);
        state.pn_powers_dbm = next;
        state.iteration += 1;
        record(&state, &mut trace)?;
        if moved < PN_TOLERANCE_DB {
            converged = true;
            break;
        }
    }
    let iterations = state.iteration;
    Ok(PrimaryControlOutcome { state, iterations, converged, trace })
}

/// Foschini–Miljanic step: scale linear power by `target / measured`, clamp.
pub fn fm_update(power_dbm: f64, target: f64, measured: f64, range_dbm: [f64; 2]) -> Result<f64> {
    if !(measured > 0.0) {
        return Err(Error::Domain("measured SINR must be positive"));
    }
    if !(target > 0.0) {
        return Err(Error::Domain("target SINR must be positive"));
    }
    Ok(clamp(power_dbm + math::lin_to_db(target / measured), range_dbm))
}

/// Ascending list of linear SINR targets available to a secondary link.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetLadder {
    targets: Vec<f64>,
}

impl TargetLadder {
    pub fn new(targets: Vec<f64>) -> Result<Self> {
        if targets.is_empty() {
            return Err(Error::Config("target ladder must not be empty"));
        }
        if targets.iter().any(|t| !(*t > 0.0) || !t.is_finite()) {
            return Err(Error::Config("targets must be positive and finite"));
        }
        if targets.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Config("targets must be strictly ascending"));
        }
        Ok(Self { targets })
    }

    /// One rung per AMC mode, at the mode's entry SINR.
    pub fn from_table(table: &AmcTable) -> Self {
        Self { targets: table.thresholds().to_vec() }
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }
}

/// Source of modulation observations on primary links.
pub trait ModulationObserver {
    fn observe(&self, link: usize, sinr: f64) -> Result<ModulationType>;
}

/// Error-free classification straight from the AMC table.
impl ModulationObserver for AmcTable {
    fn observe(&self, _link: usize, sinr: f64) -> Result<ModulationType> {
        Ok(self.mode_for_sinr(sinr)?.modulation)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SuDecision {
    Transmit(f64),
    Blocked,
    Off,
}

impl SuDecision {
    pub fn power_dbm(&self) -> Option<f64> {
        match *self {
            SuDecision::Transmit(p) => Some(p),
            _ => None,
        }
    }
}

/// What each SU knows before it transmits: its nearest primary link and
/// that link's modulation with the secondary network silent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaselineObservation {
    pub nearest_link: Option<usize>,
    pub modulation: Option<ModulationType>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FmOutcome {
    pub decisions: Vec<SuDecision>,
    /// Final ladder rung per SU (`None` when blocked or off).
    pub rungs: Vec<Option<usize>>,
    /// Ladder rounds executed.
    pub rounds: usize,
}

/// Runs Foschini–Miljanic power control for the whole secondary network
/// with the modulation constraint.
///
/// All SUs start on the top rung and move synchronously. After each inner
/// FM convergence (30 iterations or 0.1 dB), every SU whose nearest link
/// changed modulation drops one rung; an SU that changes modulation on the
/// bottom rung turns off. SUs whose nearest link starts at type 0 are
/// blocked outright.
pub fn fm_with_modulation_constraint<O: ModulationObserver + ?Sized>(
    scenario: &Scenario,
    gains: &ChannelGains,
    pn_powers_dbm: &[f64],
    sigma2: f64,
    ladder: &TargetLadder,
    baseline: &[BaselineObservation],
    observer: &O,
) -> Result<FmOutcome> {
    gains.validate()?;
    let n_s = gains.n_s();
    if baseline.len() != n_s {
        return Err(Error::Dimension { expected: n_s, got: baseline.len() });
    }
    if pn_powers_dbm.len() != gains.n_p() {
        return Err(Error::Dimension { expected: gains.n_p(), got: pn_powers_dbm.len() });
    }
    let range = scenario.config.sn_power_range_dbm;
    let top = ladder.len() - 1;

    let mut decisions = vec![SuDecision::Off; n_s];
    let mut rungs: Vec<Option<usize>> = vec![None; n_s];
    for (j, obs) in baseline.iter().enumerate() {
        if obs.modulation == Some(ModulationType::Type0) {
            decisions[j] = SuDecision::Blocked;
        } else {
            rungs[j] = Some(top);
        }
    }

    let pn_mw = to_mw(pn_powers_dbm);
    let mut power_dbm = vec![range[0]; n_s];
    let mut rounds = 0;
    loop {
        rounds += 1;
        let active: Vec<bool> = rungs.iter().map(Option::is_some).collect();
        for _ in 0..FM_MAX_ITERATIONS {
            let sn_mw: Vec<f64> = (0..n_s)
                .map(|j| if active[j] { math::db_to_lin(power_dbm[j]) } else { 0.0 })
                .collect();
            let sinr = secondary_sinr_mw(&pn_mw, &sn_mw, &active, gains, sigma2);
            let mut moved: f64 = 0.0;
            for j in 0..n_s {
                if let (Some(rung), Some(measured)) = (rungs[j], sinr[j]) {
                    let next = fm_update(power_dbm[j], ladder.targets()[rung], measured, range)?;
                    moved = moved.max(libm::fabs(next - power_dbm[j]));
                    power_dbm[j] = next;
                }
            }
            if moved < FM_TOLERANCE_DB {
                break;
            }
        }

        let sn_mw: Vec<f64> = (0..n_s)
            .map(|j| if rungs[j].is_some() { math::db_to_lin(power_dbm[j]) } else { 0.0 })
            .collect();
        let pn_sinr = primary_sinr_mw(&pn_mw, &sn_mw, gains, sigma2);
        let mut changed = false;
        for j in 0..n_s {
            let (Some(rung), Some(link), Some(base)) = (rungs[j], baseline[j].nearest_link, baseline[j].modulation) else {
                continue;
            };
            if observer.observe(link, pn_sinr[link])? != base {
                changed = true;
                rungs[j] = if rung == 0 { None } else { Some(rung - 1) };
            }
        }
        if !changed {
            break;
        }
    }

    for j in 0..n_s {
        if rungs[j].is_some() {
            decisions[j] = SuDecision::Transmit(power_dbm[j]);
        }
    }
    Ok(FmOutcome { decisions, rungs, rounds })
}
