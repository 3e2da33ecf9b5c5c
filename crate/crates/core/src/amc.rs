//! Adaptive modulation and coding ladder.
//!
//! Fifteen modes (CQI 1..15) over three constellations. Each mode's entry
//! SINR comes from inverting the attenuated Shannon rate
//! `efficiency = log2(1 + k·γ)`, i.e. `threshold = (2^efficiency − 1) / k`.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::math;
use crate::{Error, Result};

/// Constellation family: type 0 is the 4-point, type 1 the 16-point and
/// type 2 the 64-point constellation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ModulationType {
    Type0,
    Type1,
    Type2,
}

impl ModulationType {
    pub fn index(self) -> u8 {
        match self {
            ModulationType::Type0 => 0,
            ModulationType::Type1 => 1,
            ModulationType::Type2 => 2,
        }
    }

    pub fn from_index(i: u8) -> Option<Self> {
        match i {
            0 => Some(ModulationType::Type0),
            1 => Some(ModulationType::Type1),
            2 => Some(ModulationType::Type2),
            _ => None,
        }
    }

    /// Type of a CQI under the standard split (1–6, 7–9, 10–15).
    pub fn for_cqi(cqi: u8) -> Self {
        match cqi {
            0..=6 => ModulationType::Type0,
            7..=9 => ModulationType::Type1,
            _ => ModulationType::Type2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AmcMode {
    pub cqi: u8,
    pub modulation: ModulationType,
    pub code_rate: f64,
    /// Bits per symbol.
    pub efficiency: f64,
    pub throughput_kbps: f64,
}

pub fn modulation_type_of(mode: &AmcMode) -> ModulationType {
    mode.modulation
}

/// Standard 4-bit CQI ladder: (code rate × 1024, efficiency).
const CQI_LADDER: [(f64, f64); 15] = [
    (78.0, 0.1523),
    (120.0, 0.2344),
    (193.0, 0.3770),
    (308.0, 0.6016),
    (449.0, 0.8770),
    (602.0, 1.1758),
    (378.0, 1.4766),
    (490.0, 1.9141),
    (616.0, 2.4063),
    (466.0, 2.7305),
    (567.0, 3.3223),
    (666.0, 3.9023),
    (772.0, 4.5234),
    (873.0, 5.1152),
    (948.0, 5.5547),
];

/// 168 000 symbols/s per stream in one 180 kHz resource block, two streams.
pub const DEFAULT_SYMBOL_BUDGET: f64 = 336_000.0;
pub const DEFAULT_SHANNON_K: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmcTable {
    modes: Vec<AmcMode>,
    sinr_thresholds: Vec<f64>,
    k: f64,
    symbol_budget: f64,
}

impl Default for AmcTable {
    fn default() -> Self {
        default_amc_table()
    }
}

pub fn default_amc_table() -> AmcTable {
    AmcTable::standard(DEFAULT_SHANNON_K, DEFAULT_SYMBOL_BUDGET).expect("default AMC parameters are valid")
}

impl AmcTable {
    /// The 15-mode ladder with thresholds from the attenuated Shannon rule.
    pub fn standard(k: f64, symbol_budget: f64) -> Result<Self> {
        if !(k > 0.0) || !k.is_finite() {
            return Err(Error::Config("Shannon attenuation k must be positive"));
        }
        if !(symbol_budget > 0.0) || !symbol_budget.is_finite() {
            return Err(Error::Config("symbol budget must be positive"));
        }
        let mut modes = Vec::with_capacity(15);
        let mut sinr_thresholds = Vec::with_capacity(15);
        for (i, &(rate_x1024, efficiency)) in CQI_LADDER.iter().enumerate() {
            let cqi = i as u8 + 1;
            modes.push(AmcMode {
                cqi,
                modulation: ModulationType::for_cqi(cqi),
                code_rate: rate_x1024 / 1024.0,
                efficiency,
                throughput_kbps: efficiency * symbol_budget / 1000.0,
            });
            sinr_thresholds.push((math::exp2(efficiency) - 1.0) / k);
        }
        Ok(Self { modes, sinr_thresholds, k, symbol_budget })
    }

    pub fn modes(&self) -> &[AmcMode] {
        &self.modes
    }

    /// Linear entry SINR of every mode, ascending.
    pub fn thresholds(&self) -> &[f64] {
        &self.sinr_thresholds
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn symbol_budget(&self) -> f64 {
        self.symbol_budget
    }

    /// Mode by CQI (1-based).
    pub fn mode(&self, cqi: u8) -> &AmcMode {
        &self.modes[cqi as usize - 1]
    }

    pub fn threshold(&self, cqi: u8) -> f64 {
        self.sinr_thresholds[cqi as usize - 1]
    }

    /// Highest mode whose threshold is at or below `gamma`; CQI 1 when
    /// `gamma` is below every threshold.
    pub fn mode_for_sinr(&self, gamma: f64) -> Result<&AmcMode> {
        if gamma.is_nan() || gamma < 0.0 {
            return Err(Error::Domain("SINR must be non-negative"));
        }
        let above = self.sinr_thresholds.partition_point(|&t| t <= gamma);
        Ok(&self.modes[above.saturating_sub(1)])
    }

    /// Throughput in kbps, zero below the CQI 1 threshold (outage).
    pub fn effective_throughput(&self, gamma: f64) -> Result<f64> {
        let mode = self.mode_for_sinr(gamma)?;
        if gamma < self.sinr_thresholds[0] {
            Ok(0.0)
        } else {
            Ok(mode.throughput_kbps)
        }
    }

    /// CQI whose throughput is closest to `kbps`; ties go to the lower CQI.
    pub fn nearest_cqi_for_throughput(&self, kbps: f64) -> u8 {
        let mut best = self.modes[0].cqi;
        let mut best_dist = f64::INFINITY;
        for m in &self.modes {
            let d = libm::fabs(m.throughput_kbps - kbps);
            if d < best_dist {
                best_dist = d;
                best = m.cqi;
            }
        }
        best
    }
}
