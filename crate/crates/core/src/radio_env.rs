//! Playground geometry and channel model.
//!
//! Base stations sit on a square grid whose edges wrap around (a torus), so
//! every node sees the same neighbourhood regardless of where it lands. Path
//! loss follows `L = 128.1 + 37.6 log10(d_km) + penetration + shadowing` with
//! log-normal shadowing drawn once per (transmitter, receiver) path and kept
//! for the lifetime of the scenario.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::math;
use crate::rng::ChaCha8Rng;
use crate::{Error, Result};
use rand::SeedableRng;

/// Distances below this are clamped before taking the logarithm.
pub const MIN_DISTANCE_KM: f64 = 0.001;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlaygroundConfig {
    pub grid_side: usize,
    pub bs_spacing_m: f64,
    pub su_pair_count: usize,
    pub su_link_radius_m: f64,
    pub noise_power_dbm: f64,
    pub pn_power_range_dbm: [f64; 2],
    pub sn_power_range_dbm: [f64; 2],
    pub penetration_loss_db: f64,
    pub shadowing_sigma_db: f64,
}

impl Default for PlaygroundConfig {
    fn default() -> Self {
        Self {
            grid_side: 5,
            bs_spacing_m: 200.0,
            su_pair_count: 4,
            su_link_radius_m: 50.0,
            noise_power_dbm: -130.0,
            pn_power_range_dbm: [-20.0, 40.0],
            sn_power_range_dbm: [-30.0, 20.0],
            penetration_loss_db: 10.0,
            shadowing_sigma_db: 6.0,
        }
    }
}

impl PlaygroundConfig {
    pub fn validate(&self) -> Result<()> {
        if self.grid_side < 2 {
            return Err(Error::Config("grid_side must be at least 2"));
        }
        if !(self.bs_spacing_m > 0.0) || !self.bs_spacing_m.is_finite() {
            return Err(Error::Config("bs_spacing_m must be positive"));
        }
        if !(self.su_link_radius_m > 0.0) {
            return Err(Error::Config("su_link_radius_m must be positive"));
        }
        if !(self.pn_power_range_dbm[0] < self.pn_power_range_dbm[1]) {
            return Err(Error::Config("pn_power_range_dbm must be ordered min < max"));
        }
        if !(self.sn_power_range_dbm[0] < self.sn_power_range_dbm[1]) {
            return Err(Error::Config("sn_power_range_dbm must be ordered min < max"));
        }
        if !(self.shadowing_sigma_db >= 0.0) {
            return Err(Error::Config("shadowing_sigma_db must be non-negative"));
        }
        if !self.noise_power_dbm.is_finite() {
            return Err(Error::Config("noise_power_dbm must be finite"));
        }
        Ok(())
    }

    /// Number of base stations, `grid_side²`.
    pub fn bs_count(&self) -> usize {
        self.grid_side * self.grid_side
    }

    /// Side length of the (square) playground in meters.
    pub fn side_m(&self) -> f64 {
        self.grid_side as f64 * self.bs_spacing_m
    }

    /// Base station `k` sits at the centre of grid cell `(k % side, k / side)`.
    pub fn bs_position(&self, k: usize) -> Position {
        let col = (k % self.grid_side) as f64;
        let row = (k / self.grid_side) as f64;
        Position {
            x: (col + 0.5) * self.bs_spacing_m,
            y: (row + 0.5) * self.bs_spacing_m,
        }
    }

    /// Linear noise power in mW.
    pub fn noise_mw(&self) -> f64 {
        math::db_to_lin(self.noise_power_dbm)
    }
}

/// A point on the playground, in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

impl Position {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }
}

/// Minimum-image distance on the wrapped playground, in kilometers.
pub fn torus_distance(a: Position, b: Position, cfg: &PlaygroundConfig) -> f64 {
    let side = cfg.side_m();
    let wrap = |d: f64| {
        let d = libm::fabs(d) % side;
        if d > side - d {
            side - d
        } else {
            d
        }
    };
    let dx = wrap(a.x - b.x);
    let dy = wrap(a.y - b.y);
    math::sqrt(dx * dx + dy * dy) / 1000.0
}

/// Path loss in dB for a link of `d_km` with the given shadowing term.
pub fn path_loss_db(d_km: f64, shadow_db: f64, cfg: &PlaygroundConfig) -> Result<f64> {
    let d = if d_km < MIN_DISTANCE_KM { MIN_DISTANCE_KM } else { d_km };
    if !(d > 0.0) || !d.is_finite() {
        return Err(Error::Domain("distance must be positive and finite"));
    }
    Ok(128.1 + 37.6 * math::log10(d) + cfg.penetration_loss_db + shadow_db)
}

pub fn path_gain_linear(d_km: f64, shadow_db: f64, cfg: &PlaygroundConfig) -> Result<f64> {
    Ok(math::db_to_lin(-path_loss_db(d_km, shadow_db, cfg)?))
}

/// One active primary link: a base station serving one receiver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrimaryLink {
    pub bs_index: usize,
    pub pu_position: Position,
    /// Shadowing (dB) from every base station of the grid to this receiver,
    /// indexed by base-station index.
    pub shadow_from_bs_db: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SecondaryPair {
    pub tx: Position,
    pub rx: Position,
}

/// Shadowing draws for the paths that involve secondary nodes.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SecondaryShadowing {
    /// `ps[i][j]`: SU transmitter `j` to primary receiver `i`.
    pub ps: Vec<Vec<f64>>,
    /// `sp[i][j]`: base station of primary link `j` to SU receiver `i`.
    pub sp: Vec<Vec<f64>>,
    /// `ss[i][j]`: SU transmitter `j` to SU receiver `i`.
    pub ss: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub config: PlaygroundConfig,
    pub primary_links: Vec<PrimaryLink>,
    pub su_pairs: Vec<SecondaryPair>,
    pub shadowing: SecondaryShadowing,
    pub seed: u64,
}

impl Scenario {
    pub fn n_p(&self) -> usize {
        self.primary_links.len()
    }

    pub fn n_s(&self) -> usize {
        self.su_pairs.len()
    }

    /// Primary network load `N_P / N_PBS`.
    pub fn load(&self) -> f64 {
        self.n_p() as f64 / self.config.bs_count() as f64
    }

    pub fn bs_position_of_link(&self, link: usize) -> Position {
        self.config.bs_position(self.primary_links[link].bs_index)
    }

    /// Structural checks shared by generation and deserialization.
    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        let n_pbs = self.config.bs_count();
        let (n_p, n_s) = (self.n_p(), self.n_s());
        if n_p == 0 || n_p > n_pbs {
            return Err(Error::Config("primary link count must be in 1..=N_PBS"));
        }
        let mut taken = vec![false; n_pbs];
        for link in &self.primary_links {
            if link.bs_index >= n_pbs || taken[link.bs_index] {
                return Err(Error::Config("each base station serves at most one receiver"));
            }
            taken[link.bs_index] = true;
            if link.shadow_from_bs_db.len() != n_pbs {
                return Err(Error::Dimension { expected: n_pbs, got: link.shadow_from_bs_db.len() });
            }
        }
        let sh = &self.shadowing;
        check_shape(&sh.ps, n_p, n_s)?;
        check_shape(&sh.sp, n_s, n_p)?;
        check_shape(&sh.ss, n_s, n_s)?;
        Ok(())
    }
}

fn check_shape(m: &[Vec<f64>], rows: usize, cols: usize) -> Result<()> {
    if m.len() != rows {
        return Err(Error::Dimension { expected: rows, got: m.len() });
    }
    for row in m {
        if row.len() != cols {
            return Err(Error::Dimension { expected: cols, got: row.len() });
        }
    }
    Ok(())
}

/// Linear path gains between every transmitter/receiver pair of interest.
///
/// Row index is always the receiver, column index the transmitter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelGains {
    /// Primary transmitter `j` to primary receiver `i`.
    pub gpp: Vec<Vec<f64>>,
    /// SU transmitter `j` to primary receiver `i`.
    pub gps: Vec<Vec<f64>>,
    /// Primary transmitter `j` to SU receiver `i`.
    pub gsp: Vec<Vec<f64>>,
    /// SU transmitter `j` to SU receiver `i`.
    pub gss: Vec<Vec<f64>>,
}

impl ChannelGains {
    pub fn n_p(&self) -> usize {
        self.gpp.len()
    }

    pub fn n_s(&self) -> usize {
        self.gss.len()
    }

    pub fn validate(&self) -> Result<()> {
        let (n_p, n_s) = (self.n_p(), self.n_s());
        check_shape(&self.gpp, n_p, n_p)?;
        check_shape(&self.gps, n_p, n_s)?;
        check_shape(&self.gsp, n_s, n_p)?;
        check_shape(&self.gss, n_s, n_s)?;
        Ok(())
    }
}

fn wrap_coord(v: f64, side: f64) -> f64 {
    let r = v % side;
    if r < 0.0 {
        r + side
    } else {
        r
    }
}

fn uniform_position(rng: &mut ChaCha8Rng, side: f64) -> Position {
    Position::new(rng.random::<f64>() * side, rng.random::<f64>() * side)
}

/// Draws a scenario with `n_p` primary links and the configured SU pairs.
///
/// Receivers are placed uniformly; a receiver whose strongest base station
/// already serves another receiver is redrawn (position and shadowing).
pub fn generate_scenario(cfg: &PlaygroundConfig, n_p: usize, seed: u64) -> Result<Scenario> {
    cfg.validate()?;
    let n_pbs = cfg.bs_count();
    if n_p == 0 || n_p > n_pbs {
        return Err(Error::Config("primary link count must be in 1..=N_PBS"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shadow = Normal::new(0.0, cfg.shadowing_sigma_db)
        .map_err(|_| Error::Config("invalid shadowing sigma"))?;
    let side = cfg.side_m();

    let mut taken = vec![false; n_pbs];
    let mut primary_links = Vec::with_capacity(n_p);
    for _ in 0..n_p {
        loop {
            let pu = uniform_position(&mut rng, side);
            let shadows: Vec<f64> = (0..n_pbs).map(|_| shadow.sample(&mut rng)).collect();
            let mut best = 0;
            let mut best_gain = f64::NEG_INFINITY;
            for (k, &s) in shadows.iter().enumerate() {
                let g = path_gain_linear(torus_distance(pu, cfg.bs_position(k), cfg), s, cfg)?;
                if g > best_gain {
                    best_gain = g;
                    best = k;
                }
            }
            if !taken[best] {
                taken[best] = true;
                primary_links.push(PrimaryLink {
                    bs_index: best,
                    pu_position: pu,
                    shadow_from_bs_db: shadows,
                });
                break;
            }
        }
    }

    let n_s = cfg.su_pair_count;
    let mut su_pairs = Vec::with_capacity(n_s);
    for _ in 0..n_s {
        let tx = uniform_position(&mut rng, side);
        // uniform by area over the disk
        let r = cfg.su_link_radius_m * math::sqrt(rng.random::<f64>());
        let theta = 2.0 * core::f64::consts::PI * rng.random::<f64>();
        let rx = Position::new(
            wrap_coord(tx.x + r * math::cos(theta), side),
            wrap_coord(tx.y + r * math::sin(theta), side),
        );
        su_pairs.push(SecondaryPair { tx, rx });
    }

    let mut draw = |rows: usize, cols: usize| -> Vec<Vec<f64>> {
        (0..rows)
            .map(|_| (0..cols).map(|_| shadow.sample(&mut rng)).collect())
            .collect()
    };
    let shadowing = SecondaryShadowing {
        ps: draw(n_p, n_s),
        sp: draw(n_s, n_p),
        ss: draw(n_s, n_s),
    };

    Ok(Scenario {
        config: cfg.clone(),
        primary_links,
        su_pairs,
        shadowing,
        seed,
    })
}

/// Assembles the four gain matrices of a scenario.
pub fn gain_matrices(s: &Scenario) -> Result<ChannelGains> {
    let cfg = &s.config;
    let gain = |a: Position, b: Position, shadow: f64| path_gain_linear(torus_distance(a, b, cfg), shadow, cfg);
    let links = &s.primary_links;
    let sh = &s.shadowing;

    let mut gpp = Vec::with_capacity(links.len());
    let mut gps = Vec::with_capacity(links.len());
    for (i, rx) in links.iter().enumerate() {
        let row: Result<Vec<f64>> = links
            .iter()
            .map(|tx| gain(rx.pu_position, cfg.bs_position(tx.bs_index), rx.shadow_from_bs_db[tx.bs_index]))
            .collect();
        gpp.push(row?);
        let row: Result<Vec<f64>> = s
            .su_pairs
            .iter()
            .enumerate()
            .map(|(j, su)| gain(rx.pu_position, su.tx, sh.ps[i][j]))
            .collect();
        gps.push(row?);
    }

    let mut gsp = Vec::with_capacity(s.n_s());
    let mut gss = Vec::with_capacity(s.n_s());
    for (i, rx) in s.su_pairs.iter().enumerate() {
        let row: Result<Vec<f64>> = links
            .iter()
            .enumerate()
            .map(|(j, tx)| gain(rx.rx, cfg.bs_position(tx.bs_index), sh.sp[i][j]))
            .collect();
        gsp.push(row?);
        let row: Result<Vec<f64>> = s
            .su_pairs
            .iter()
            .enumerate()
            .map(|(j, tx)| gain(rx.rx, tx.tx, sh.ss[i][j]))
            .collect();
        gss.push(row?);
    }

    Ok(ChannelGains { gpp, gps, gsp, gss })
}
