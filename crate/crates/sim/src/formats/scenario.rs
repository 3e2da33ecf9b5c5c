//! Scenario dumps: everything needed to rebuild the channel gains.
//!
//! ```text
//! underlay-scenario 1
//! seed 42
//! grid_side 5
//! …playground fields…
//! primary_links 4
//! link <bs_index> <pu_x_m> <pu_y_m> <shadow dB from each BS>
//! su_pairs 4
//! pair <tx_x_m> <tx_y_m> <rx_x_m> <rx_y_m>
//! ps <N_S values>          (N_P lines)
//! sp <N_P values>          (N_S lines)
//! ss <N_S values>          (N_S lines)
//! ```

use std::fs;
use std::path::Path;

use underlay_core::radio_env::{PlaygroundConfig, Position, PrimaryLink, Scenario, SecondaryPair, SecondaryShadowing};

use super::{fmt_exact, push_record, Lines};
use crate::error::{Result, SimError};

const MAGIC: &str = "underlay-scenario";
pub const SCENARIO_FORMAT_VERSION: u32 = 1;

fn floats(v: &[f64]) -> impl Iterator<Item = String> + '_ {
    v.iter().map(|&x| fmt_exact(x))
}

pub fn scenario_to_string(s: &Scenario) -> String {
    let c = &s.config;
    let mut out = format!("{MAGIC} {SCENARIO_FORMAT_VERSION}\n");
    push_record(&mut out, "seed", [s.seed.to_string()]);
    push_record(&mut out, "grid_side", [c.grid_side.to_string()]);
    push_record(&mut out, "bs_spacing_m", floats(&[c.bs_spacing_m]));
    push_record(&mut out, "su_pair_count", [c.su_pair_count.to_string()]);
    push_record(&mut out, "su_link_radius_m", floats(&[c.su_link_radius_m]));
    push_record(&mut out, "noise_power_dbm", floats(&[c.noise_power_dbm]));
    push_record(&mut out, "pn_power_range_dbm", floats(&c.pn_power_range_dbm));
    push_record(&mut out, "sn_power_range_dbm", floats(&c.sn_power_range_dbm));
    push_record(&mut out, "penetration_loss_db", floats(&[c.penetration_loss_db]));
    push_record(&mut out, "shadowing_sigma_db", floats(&[c.shadowing_sigma_db]));
    push_record(&mut out, "primary_links", [s.n_p().to_string()]);
    for link in &s.primary_links {
        let head = [link.bs_index.to_string(), fmt_exact(link.pu_position.x), fmt_exact(link.pu_position.y)];
        push_record(&mut out, "link", head.into_iter().chain(floats(&link.shadow_from_bs_db)));
    }
    push_record(&mut out, "su_pairs", [s.n_s().to_string()]);
    for p in &s.su_pairs {
        push_record(&mut out, "pair", floats(&[p.tx.x, p.tx.y, p.rx.x, p.rx.y]));
    }
    for (key, m) in [("ps", &s.shadowing.ps), ("sp", &s.shadowing.sp), ("ss", &s.shadowing.ss)] {
        for row in m {
            push_record(&mut out, key, floats(row));
        }
    }
    out
}

pub fn scenario_from_str(text: &str) -> Result<Scenario> {
    let mut l = Lines::new(text);
    l.header(MAGIC, "scenario", SCENARIO_FORMAT_VERSION)?;
    let seed: u64 = l.uint("seed")?;
    let grid_side: usize = l.uint("grid_side")?;
    let bs_spacing_m = l.float("bs_spacing_m")?;
    let su_pair_count: usize = l.uint("su_pair_count")?;
    let su_link_radius_m = l.float("su_link_radius_m")?;
    let noise_power_dbm = l.float("noise_power_dbm")?;
    let mut pair = |key: &str| -> Result<[f64; 2]> {
        let toks = l.record(key)?;
        let v = l.floats(&toks, Some(2))?;
        Ok([v[0], v[1]])
    };
    let pn_power_range_dbm = pair("pn_power_range_dbm")?;
    let sn_power_range_dbm = pair("sn_power_range_dbm")?;
    let penetration_loss_db = l.float("penetration_loss_db")?;
    let shadowing_sigma_db = l.float("shadowing_sigma_db")?;
    let config = PlaygroundConfig {
        grid_side,
        bs_spacing_m,
        su_pair_count,
        su_link_radius_m,
        noise_power_dbm,
        pn_power_range_dbm,
        sn_power_range_dbm,
        penetration_loss_db,
        shadowing_sigma_db,
    };
    let n_pbs = grid_side * grid_side;

    let n_p: usize = l.uint("primary_links")?;
    let mut primary_links = Vec::with_capacity(n_p);
    for _ in 0..n_p {
        let toks = l.record("link")?;
        if toks.is_empty() {
            return Err(l.malformed("empty link record"));
        }
        let bs_index: usize = toks[0]
            .parse()
            .map_err(|_| l.malformed(format!("malformed base-station index `{}`", toks[0])))?;
        let v = l.floats(&toks[1..], Some(2 + n_pbs))?;
        primary_links.push(PrimaryLink {
            bs_index,
            pu_position: Position::new(v[0], v[1]),
            shadow_from_bs_db: v[2..].to_vec(),
        });
    }
    let n_s: usize = l.uint("su_pairs")?;
    let mut su_pairs = Vec::with_capacity(n_s);
    for _ in 0..n_s {
        let toks = l.record("pair")?;
        let v = l.floats(&toks, Some(4))?;
        su_pairs.push(SecondaryPair { tx: Position::new(v[0], v[1]), rx: Position::new(v[2], v[3]) });
    }
    let mut matrix = |key: &str, rows: usize, cols: usize| -> Result<Vec<Vec<f64>>> {
        (0..rows)
            .map(|_| {
                let toks = l.record(key)?;
                l.floats(&toks, Some(cols))
            })
            .collect()
    };
    let shadowing = SecondaryShadowing { ps: matrix("ps", n_p, n_s)?, sp: matrix("sp", n_s, n_p)?, ss: matrix("ss", n_s, n_s)? };
    l.finish()?;
    let s = Scenario { config, primary_links, su_pairs, shadowing, seed };
    s.validate()?;
    Ok(s)
}

pub fn save_scenario(path: &Path, s: &Scenario) -> Result<()> {
    fs::write(path, scenario_to_string(s)).map_err(|e| SimError::io(path, e))
}

pub fn load_scenario(path: &Path) -> Result<Scenario> {
    let text = fs::read_to_string(path).map_err(|e| SimError::io(path, e))?;
    scenario_from_str(&text)
}
