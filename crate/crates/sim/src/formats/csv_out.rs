//! CSV tables. Result tables carry 9 significant digits; the dataset keeps
//! shortest round-trip digits so a reload trains identically.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use underlay_core::amc::AmcTable;
use underlay_core::engine::ProbeEpochRecord;
use underlay_core::experiments::{sn_throughput_cdf, CqiHistogram, MetricsRecord, NoiseSweepRow, PolicyOutcome};
use underlay_core::math;
use underlay_core::narx::{EpochLog, Sequence, SplitPart, TrainingSet};
use underlay_core::power_control::TraceRow;

use crate::error::{Result, SimError};

/// `v` rounded to 9 significant digits, printed without exponent noise.
pub fn sig9(v: f64) -> String {
    if !v.is_finite() {
        return v.to_string();
    }
    let rounded: f64 = format!("{v:.8e}").parse().expect("formatted float parses");
    // normalize negative zero
    let rounded = if rounded == 0.0 { 0.0 } else { rounded };
    rounded.to_string()
}

fn writer(path: &Path) -> Result<csv::Writer<File>> {
    let f = File::create(path).map_err(|e| SimError::io(path, e))?;
    Ok(csv::Writer::from_writer(f))
}

fn finish(mut w: csv::Writer<File>, path: &Path) -> Result<()> {
    w.flush().map_err(|e| SimError::io(path, e))
}

pub fn write_noise_sweep(path: &Path, rows: &[NoiseSweepRow]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["load", "noise_dbm", "pn_kbps", "rel_change"])?;
    for r in rows {
        w.write_record([sig9(r.load), sig9(r.noise_dbm), sig9(r.pn_kbps), sig9(r.rel_change)])?;
    }
    finish(w, path)
}

/// One row per (policy, load, run); `sn_kbps` is the per-run SU average.
pub fn write_monte_carlo(path: &Path, outcomes: &[PolicyOutcome]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["policy", "load", "run", "pn_kbps", "rel_change", "sn_kbps", "blocked_frac"])?;
    for o in outcomes {
        w.write_record([
            o.policy.to_string(),
            sig9(o.load),
            o.run.to_string(),
            sig9(o.pn_kbps),
            sig9(o.rel_change()),
            sig9(o.sn_avg()),
            sig9(o.blocked_fraction()),
        ])?;
    }
    finish(w, path)
}

pub fn write_sn_cdf(path: &Path, metrics: &[MetricsRecord]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["policy", "load", "throughput_kbps", "cdf"])?;
    for m in metrics {
        for (t, c) in sn_throughput_cdf(&m.sn_throughput_samples) {
            w.write_record([m.policy.to_string(), sig9(m.load), sig9(t), sig9(c)])?;
        }
    }
    finish(w, path)
}

pub fn write_cqi_hist(path: &Path, hists: &[CqiHistogram]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["load", "abs_error", "freq"])?;
    for h in hists {
        for (k, label) in ["0", "1", "2", "3+"].iter().enumerate() {
            w.write_record([sig9(h.load), label.to_string(), sig9(h.freq[k])])?;
        }
    }
    finish(w, path)
}

pub fn write_training_log(path: &Path, history: &[EpochLog]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["epoch", "train_mse", "val_mse", "lambda", "accepted"])?;
    for e in history {
        w.write_record([e.epoch.to_string(), sig9(e.train_mse), sig9(e.val_mse), sig9(e.lambda), e.accepted.to_string()])?;
    }
    finish(w, path)
}

pub fn write_amc_table(path: &Path, table: &AmcTable) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["cqi", "type", "code_rate", "efficiency", "threshold_db", "throughput_kbps"])?;
    for m in table.modes() {
        w.write_record([
            m.cqi.to_string(),
            m.modulation.index().to_string(),
            sig9(m.code_rate),
            sig9(m.efficiency),
            sig9(math::lin_to_db(table.threshold(m.cqi))),
            sig9(m.throughput_kbps),
        ])?;
    }
    finish(w, path)
}

pub fn write_power_trace(path: &Path, trace: &[TraceRow]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["iteration", "link", "power_dbm", "sinr_db"])?;
    for r in trace {
        w.write_record([r.iteration.to_string(), r.link.to_string(), sig9(r.power_dbm), sig9(r.sinr_db)])?;
    }
    finish(w, path)
}

/// Step 0 is the silent baseline and has an empty power field.
pub fn write_probe_records(path: &Path, records: &[ProbeEpochRecord]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["su", "step", "power_dbm", "sensed_type", "predicted_t_kbps"])?;
    let opt = |v: Option<f64>| v.map(sig9).unwrap_or_default();
    for r in records {
        let Some(base) = r.baseline else { continue };
        w.write_record([
            r.su_index.to_string(),
            "0".to_string(),
            String::new(),
            base.modulation.index().to_string(),
            opt(r.baseline_throughput_pred),
        ])?;
        for (k, s) in r.steps.iter().enumerate() {
            w.write_record([
                r.su_index.to_string(),
                (k + 1).to_string(),
                sig9(s.power_dbm),
                s.observation.modulation.index().to_string(),
                opt(s.predicted_kbps),
            ])?;
        }
    }
    finish(w, path)
}

fn part_label(p: SplitPart) -> &'static str {
    match p {
        SplitPart::Train => "train",
        SplitPart::Validation => "validation",
        SplitPart::Test => "test",
    }
}

/// Long format: one row per sample, grouped by sequence.
pub fn write_dataset(path: &Path, set: &TrainingSet) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["sequence", "part", "load", "step", "u1", "u2", "y"])?;
    for (i, (s, p)) in set.sequences.iter().zip(&set.parts).enumerate() {
        for k in 0..s.len() {
            w.write_record([
                i.to_string(),
                part_label(*p).to_string(),
                s.load.to_string(),
                k.to_string(),
                s.u1[k].to_string(),
                s.u2[k].to_string(),
                s.y[k].to_string(),
            ])?;
        }
    }
    finish(w, path)
}

pub fn read_dataset(path: &Path) -> Result<TrainingSet> {
    let f = File::open(path).map_err(|e| SimError::io(path, e))?;
    let mut r = csv::Reader::from_reader(f);
    let mut sequences: Vec<Sequence> = Vec::new();
    let mut parts = Vec::new();
    for (row, rec) in r.records().enumerate() {
        let rec = rec?;
        let line = row + 2;
        let bad = |msg: &str| SimError::Malformed { line, msg: msg.to_string() };
        if rec.len() != 7 {
            return Err(bad("expected 7 fields"));
        }
        let num = |k: usize| -> Result<f64> {
            rec[k].parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| bad("malformed number"))
        };
        let idx: usize = rec[0].parse().map_err(|_| bad("malformed sequence index"))?;
        let part = match &rec[1] {
            "train" => SplitPart::Train,
            "validation" => SplitPart::Validation,
            "test" => SplitPart::Test,
            _ => return Err(bad("unknown part")),
        };
        if idx == sequences.len() {
            sequences.push(Sequence { u1: Vec::new(), u2: Vec::new(), y: Vec::new(), load: num(2)? });
            parts.push(part);
        } else if idx + 1 != sequences.len() {
            return Err(bad("sequence rows must be contiguous and ordered"));
        }
        let s = sequences.last_mut().expect("pushed above");
        s.u1.push(num(4)?);
        s.u2.push(num(5)?);
        s.y.push(num(6)?);
    }
    Ok(TrainingSet { sequences, parts })
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut f = File::create(path).map_err(|e| SimError::io(path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| SimError::io(path, e))
}
