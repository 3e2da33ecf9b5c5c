//! Acceptance criteria 1 to 9 at full scale. Prints one PASS/FAIL line per
//! criterion and exits non-zero if any criterion fails.

use std::fs;
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use underlay_core::amc::AmcTable;
use underlay_core::experiments::{
    cqi_error_histogram, generate_held_out, generate_training_data, noise_elbow, train_model, CqiHistogram,
    ExperimentConfig, MetricsRecord, NoiseSweepRow, Policy,
};
use underlay_core::math::{db_to_lin, lin_to_db};
use underlay_core::narx::{init_model, jacobian_row, train_lm, NarxConfig, NarxModel, Sequence, TrainingSet};
use underlay_core::power_control::{fm_update, run_primary_power_control};
use underlay_core::radio_env::{gain_matrices, generate_scenario, ChannelGains, PlaygroundConfig};
use underlay_sim::formats::model::save_model;
use underlay_sim::runner;

struct Verdict {
    pass: bool,
    detail: String,
}

impl Verdict {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self { pass, detail: detail.into() }
    }
}

fn metric<'a>(metrics: &'a [MetricsRecord], policy: Policy, load: f64) -> Option<&'a MetricsRecord> {
    metrics.iter().find(|m| m.policy == policy && m.load == load)
}

// ------------------------------------------------------------ criterion 1

fn noise_sweep_elbow(cfg: &ExperimentConfig, rows: &[NoiseSweepRow]) -> Verdict {
    let mut pass = true;
    let mut detail = Vec::new();
    for &load in &cfg.loads {
        let flat: Vec<f64> = rows.iter().filter(|r| r.load == load && r.noise_dbm <= -100.0).map(|r| r.pn_kbps).collect();
        let hi = flat.iter().copied().fold(f64::MIN, f64::max);
        let lo = flat.iter().copied().fold(f64::MAX, f64::min);
        let spread = (hi - lo) / hi;
        let elbow = noise_elbow(rows, load, 0.05);
        let ok = spread <= 0.05 && elbow.is_some_and(|e| (-100.0..=-80.0).contains(&e));
        pass &= ok;
        detail.push(format!("load {load}: flat spread {:.2}%, elbow {:?} dBm", 100.0 * spread, elbow));
    }
    Verdict::new(pass, detail.join("; "))
}

// ------------------------------------------------------------ criterion 2

fn relative_change_control(cfg: &ExperimentConfig, metrics: &[MetricsRecord]) -> Verdict {
    let mut pass = true;
    let mut detail = Vec::new();
    for (delta, bound) in [(0.02, 0.035), (0.05, 0.07), (0.10, 0.13)] {
        let mut worst: f64 = f64::MIN;
        for &load in &cfg.loads {
            match metric(metrics, Policy::NnRelChange(delta), load) {
                Some(m) => worst = worst.max(m.pn_rel_change),
                None => pass = false,
            }
        }
        pass &= worst <= bound;
        detail.push(format!("delta {delta}: worst {:.2}% (bound {:.1}%)", 100.0 * worst, 100.0 * bound));
    }
    Verdict::new(pass, detail.join("; "))
}

// ------------------------------------------------------------ criterion 3

fn policy_ordering(cfg: &ExperimentConfig, metrics: &[MetricsRecord]) -> Verdict {
    let middle = [
        Policy::FmBaseline,
        Policy::NnNoModChange,
        Policy::NnRelChange(0.02),
        Policy::NnRelChange(0.05),
        Policy::NnRelChange(0.10),
    ];
    let mut pass = true;
    let mut detail = Vec::new();
    for &load in &cfg.loads {
        let (Some(only), Some(min), Some(max)) = (
            metric(metrics, Policy::PnOnly, load),
            metric(metrics, Policy::ExhaustiveMin, load),
            metric(metrics, Policy::ExhaustiveMax, load),
        ) else {
            pass = false;
            detail.push(format!("load {load}: missing policy rows"));
            continue;
        };
        let band = 0.02 * only.pn_avg_throughput;
        let mut ok = true;
        let mut outside = Vec::new();
        for p in middle {
            let Some(m) = metric(metrics, p, load) else {
                ok = false;
                outside.push(format!("{p} missing"));
                continue;
            };
            if min.pn_avg_throughput > m.pn_avg_throughput + band || m.pn_avg_throughput > only.pn_avg_throughput + band {
                ok = false;
                outside.push(format!("{p} {:.1}", m.pn_avg_throughput));
            }
        }
        let max_gap = (max.pn_avg_throughput - only.pn_avg_throughput).abs() / only.pn_avg_throughput;
        if load != 0.16 {
            ok &= max_gap <= 0.01;
        }
        pass &= ok;
        detail.push(format!(
            "load {load}: min {:.1} only {:.1} max {:.1} kbps (max gap {:.2}%){}",
            min.pn_avg_throughput,
            only.pn_avg_throughput,
            max.pn_avg_throughput,
            100.0 * max_gap,
            if outside.is_empty() { String::new() } else { format!(", outside band: {}", outside.join(", ")) }
        ));
    }
    Verdict::new(pass, detail.join("; "))
}

// ------------------------------------------------------------ criterion 4

fn sn_monotone_in_delta(cfg: &ExperimentConfig, metrics: &[MetricsRecord]) -> Verdict {
    let mut pass = true;
    let mut strict = false;
    let mut detail = Vec::new();
    for &load in &cfg.loads {
        let sn: Option<Vec<f64>> = [0.02, 0.05, 0.10]
            .iter()
            .map(|&d| metric(metrics, Policy::NnRelChange(d), load).map(|m| m.sn_avg_throughput))
            .collect();
        let Some(sn) = sn else {
            pass = false;
            continue;
        };
        pass &= sn[0] <= sn[1] && sn[1] <= sn[2];
        strict |= sn[0] < sn[2];
        detail.push(format!("load {load}: {:.2} / {:.2} / {:.2} kbps", sn[0], sn[1], sn[2]));
    }
    Verdict::new(pass && strict, detail.join("; "))
}

// ------------------------------------------------------------ criterion 5

fn transmission_opportunities(cfg: &ExperimentConfig, metrics: &[MetricsRecord]) -> Verdict {
    let mut pass = true;
    let mut detail = Vec::new();
    let mut prev = f64::MIN;
    for &load in &cfg.loads {
        let Some(fm) = metric(metrics, Policy::FmBaseline, load) else {
            pass = false;
            continue;
        };
        let z = fm.zero_mass();
        pass &= (0.08..=0.45).contains(&z) && z >= prev;
        prev = z;
        let mut nn = Vec::new();
        for p in cfg.policies.iter().filter(|p| p.needs_model()) {
            let zn = metric(metrics, *p, load).map_or(f64::NAN, |m| m.zero_mass());
            pass &= zn < z;
            nn.push(format!("{p} {:.3}", zn));
        }
        detail.push(format!("load {load}: fm {:.3} vs {}", z, nn.join(", ")));
    }
    Verdict::new(pass, detail.join("; "))
}

// ------------------------------------------------------------ criterion 6

fn cqi_prediction(hists: &[CqiHistogram]) -> Verdict {
    let at = |load: f64| hists.iter().find(|h| h.load == load);
    let (Some(h16), Some(h48)) = (at(0.16), at(0.48)) else {
        return Verdict::new(false, "missing load 0.16 or 0.48");
    };
    let pass = h48.freq[0] >= 0.55 && h48.within_one() >= 0.85 && h48.freq[0] > h16.freq[0];
    let detail = hists
        .iter()
        .map(|h| format!("load {}: exact {:.3}, within one {:.3} (n={})", h.load, h.freq[0], h.within_one(), h.samples))
        .collect::<Vec<_>>()
        .join("; ");
    Verdict::new(pass, detail)
}

// ------------------------------------------------------------ criterion 7

/// Central differences through `forward` only.
fn fd_gradient(m: &NarxModel, x: &[f64], h: f64) -> Vec<f64> {
    let base = m.params();
    let mut probe = m.clone();
    (0..base.len())
        .map(|i| {
            let mut p = base.clone();
            p[i] = base[i] + h;
            probe.set_params(&p).unwrap();
            let up = probe.forward(x).unwrap();
            p[i] = base[i] - h;
            probe.set_params(&p).unwrap();
            let down = probe.forward(x).unwrap();
            (up - down) / (2.0 * h)
        })
        .collect()
}

fn norm(v: impl Iterator<Item = f64>) -> f64 {
    v.map(|x| x * x).sum::<f64>().sqrt()
}

/// y(n) = 0.5·u1(n−1) + 0.2·y(n−1) + noise from the reset state.
fn linear_system(n_seq: usize, len: usize, sigma: f64, seed: u64) -> Vec<Sequence> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, sigma).unwrap();
    (0..n_seq)
        .map(|_| {
            let u1: Vec<f64> = (0..len).map(|_| rng.random_range(-1.0..1.0)).collect();
            let u2: Vec<f64> = (0..len).map(|_| f64::from(rng.random_range(0..3u8))).collect();
            let mut y = Vec::with_capacity(len);
            let (mut u_prev, mut y_prev) = (u1[0], 0.0);
            for n in 0..len {
                let v = 0.5 * u_prev + 0.2 * y_prev + noise.sample(&mut rng);
                y.push(v);
                u_prev = u1[n];
                y_prev = v;
            }
            Sequence { u1, u2, y, load: 0.0 }
        })
        .collect()
}

fn non_increasing_accepted(history: &[underlay_core::narx::EpochLog]) -> bool {
    let accepted: Vec<f64> = history.iter().filter(|e| e.accepted).map(|e| e.train_mse).collect();
    accepted.windows(2).all(|w| w[1] <= w[0])
}

fn narx_correctness(trained: &underlay_core::narx::TrainOutcome) -> Verdict {
    let cfg = NarxConfig { hidden_nodes: 5, ..NarxConfig::default() };
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst: f64 = 0.0;
    for k in 0..1000 {
        let mut m = init_model(&cfg, k).unwrap();
        let p: Vec<f64> = (0..m.param_count()).map(|_| rng.random_range(-1.0..1.0)).collect();
        m.set_params(&p).unwrap();
        let x: Vec<f64> = (0..m.regressor_len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut analytic = vec![0.0; m.param_count()];
        jacobian_row(&m, &x, &mut analytic).unwrap();
        let fd = fd_gradient(&m, &x, 1e-6);
        let err = norm(analytic.iter().zip(&fd).map(|(a, f)| a - f)) / norm(fd.iter().copied()).max(norm(analytic.iter().copied()));
        worst = worst.max(err);
    }
    let jac_ok = worst <= 1e-4;

    let sigma = 0.05;
    let data = TrainingSet::split(linear_system(60, 40, sigma, 1), 0.7, 0.15, 2).unwrap();
    let lcfg = NarxConfig { hidden_nodes: 4, d_u1: 2, d_u2: 2, d_y: 2, max_epochs: 100, ..NarxConfig::default() };
    let out = train_lm(&init_model(&lcfg, 3).unwrap(), &data, &lcfg).unwrap();
    let scale = out.model.normalization.y.scale;
    let val = out.best_val_mse * scale * scale;
    let floor = sigma * sigma;
    let lm_ok = val <= 2.0 * floor;
    let mono_ok = non_increasing_accepted(&out.history) && non_increasing_accepted(&trained.history);
    Verdict::new(
        jac_ok && lm_ok && mono_ok,
        format!(
            "worst Jacobian rel err {worst:.2e} over 1000 models; synthetic val MSE {val:.5} vs floor {floor:.5}; accepted train MSE non-increasing: {mono_ok}"
        ),
    )
}

// ------------------------------------------------------------ criterion 8

/// Primary SINRs with the secondary network silent, straight from the gains.
fn pn_sinr(p_dbm: &[f64], g: &ChannelGains, sigma2: f64) -> Vec<f64> {
    (0..p_dbm.len())
        .map(|i| {
            let interference: f64 = (0..p_dbm.len()).filter(|&j| j != i).map(|j| g.gpp[i][j] * db_to_lin(p_dbm[j])).sum();
            g.gpp[i][i] * db_to_lin(p_dbm[i]) / (sigma2 + interference)
        })
        .collect()
}

fn su_sinr(p_dbm: &[f64], pn_dbm: &[f64], g: &ChannelGains, sigma2: f64) -> Vec<f64> {
    (0..p_dbm.len())
        .map(|i| {
            let mut den = sigma2;
            den += (0..p_dbm.len()).filter(|&j| j != i).map(|j| g.gss[i][j] * db_to_lin(p_dbm[j])).sum::<f64>();
            den += (0..pn_dbm.len()).map(|j| g.gsp[i][j] * db_to_lin(pn_dbm[j])).sum::<f64>();
            g.gss[i][i] * db_to_lin(p_dbm[i]) / den
        })
        .collect()
}

fn power_control_optimality() -> Verdict {
    let pg = PlaygroundConfig::default();
    let sigma2 = pg.noise_mw();
    let [lo, hi] = pg.pn_power_range_dbm;
    let steps = ((hi - lo) / 0.1).round() as usize;
    let mut worst_ratio = f64::MAX;
    for seed in 0..50 {
        let s = generate_scenario(&pg, 2, 1000 + seed).unwrap();
        let g = gain_matrices(&s).unwrap();
        let fp = run_primary_power_control(&s, &g, sigma2).unwrap().state.pn_powers_dbm;
        let prod = |p: &[f64]| pn_sinr(p, &g, sigma2).iter().product::<f64>();
        let ours = prod(&fp);
        let mut best = f64::MIN;
        for a in 0..=steps {
            for b in 0..=steps {
                best = best.max(prod(&[lo + 0.1 * a as f64, lo + 0.1 * b as f64]));
            }
        }
        worst_ratio = worst_ratio.min(ours / best);
    }
    let product_ok = worst_ratio >= 0.99;

    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let [slo, shi] = pg.sn_power_range_dbm;
    let mut worst_iters = 0;
    let mut worst_gap: f64 = 0.0;
    for seed in 0..50 {
        let s = generate_scenario(&pg, 8, 2000 + seed).unwrap();
        let g = gain_matrices(&s).unwrap();
        let pn = run_primary_power_control(&s, &g, sigma2).unwrap().state.pn_powers_dbm;
        // targets reached exactly by an in-range power vector are feasible
        let witness: Vec<f64> = (0..g.n_s()).map(|_| rng.random_range(slo..shi - 5.0)).collect();
        let targets = su_sinr(&witness, &pn, &g, sigma2);
        let mut p = vec![slo; g.n_s()];
        let mut iters = 0;
        loop {
            let measured = su_sinr(&p, &pn, &g, sigma2);
            let gap = targets.iter().zip(&measured).map(|(t, m)| lin_to_db(t / m).abs()).fold(0.0, f64::max);
            if gap <= 0.1 || iters == 30 {
                worst_gap = worst_gap.max(gap);
                break;
            }
            for j in 0..p.len() {
                p[j] = fm_update(p[j], targets[j], measured[j], pg.sn_power_range_dbm).unwrap();
            }
            iters += 1;
        }
        worst_iters = worst_iters.max(iters);
    }
    let fm_ok = worst_gap <= 0.1 && worst_iters <= 30;
    Verdict::new(
        product_ok && fm_ok,
        format!(
            "worst fixed-point/grid product ratio {worst_ratio:.5}; FM worst gap {worst_gap:.3} dB after at most {worst_iters} iterations"
        ),
    )
}

// ------------------------------------------------------------ criterion 9

fn evaluate_determinism(model: &NarxModel) -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let model_path = dir.path().join("model.txt");
    save_model(&model_path, model).unwrap();
    let run = |out: &Path, jobs: &str| {
        Command::new(env!("CARGO_BIN_EXE_underlay"))
            .args(["evaluate", "--model", model_path.to_str().unwrap(), "--out", out.to_str().unwrap(), "--jobs", jobs])
            .status()
            .unwrap()
    };
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let threads = std::thread::available_parallelism().map_or(2, |n| n.get()).to_string();
    if !run(&a, &threads).success() || !run(&b, "3").success() {
        return Verdict::new(false, "evaluate exited with failure");
    }
    let mut pass = true;
    let mut detail = Vec::new();
    for csv in ["noise_sweep.csv", "monte_carlo.csv", "sn_cdf.csv", "cqi_hist.csv"] {
        let same = fs::read(a.join(csv)).unwrap() == fs::read(b.join(csv)).unwrap();
        pass &= same;
        detail.push(format!("{csv} {}", if same { "identical" } else { "DIFFERS" }));
    }
    Verdict::new(pass, detail.join(", "))
}

fn main() -> ExitCode {
    let t0 = Instant::now();
    let cfg = ExperimentConfig::default();
    let table: AmcTable = cfg.table().unwrap();
    let pool = runner::thread_pool(None).unwrap();

    let sweep = runner::noise_sweep(&pool, &cfg).unwrap();
    eprintln!("noise sweep done after {:.0?}", t0.elapsed());
    let data = generate_training_data(&cfg, cfg.master_seed).unwrap();
    let trained = pool.install(|| train_model(&cfg, &data, cfg.master_seed)).unwrap();
    eprintln!(
        "trained on {} samples, best epoch {} after {:.0?}",
        data.sample_count(),
        trained.best_epoch,
        t0.elapsed()
    );
    let (_, metrics) = runner::monte_carlo(&pool, &cfg, Some(&trained.model)).unwrap();
    eprintln!("monte carlo done after {:.0?}", t0.elapsed());
    let held_out = generate_held_out(&cfg, cfg.master_seed).unwrap();
    let hists = cqi_error_histogram(&trained.model, &table, &held_out, &cfg.loads).unwrap();

    let verdicts = [
        ("noise-sweep elbow", noise_sweep_elbow(&cfg, &sweep)),
        ("relative-change control", relative_change_control(&cfg, &metrics)),
        ("policy ordering", policy_ordering(&cfg, &metrics)),
        ("SN throughput monotone in delta", sn_monotone_in_delta(&cfg, &metrics)),
        ("transmission opportunities", transmission_opportunities(&cfg, &metrics)),
        ("CQI prediction", cqi_prediction(&hists)),
        ("NARX correctness", narx_correctness(&trained)),
        ("power-control optimality", power_control_optimality()),
        ("evaluate determinism", evaluate_determinism(&trained.model)),
    ];
    let mut failed = 0;
    for (i, (name, v)) in verdicts.iter().enumerate() {
        println!("criterion {} {:<32} {}  {}", i + 1, name, if v.pass { "PASS" } else { "FAIL" }, v.detail);
        failed += usize::from(!v.pass);
    }
    println!("acceptance: {} of {} criteria passed in {:.0?}", verdicts.len() - failed, verdicts.len(), t0.elapsed());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
