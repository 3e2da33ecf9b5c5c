use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use underlay_core::engine;
use underlay_core::experiments::{
    cqi_error_histogram, generate_held_out, generate_training_data, train_model, ExperimentConfig,
};
use underlay_core::narx::NarxModel;
use underlay_core::power_control::run_primary_power_control_traced;
use underlay_core::radio_env::gain_matrices;

use crate::config::load_config;
use crate::error::{Result, SimError};
use crate::formats::csv_out;
use crate::formats::model::{load_model, save_model};
use crate::formats::scenario::save_scenario;
use crate::manifest::RunManifest;
use crate::runner;

pub const NOISE_SWEEP_CSV: &str = "noise_sweep.csv";
pub const MONTE_CARLO_CSV: &str = "monte_carlo.csv";
pub const SN_CDF_CSV: &str = "sn_cdf.csv";
pub const CQI_HIST_CSV: &str = "cqi_hist.csv";
pub const DATASET_CSV: &str = "dataset.csv";
pub const MODEL_FILE: &str = "model.txt";
pub const TRAINING_LOG_CSV: &str = "training_log.csv";
pub const SCENARIO_FILE: &str = "scenario.txt";
pub const AMC_TABLE_CSV: &str = "amc_table.csv";
pub const PC_TRACE_CSV: &str = "pc_trace.csv";
pub const PROBE_RECORDS_CSV: &str = "probe_records.csv";

#[derive(Debug, Parser)]
#[command(name = "underlay", version, about = "Underlay spectrum-sharing simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// TOML configuration; defaults apply to missing keys.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Overrides `master_seed`.
    #[arg(long, value_name = "N")]
    pub seed: Option<u64>,
    #[arg(long, value_name = "DIR", default_value = "out")]
    pub out: PathBuf,
    /// Worker threads; defaults to the machine parallelism.
    #[arg(long, value_name = "N", value_parser = clap::value_parser!(u64).range(1..))]
    pub jobs: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// PN throughput against receiver noise power.
    NoiseSweep {
        #[command(flatten)]
        common: Common,
    },
    /// Probe-epoch training sequences with their split.
    GenData {
        #[command(flatten)]
        common: Common,
    },
    /// Trains the NARX predictor.
    Train {
        #[command(flatten)]
        common: Common,
        /// Dataset written by `gen-data`; generated afresh when omitted.
        #[arg(long, value_name = "PATH")]
        data: Option<PathBuf>,
    },
    /// Monte Carlo policy comparison and every metric table.
    Evaluate {
        #[command(flatten)]
        common: Common,
        /// Trained model; required when NN policies are configured.
        #[arg(long, value_name = "PATH")]
        model: Option<PathBuf>,
    },
    /// Dumps one Monte Carlo scenario with its power-control trace and
    /// probe records.
    Inspect {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0)]
        load_index: usize,
        #[arg(long, default_value_t = 0)]
        run: usize,
        #[arg(long, value_name = "PATH")]
        model: Option<PathBuf>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::NoiseSweep { .. } => "noise-sweep",
            Command::GenData { .. } => "gen-data",
            Command::Train { .. } => "train",
            Command::Evaluate { .. } => "evaluate",
            Command::Inspect { .. } => "inspect",
        }
    }

    fn common(&self) -> &Common {
        match self {
            Command::NoiseSweep { common }
            | Command::GenData { common }
            | Command::Train { common, .. }
            | Command::Evaluate { common, .. }
            | Command::Inspect { common, .. } => common,
        }
    }
}

/// Parses `args` (program name first), runs the command and maps the
/// outcome to 0 success, 1 usage or configuration error, 2 runtime failure.
pub fn run<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match execute(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn resolve_config(common: &Common) -> Result<ExperimentConfig> {
    let mut cfg = load_config(common.config.as_deref())?;
    if let Some(seed) = common.seed {
        cfg.master_seed = seed;
    }
    Ok(cfg)
}

/// Loads `path` when given; a missing model is a usage error only when
/// the configured policies need one.
fn resolve_model(cfg: &ExperimentConfig, path: Option<&Path>) -> Result<Option<NarxModel>> {
    match path {
        Some(p) => Ok(Some(load_model(p)?)),
        None if cfg.needs_model() => {
            Err(underlay_core::Error::MissingModel("NN policies are configured; pass --model").into())
        }
        None => Ok(None),
    }
}

struct Run {
    out: PathBuf,
    manifest: RunManifest,
}

impl Run {
    fn start(cmd: &Command, cfg: &ExperimentConfig) -> Result<Self> {
        let common = cmd.common();
        fs::create_dir_all(&common.out).map_err(|e| SimError::io(&common.out, e))?;
        let manifest = RunManifest::begin(cmd.name(), common.config.as_deref(), cfg, &common.out);
        manifest.write()?;
        Ok(Self { out: common.out.clone(), manifest })
    }

    fn path(&mut self, name: &str) -> PathBuf {
        self.manifest.outputs.push(name.to_string());
        self.out.join(name)
    }
}

fn execute(cmd: &Command) -> Result<()> {
    let common = cmd.common();
    let cfg = resolve_config(common)?;
    let pool = runner::thread_pool(common.jobs.map(|j| j as usize))?;
    // every input is checked before the output directory is touched
    let model = match cmd {
        Command::Evaluate { model, .. } => resolve_model(&cfg, model.as_deref())?,
        Command::Inspect { model, .. } => model.as_deref().map(load_model).transpose()?,
        _ => None,
    };
    if let Command::Inspect { load_index, .. } = cmd {
        if *load_index >= cfg.loads.len() {
            return Err(SimError::Config(format!("--load-index {load_index} exceeds the {} configured loads", cfg.loads.len())));
        }
    }
    let mut run = Run::start(cmd, &cfg)?;

    match cmd {
        Command::NoiseSweep { .. } => {
            let rows = runner::noise_sweep(&pool, &cfg)?;
            csv_out::write_noise_sweep(&run.path(NOISE_SWEEP_CSV), &rows)?;
        }
        Command::GenData { .. } => {
            let set = generate_training_data(&cfg, cfg.master_seed)?;
            csv_out::write_dataset(&run.path(DATASET_CSV), &set)?;
        }
        Command::Train { data, .. } => {
            let set = match data {
                Some(p) => csv_out::read_dataset(p)?,
                None => generate_training_data(&cfg, cfg.master_seed)?,
            };
            let outcome = pool.install(|| train_model(&cfg, &set, cfg.master_seed))?;
            save_model(&run.path(MODEL_FILE), &outcome.model)?;
            csv_out::write_training_log(&run.path(TRAINING_LOG_CSV), &outcome.history)?;
            run.manifest.best_epoch = Some(outcome.best_epoch);
            run.manifest.best_val_mse = Some(outcome.best_val_mse);
        }
        Command::Evaluate { .. } => {
            let (outcomes, metrics) = runner::monte_carlo(&pool, &cfg, model.as_ref())?;
            csv_out::write_monte_carlo(&run.path(MONTE_CARLO_CSV), &outcomes)?;
            csv_out::write_sn_cdf(&run.path(SN_CDF_CSV), &metrics)?;
            let rows = runner::noise_sweep(&pool, &cfg)?;
            csv_out::write_noise_sweep(&run.path(NOISE_SWEEP_CSV), &rows)?;
            let hists = match &model {
                Some(m) => {
                    let held_out = generate_held_out(&cfg, cfg.master_seed)?;
                    cqi_error_histogram(m, &cfg.table()?, &held_out, &cfg.loads)?
                }
                None => Vec::new(),
            };
            csv_out::write_cqi_hist(&run.path(CQI_HIST_CSV), &hists)?;
        }
        Command::Inspect { load_index, run: r, .. } => {
            let table = cfg.table()?;
            let scenario = cfg.monte_carlo_scenario(*load_index, *r)?;
            let gains = gain_matrices(&scenario)?;
            let sigma2 = scenario.config.noise_mw();
            let pc = run_primary_power_control_traced(&scenario, &gains, sigma2)?;
            let pn = &pc.state.pn_powers_dbm;
            let records = match &model {
                Some(m) => engine::run_engine_epoch(&gains, pn, sigma2, &table, m, &cfg.probe_powers_dbm)?.records,
                None => {
                    let base = engine::baseline_observations(&gains, pn, sigma2, &table)?;
                    let participating: Vec<bool> = base.iter().map(|(_, o)| o.is_some_and(|o| o.true_cqi > 1)).collect();
                    engine::execute_probe_epoch(&gains, pn, sigma2, &table, &cfg.probe_powers_dbm, &participating)?
                }
            };
            save_scenario(&run.path(SCENARIO_FILE), &scenario)?;
            csv_out::write_amc_table(&run.path(AMC_TABLE_CSV), &table)?;
            csv_out::write_power_trace(&run.path(PC_TRACE_CSV), &pc.trace)?;
            csv_out::write_probe_records(&run.path(PROBE_RECORDS_CSV), &records)?;
        }
    }
    run.manifest.finish()
}
