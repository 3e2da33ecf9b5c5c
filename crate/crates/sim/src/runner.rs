//! Parallel drivers over independent `(load, run)` cells. Results are sorted
//! before aggregation, so the output never depends on the thread count.

use rayon::prelude::*;
use rayon::ThreadPool;

use underlay_core::experiments::{
    aggregate_monte_carlo, aggregate_noise_sweep, monte_carlo_cell, noise_sweep_run, sort_outcomes, ExperimentConfig,
    MetricsRecord, NoiseCell, NoiseSweepRow, PolicyOutcome,
};
use underlay_core::narx::NarxModel;

use crate::error::{Result, SimError};

/// `jobs = None` uses the machine parallelism.
pub fn thread_pool(jobs: Option<usize>) -> Result<ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .map_err(|e| SimError::Config(format!("thread pool: {e}")))
}

fn cells(cfg: &ExperimentConfig) -> Vec<(usize, usize)> {
    (0..cfg.loads.len()).flat_map(|li| (0..cfg.runs).map(move |run| (li, run))).collect()
}

pub fn noise_sweep(pool: &ThreadPool, cfg: &ExperimentConfig) -> Result<Vec<NoiseSweepRow>> {
    let table = cfg.table()?;
    let cells: Vec<NoiseCell> = pool.install(|| {
        cells(cfg)
            .into_par_iter()
            .map(|(li, run)| Ok(NoiseCell { load_index: li, run, pn_kbps: noise_sweep_run(cfg, &table, li, run)? }))
            .collect::<Result<Vec<_>>>()
    })?;
    Ok(aggregate_noise_sweep(cfg, &cells)?)
}

pub fn monte_carlo(
    pool: &ThreadPool,
    cfg: &ExperimentConfig,
    model: Option<&NarxModel>,
) -> Result<(Vec<PolicyOutcome>, Vec<MetricsRecord>)> {
    let table = cfg.table()?;
    let nested: Vec<Vec<PolicyOutcome>> = pool.install(|| {
        cells(cfg)
            .into_par_iter()
            .map(|(li, run)| Ok(monte_carlo_cell(cfg, &table, model, li, run)?))
            .collect::<Result<Vec<_>>>()
    })?;
    let mut outcomes: Vec<PolicyOutcome> = nested.into_iter().flatten().collect();
    sort_outcomes(cfg, &mut outcomes);
    let metrics = aggregate_monte_carlo(cfg, &outcomes);
    Ok((outcomes, metrics))
}
