//! Parallel repeats and the artifact set written by `agentnas run`.

use std::path::Path;

use agentnas_core::environment::Environment;
use agentnas_core::regret::ls_complexity_h;
use agentnas_core::runner::{repeat_seeds, run_single, ExperimentConfig, LossTrace, RepeatOutcome};
use anyhow::{Context, Result};
use rayon::prelude::*;
use serde::Serialize;

use crate::artifacts::{
    regret_rows, trace_rows, write_csv, write_json, ExperimentReport, FailureSummary, RunSummary,
};
use crate::config::LoadedConfig;

/// Runs seeds `seed..seed + repeats` on `threads` workers (0: all cores).
/// Results come back in seed order whatever the thread count.
pub fn run_repeats_parallel(cfg: &ExperimentConfig, threads: usize) -> Result<RepeatOutcome> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .context("cannot start worker threads")?;
    let seeds: Vec<u64> = repeat_seeds(cfg).collect();
    let results = pool.install(|| {
        seeds
            .par_iter()
            .map(|&seed| (seed, run_single(&cfg.with_seed(seed))))
            .collect()
    });
    Ok(RepeatOutcome::from_results(results))
}

fn complexity(cfg: &ExperimentConfig, seed: u64) -> Option<(f64, bool)> {
    let env = cfg.with_seed(seed).build_environment().ok()?;
    let Environment::Linear(lin) = env else {
        return None;
    };
    let totals = lin.cumulative_beta(cfg.horizon);
    ls_complexity_h(&totals, &cfg.topology)
        .ok()
        .map(|c| (c.h, c.degenerate))
}

pub fn build_report(cfg: &ExperimentConfig, outcome: &RepeatOutcome) -> ExperimentReport {
    ExperimentReport {
        algorithm: cfg.algorithm.name().to_string(),
        repeats: cfg.repeats,
        runs: outcome
            .completed
            .iter()
            .map(|r| RunSummary::new(r, complexity(cfg, r.seed)))
            .collect(),
        failures: outcome
            .failures
            .iter()
            .map(|(seed, f)| FailureSummary {
                seed: *seed,
                error: f.error.to_string(),
                completed_rounds: f.partial.rounds.len(),
            })
            .collect(),
        aggregate: outcome.aggregate.clone(),
        best_seed: outcome.best().map(|r| r.seed),
    }
}

#[derive(Serialize)]
struct SeededTrace<'a> {
    seed: u64,
    trace: &'a LossTrace,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct WriteOptions {
    /// Also write the full trace, with snapshots and refits, as JSON.
    pub trace_json: bool,
}

/// Writes `trace.csv`, `regret.csv`, `report.json` and
/// `resolved-config.json`, plus `partial-trace-<seed>.csv` per failed run.
pub fn write_run_artifacts(
    out_dir: &Path,
    loaded: &LoadedConfig,
    outcome: &RepeatOutcome,
    opts: WriteOptions,
) -> Result<ExperimentReport> {
    std::fs::create_dir_all(out_dir)
        .with_context(|| format!("cannot create output directory {}", out_dir.display()))?;
    write_json(&out_dir.join("resolved-config.json"), &loaded.resolved)?;
    write_csv(
        &out_dir.join("trace.csv"),
        outcome
            .completed
            .iter()
            .flat_map(|r| trace_rows(r.seed, &r.output.trace)),
    )?;
    write_csv(
        &out_dir.join("regret.csv"),
        outcome
            .completed
            .iter()
            .flat_map(|r| regret_rows(r.seed, &r.report)),
    )?;
    for (seed, failure) in &outcome.failures {
        write_csv(
            &out_dir.join(format!("partial-trace-{seed}.csv")),
            trace_rows(*seed, &failure.partial),
        )?;
    }
    if opts.trace_json {
        let traces: Vec<SeededTrace<'_>> = outcome
            .completed
            .iter()
            .map(|r| SeededTrace {
                seed: r.seed,
                trace: &r.output.trace,
            })
            .collect();
        write_json(&out_dir.join("trace.json"), &traces)?;
    }
    let report = build_report(&loaded.experiment, outcome);
    write_json(&out_dir.join("report.json"), &report)?;
    Ok(report)
}
