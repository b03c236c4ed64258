//! On-disk artifacts: per-round trace and regret CSVs, JSON reports.
//!
//! Floats are written in shortest round-trip form, so reading a file back
//! gives bit-identical values.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use agentnas_core::regret::{AggregateReport, RegretReport};
use agentnas_core::runner::{CompletedRun, LossTrace, RefitRecord, RoundRecord};
use agentnas_core::JointAction;
use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub seed: u64,
    pub round: usize,
    /// JSON array of per-agent actions.
    pub actions: String,
    pub loss: f64,
    /// JSON array of the probability each agent gave its chosen action.
    pub chosen_probs: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretRow {
    pub seed: u64,
    pub round: usize,
    pub loss: f64,
    pub instantaneous_regret: f64,
    pub cumulative_regret: f64,
    pub bound: f64,
}

pub fn trace_rows(seed: u64, trace: &LossTrace) -> impl Iterator<Item = TraceRow> + '_ {
    trace.rounds.iter().enumerate().map(move |(i, r)| TraceRow {
        seed,
        round: i + 1,
        actions: serde_json::to_string(r.joint.actions()).expect("actions serialize"),
        loss: r.loss,
        chosen_probs: serde_json::to_string(&r.chosen_probs).expect("probs serialize"),
    })
}

pub fn regret_rows(seed: u64, report: &RegretReport) -> Vec<RegretRow> {
    let cumulative = report.cumulative_curve();
    (0..report.horizon)
        .map(|t| RegretRow {
            seed,
            round: t + 1,
            loss: report.losses[t],
            instantaneous_regret: report.per_round[t],
            cumulative_regret: cumulative[t],
            bound: report
                .theoretical_bound_curve
                .as_ref()
                .map_or(f64::NAN, |b| b[t]),
        })
        .collect()
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    let f = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    Ok(BufWriter::new(f))
}

pub fn write_csv<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    for row in rows {
        w.serialize(row)
            .with_context(|| format!("writing {}", path.display()))?;
    }
    w.flush().with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("cannot open {}", path.display()))?;
    r.deserialize()
        .collect::<std::result::Result<Vec<T>, _>>()
        .with_context(|| format!("parsing {}", path.display()))
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)
        .with_context(|| format!("writing {}", path.display()))?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

impl TraceRow {
    pub fn to_record(&self) -> Result<RoundRecord> {
        let actions: Vec<usize> = serde_json::from_str(&self.actions)
            .with_context(|| format!("round {}: bad actions {}", self.round, self.actions))?;
        let chosen_probs: Vec<f64> = serde_json::from_str(&self.chosen_probs)
            .with_context(|| format!("round {}: bad chosen_probs", self.round))?;
        Ok(RoundRecord {
            joint: JointAction::new(actions),
            loss: self.loss,
            chosen_probs,
        })
    }
}

/// Per-seed round records, in file order.
pub fn read_trace_csv(path: &Path) -> Result<Vec<(u64, Vec<RoundRecord>)>> {
    let rows: Vec<TraceRow> = read_csv(path)?;
    let mut out: Vec<(u64, Vec<RoundRecord>)> = Vec::new();
    for row in rows {
        let rec = row.to_record()?;
        match out.last_mut() {
            Some((seed, recs)) if *seed == row.seed => recs.push(rec),
            _ => out.push((row.seed, vec![rec])),
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunSummary {
    pub seed: u64,
    pub recommendation: JointAction,
    pub report: RegretReport,
    pub refits: Vec<RefitRecord>,
    /// `N * min gap` of the summed beta blocks; linear environments only.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub complexity_h: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub complexity_degenerate: Option<bool>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FailureSummary {
    pub seed: u64,
    pub error: String,
    pub completed_rounds: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub algorithm: String,
    pub repeats: usize,
    pub runs: Vec<RunSummary>,
    pub failures: Vec<FailureSummary>,
    pub aggregate: Option<AggregateReport>,
    /// Seed of the run with the lowest simple regret.
    pub best_seed: Option<u64>,
}

impl RunSummary {
    pub fn new(run: &CompletedRun, complexity: Option<(f64, bool)>) -> Self {
        RunSummary {
            seed: run.seed,
            recommendation: run.output.recommendation.clone(),
            report: run.report.clone(),
            refits: run.output.trace.refits.clone(),
            complexity_h: complexity.map(|c| c.0),
            complexity_degenerate: complexity.map(|c| c.1),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use agentnas_core::environment::{EnvironmentSpec, LinearEnvConfig};
    use agentnas_core::runner::{run_single, Algorithm, ExperimentConfig};
    use agentnas_core::Topology;

    fn sample_run() -> CompletedRun {
        let topo = Topology::new(2, 3).unwrap();
        let spec = EnvironmentSpec::Linear(LinearEnvConfig::stationary(
            vec![0.1, 0.7, 0.3, 0.2, 0.9, 0.4],
            0.05,
        ));
        let mut cfg = ExperimentConfig::new(topo, Algorithm::manas_default(&topo, 60).unwrap(), 60, spec);
        cfg.seed = 11;
        run_single(&cfg).unwrap()
    }

    #[test]
    fn regret_csv_round_trips_exactly() {
        let run = sample_run();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("regret.csv");
        write_csv(&p, regret_rows(run.seed, &run.report)).unwrap();
        let back: Vec<RegretRow> = read_csv(&p).unwrap();
        assert_eq!(back, regret_rows(run.seed, &run.report));
        let losses: Vec<f64> = back.iter().map(|r| r.loss).collect();
        let per_round: Vec<f64> = back.iter().map(|r| r.instantaneous_regret).collect();
        let bound: Vec<f64> = back.iter().map(|r| r.bound).collect();
        assert_eq!(losses, run.report.losses);
        assert_eq!(per_round, run.report.per_round);
        assert_eq!(Some(bound), run.report.theoretical_bound_curve);
        assert_eq!(
            back.iter().map(|r| r.cumulative_regret).collect::<Vec<_>>(),
            run.report.cumulative_curve()
        );
    }

    #[test]
    fn trace_csv_round_trips_exactly() {
        let run = sample_run();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("trace.csv");
        write_csv(&p, trace_rows(run.seed, &run.output.trace)).unwrap();
        let back = read_trace_csv(&p).unwrap();
        assert_eq!(back.len(), 1);
        assert_eq!(back[0].0, 11);
        assert_eq!(back[0].1, run.output.trace.rounds);
    }
}
