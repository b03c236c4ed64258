//! Regret curves on the Gaussian squeeze domain for external plotting.

use std::path::Path;

use agentnas_core::environment::{EnvironmentSpec, GsdConfig};
use agentnas_core::regret::{exp3_bound_curve, AggregateReport};
use agentnas_core::runner::{Algorithm, ExperimentConfig, LsSettings, RepeatOutcome};
use agentnas_core::Topology;
use anyhow::{anyhow, Result};
use serde::Serialize;

use crate::artifacts::{write_csv, write_json};
use crate::config::{DEFAULT_MU, DEFAULT_SIGMA};
use crate::experiment::run_repeats_parallel;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AlgorithmKind {
    Manas,
    ManasLs,
    RandomSearch,
}

impl AlgorithmKind {
    pub const ALL: [AlgorithmKind; 3] = [
        AlgorithmKind::Manas,
        AlgorithmKind::ManasLs,
        AlgorithmKind::RandomSearch,
    ];

    pub fn file_name(self) -> &'static str {
        match self {
            AlgorithmKind::Manas => "manas.csv",
            AlgorithmKind::ManasLs => "manas_ls.csv",
            AlgorithmKind::RandomSearch => "random.csv",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "manas" => Some(AlgorithmKind::Manas),
            "manas_ls" | "manas-ls" => Some(AlgorithmKind::ManasLs),
            "random_search" | "random-search" | "random" => Some(AlgorithmKind::RandomSearch),
            _ => None,
        }
    }

    pub fn algorithm(self, topo: &Topology, horizon: usize) -> Result<Algorithm> {
        Ok(match self {
            AlgorithmKind::Manas => Algorithm::manas_default(topo, horizon)?,
            AlgorithmKind::ManasLs => Algorithm::ManasLs(LsSettings::defaults(topo)),
            AlgorithmKind::RandomSearch => Algorithm::RandomSearch,
        })
    }
}

#[derive(Debug, Clone)]
pub struct GsdSettings {
    pub num_agents: usize,
    pub num_actions: usize,
    pub mu: f64,
    pub sigma: f64,
    pub horizon: usize,
    pub repeats: usize,
    pub seed: u64,
    pub algorithms: Vec<AlgorithmKind>,
    pub threads: usize,
}

impl Default for GsdSettings {
    fn default() -> Self {
        GsdSettings {
            num_agents: 100,
            num_actions: 10,
            mu: DEFAULT_MU,
            sigma: DEFAULT_SIGMA,
            horizon: 5000,
            repeats: 8,
            seed: 0,
            algorithms: AlgorithmKind::ALL.to_vec(),
            threads: 0,
        }
    }
}

impl GsdSettings {
    pub fn topology(&self) -> Result<Topology> {
        Ok(Topology::new(self.num_agents, self.num_actions)?)
    }

    pub fn experiment(&self, kind: AlgorithmKind) -> Result<ExperimentConfig> {
        let topo = self.topology()?;
        let mut cfg = ExperimentConfig::new(
            topo,
            kind.algorithm(&topo, self.horizon)?,
            self.horizon,
            EnvironmentSpec::Gsd(GsdConfig::new(self.mu, self.sigma)),
        );
        cfg.seed = self.seed;
        cfg.repeats = self.repeats;
        cfg.validate()?;
        cfg.build_environment()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CurveRow {
    pub round: usize,
    pub mean_regret: f64,
    pub std_regret: f64,
    pub mean_cumulative_regret: f64,
    pub std_cumulative_regret: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundRow {
    pub round: usize,
    pub bound: f64,
}

pub fn curve_rows(agg: &AggregateReport) -> Vec<CurveRow> {
    (0..agg.mean_per_round.len())
        .map(|t| CurveRow {
            round: t + 1,
            mean_regret: agg.mean_per_round[t],
            std_regret: agg.std_per_round[t],
            mean_cumulative_regret: agg.mean_cumulative[t],
            std_cumulative_regret: agg.std_cumulative[t],
        })
        .collect()
}

/// Mean per-round regret over the last `fraction` of rounds.
pub fn tail_mean(per_round: &[f64], fraction: f64) -> f64 {
    let n = per_round.len();
    let k = ((n as f64 * fraction).ceil() as usize).clamp(1, n.max(1));
    per_round[n - k..].iter().sum::<f64>() / k as f64
}

#[derive(Debug, Clone, Serialize)]
pub struct AlgorithmSummary {
    pub algorithm: String,
    pub completed_runs: usize,
    pub failed_runs: usize,
    pub final_tenth_mean_regret: f64,
    pub mean_cumulative_regret: f64,
    pub mean_simple_regret: f64,
}

pub struct GsdFigures {
    pub outcomes: Vec<(AlgorithmKind, RepeatOutcome)>,
    pub bound: Vec<f64>,
}

pub fn run_gsd(settings: &GsdSettings, mut progress: impl FnMut(AlgorithmKind)) -> Result<GsdFigures> {
    let topo = settings.topology()?;
    let mut outcomes = Vec::new();
    for &kind in &settings.algorithms {
        let cfg = settings.experiment(kind)?;
        progress(kind);
        outcomes.push((kind, run_repeats_parallel(&cfg, settings.threads)?));
    }
    Ok(GsdFigures {
        outcomes,
        bound: exp3_bound_curve(&topo, settings.horizon),
    })
}

/// Writes one CSV per algorithm, `bound.csv` and `summary.json`. Fails if
/// some algorithm completed no runs.
pub fn write_gsd(out_dir: &Path, figs: &GsdFigures) -> Result<Vec<AlgorithmSummary>> {
    std::fs::create_dir_all(out_dir)?;
    write_csv(
        &out_dir.join("bound.csv"),
        figs.bound.iter().enumerate().map(|(t, &b)| BoundRow { round: t + 1, bound: b }),
    )?;
    let mut summaries = Vec::new();
    for (kind, outcome) in &figs.outcomes {
        let agg = outcome.aggregate.as_ref().ok_or_else(|| {
            let why = outcome
                .failures
                .first()
                .map(|(_, f)| f.to_string())
                .unwrap_or_default();
            anyhow!("every {} run failed: {why}", kind.file_name())
        })?;
        write_csv(&out_dir.join(kind.file_name()), curve_rows(agg))?;
        summaries.push(AlgorithmSummary {
            algorithm: kind.file_name().trim_end_matches(".csv").to_string(),
            completed_runs: outcome.completed.len(),
            failed_runs: outcome.failures.len(),
            final_tenth_mean_regret: tail_mean(&agg.mean_per_round, 0.1),
            mean_cumulative_regret: agg.mean_cumulative_regret,
            mean_simple_regret: agg.mean_simple_regret,
        });
    }
    write_json(&out_dir.join("summary.json"), &summaries)?;
    Ok(summaries)
}
