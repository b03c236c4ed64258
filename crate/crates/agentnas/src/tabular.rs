//! Benchmark files: a JSON container with a topology header, an optional
//! list of recorded losses and an optional linear beta schedule.
//!
//! ```json
//! {"num_agents": 2, "num_actions": 2,
//!  "entries": [{"actions": [0, 1], "loss_mean": 0.42, "loss_std": 0.01}]}
//! ```

use std::path::Path;

use agentnas_core::environment::{BetaSchedule, TabularBenchmark, TabularEntry};
use agentnas_core::{JointAction, Topology};
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum BenchmarkError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EntryRecord {
    pub actions: Vec<usize>,
    pub loss_mean: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loss_std: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkFile {
    pub num_agents: usize,
    pub num_actions: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub entries: Vec<EntryRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta_schedule: Option<BetaSchedule>,
}

impl BenchmarkFile {
    pub fn topology(&self) -> Option<Topology> {
        Topology::new(self.num_agents, self.num_actions).ok()
    }

    pub fn from_benchmark(bench: &TabularBenchmark) -> Self {
        let topo = bench.topology();
        BenchmarkFile {
            num_agents: topo.num_agents(),
            num_actions: topo.num_actions(),
            entries: bench
                .entries()
                .map(|(j, e)| EntryRecord {
                    actions: j.actions().to_vec(),
                    loss_mean: e.mean,
                    loss_std: e.std,
                })
                .collect(),
            beta_schedule: None,
        }
    }

    pub fn to_benchmark(&self) -> Result<TabularBenchmark, BenchmarkError> {
        let topo = Topology::new(self.num_agents, self.num_actions)
            .map_err(|e| BenchmarkError::Invalid(e.to_string()))?;
        TabularBenchmark::new(
            topo,
            self.entries.iter().map(|r| {
                (
                    JointAction::new(r.actions.clone()),
                    TabularEntry {
                        mean: r.loss_mean,
                        std: r.loss_std,
                    },
                )
            }),
        )
        .map_err(|e| BenchmarkError::Invalid(e.to_string()))
    }

    /// Pretty JSON with a trailing newline. Entries are written in the order
    /// held, so identical inputs give identical bytes.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("benchmark file serializes");
        s.push('\n');
        s
    }
}

pub fn load_container(path: &Path) -> Result<BenchmarkFile, BenchmarkError> {
    let text = std::fs::read_to_string(path).map_err(|source| BenchmarkError::Io {
        path: path.display().to_string(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|source| BenchmarkError::Json {
        path: path.display().to_string(),
        source,
    })
}

pub fn load_benchmark(path: &Path) -> Result<TabularBenchmark, BenchmarkError> {
    load_container(path)?.to_benchmark()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_spec_layout() {
        let text = r#"{"num_agents": 1, "num_actions": 3,
            "entries": [{"actions": [2], "loss_mean": 0.42}, {"actions": [0], "loss_mean": 0.5, "loss_std": 0.1}]}"#;
        let file: BenchmarkFile = serde_json::from_str(text).unwrap();
        let bench = file.to_benchmark().unwrap();
        assert_eq!(bench.len(), 2);
        assert_eq!(bench.get(&JointAction::new(vec![2])).unwrap().mean, 0.42);
        // written back sorted by joint action
        let back = BenchmarkFile::from_benchmark(&bench);
        assert_eq!(back.entries[0].actions, vec![0]);
        let reparsed: BenchmarkFile = serde_json::from_str(&back.to_json()).unwrap();
        assert_eq!(reparsed, back);
    }

    #[test]
    fn rejects_unknown_fields_and_bad_entries() {
        let unknown = r#"{"num_agents": 1, "num_actions": 2, "extra": 1, "entries": []}"#;
        assert!(serde_json::from_str::<BenchmarkFile>(unknown).is_err());
        let unknown_entry = r#"{"num_agents": 1, "num_actions": 2, "entries": [{"actions": [0], "loss_mean": 1, "hash": "x"}]}"#;
        assert!(serde_json::from_str::<BenchmarkFile>(unknown_entry).is_err());
        let out_of_range = r#"{"num_agents": 1, "num_actions": 2, "entries": [{"actions": [5], "loss_mean": 1}]}"#;
        let f: BenchmarkFile = serde_json::from_str(out_of_range).unwrap();
        assert!(f.to_benchmark().is_err());
    }

    #[test]
    fn beta_schedule_container() {
        let text = r#"{"num_agents": 1, "num_actions": 2,
            "beta_schedule": {"kind": "piecewise", "segments": [{"start": 1, "beta": [0, 1]}, {"start": 5, "beta": [1, 0]}]}}"#;
        let f: BenchmarkFile = serde_json::from_str(text).unwrap();
        assert!(matches!(f.beta_schedule, Some(BetaSchedule::Piecewise { .. })));
        assert!(f.to_benchmark().is_err());
    }
}
