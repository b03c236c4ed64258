//! Synthetic tabular benchmarks.

use std::collections::BTreeSet;

use agentnas_core::environment::BRUTE_FORCE_LIMIT;
use agentnas_core::{JointAction, Topology};
use anyhow::{bail, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::tabular::{BenchmarkFile, EntryRecord};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Generator {
    /// Every mean drawn from `U[0, 1)`.
    RandomUniform,
    /// One joint action with mean `m`, every other at least `m + gap`.
    PlantedOptimum { gap: f64 },
}

#[derive(Debug, Clone)]
pub struct GenSettings {
    pub topology: Topology,
    pub generator: Generator,
    pub seed: u64,
    /// Entries to draw when the joint space is too large to list.
    pub samples: usize,
    /// Recorded as `loss_std` on every entry when set.
    pub loss_std: Option<f64>,
}

fn random_joint(topo: &Topology, rng: &mut ChaCha8Rng) -> JointAction {
    JointAction::new(
        (0..topo.num_agents())
            .map(|_| rng.random_range(0..topo.num_actions()))
            .collect(),
    )
}

/// Lists every joint action when there are at most 10^6 of them, otherwise
/// draws `samples` distinct ones. Same settings, same output.
pub fn generate(settings: &GenSettings) -> Result<BenchmarkFile> {
    let topo = settings.topology;
    if let Some(s) = settings.loss_std {
        if !(s.is_finite() && s >= 0.0) {
            bail!("loss std must be finite and non-negative, got {s}");
        }
    }
    let gap = match settings.generator {
        Generator::RandomUniform => None,
        Generator::PlantedOptimum { gap } => {
            if !(gap > 0.0 && gap < 1.0) {
                bail!("planted gap must lie in (0, 1), got {gap}");
            }
            Some(gap)
        }
    };
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    let planted = gap.map(|_| random_joint(&topo, &mut rng));

    let exhaustive = matches!(topo.joint_space_size(), Some(n) if n <= BRUTE_FORCE_LIMIT);
    let joints: Vec<JointAction> = if exhaustive {
        topo.joint_actions().collect()
    } else {
        if settings.samples == 0 {
            bail!("sampled generation needs at least one sample");
        }
        if settings.samples as u128 > BRUTE_FORCE_LIMIT {
            bail!(
                "{} samples exceeds the limit of {BRUTE_FORCE_LIMIT} entries",
                settings.samples
            );
        }
        let mut set = BTreeSet::new();
        if let Some(p) = &planted {
            set.insert(p.clone());
        }
        while set.len() < settings.samples {
            set.insert(random_joint(&topo, &mut rng));
        }
        set.into_iter().collect()
    };

    let optimum_mean = gap.map(|g| rng.random::<f64>() * (1.0 - g));
    let entries = joints
        .into_iter()
        .map(|joint| {
            let u: f64 = rng.random();
            let loss_mean = match (gap, optimum_mean, &planted) {
                (Some(_), Some(m), Some(p)) if *p == joint => m,
                (Some(g), Some(m), _) => m + g + u * (1.0 - g - m),
                _ => u,
            };
            EntryRecord {
                actions: joint.into_inner(),
                loss_mean,
                loss_std: settings.loss_std,
            }
        })
        .collect();
    let file = BenchmarkFile {
        num_agents: topo.num_agents(),
        num_actions: topo.num_actions(),
        entries,
        beta_schedule: None,
    };
    file.to_benchmark()?;
    Ok(file)
}
