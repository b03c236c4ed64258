//! The round loop: every agent samples, the oracle is queried once for the
//! joint action, credit is assigned, and after `T` rounds a joint action is
//! recommended.
//!
//! Randomness comes from a single ChaCha8 stream seeded with the run seed.
//! Draw order inside a round is fixed: one `f64` per agent in index order,
//! then whatever noise the oracle draws. A `sample`-mode recommendation
//! draws one more `f64` per agent after the last round.

use alloc::boxed::Box;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::environment::{Environment, EnvironmentSpec, LossOracle};
use crate::policy::{
    ls_batch_solve, manas_defaults, recommend, softmax_distribution, zipf_distribution,
    AgentScores, LsBatch, ManasHyperparams, RecommendMode, SamplingDistribution,
};
use crate::regret::{aggregate, build_report, AggregateReport, RegretReport};
use crate::topology::{JointAction, Topology};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "mode", rename_all = "snake_case"))]
pub enum LsWindow {
    /// Keep only the last `size` evaluated architectures.
    Sliding { size: usize },
    /// Keep every evaluated architecture.
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LsSettings {
    /// Rounds between least-squares refits.
    pub solve_period: usize,
    /// Samples required in the batch before any refit.
    pub min_samples: usize,
    pub window: LsWindow,
}

impl LsSettings {
    /// Refit every `K N` rounds once `K N` samples exist, over a sliding
    /// window of the last `4 K N`.
    pub fn defaults(topo: &Topology) -> Self {
        let kn = topo.dim();
        LsSettings {
            solve_period: kn,
            min_samples: kn,
            window: LsWindow::Sliding { size: 4 * kn },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.solve_period == 0 {
            return Err(Error::Config("manas_ls.solve_period must be at least 1".into()));
        }
        if self.min_samples == 0 {
            return Err(Error::Config("manas_ls.min_samples must be at least 1".into()));
        }
        if let LsWindow::Sliding { size } = self.window {
            if size < self.min_samples {
                return Err(Error::Config(format!(
                    "manas_ls window size {size} is smaller than min_samples {}",
                    self.min_samples
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "name", rename_all = "snake_case"))]
pub enum Algorithm {
    Manas(ManasHyperparams),
    ManasLs(LsSettings),
    RandomSearch,
}

impl Algorithm {
    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::Manas(_) => "manas",
            Algorithm::ManasLs(_) => "manas_ls",
            Algorithm::RandomSearch => "random_search",
        }
    }

    /// MANAS with hyperparameters derived from the horizon.
    pub fn manas_default(topo: &Topology, horizon: usize) -> Result<Self> {
        Ok(Algorithm::Manas(manas_defaults(topo, horizon)?))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub topology: Topology,
    pub algorithm: Algorithm,
    pub horizon: usize,
    pub environment: EnvironmentSpec,
    pub seed: u64,
    pub repeats: usize,
    pub recommend: RecommendMode,
    /// Record policy snapshots at rounds `1, 1 + s, 1 + 2s, ...`; 0 disables.
    pub snapshot_interval: usize,
    /// Abort when a loss leaves `[0, 1]`.
    pub require_unit_losses: bool,
}

impl ExperimentConfig {
    pub fn new(topology: Topology, algorithm: Algorithm, horizon: usize, environment: EnvironmentSpec) -> Self {
        ExperimentConfig {
            topology,
            algorithm,
            horizon,
            environment,
            seed: 0,
            repeats: 1,
            recommend: RecommendMode::Argmin,
            snapshot_interval: 0,
            require_unit_losses: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::Config("horizon must be at least 1".into()));
        }
        if self.repeats == 0 {
            return Err(Error::Config("repeats must be at least 1".into()));
        }
        match &self.algorithm {
            Algorithm::Manas(hp) => hp.validate(),
            Algorithm::ManasLs(ls) => ls.validate(),
            Algorithm::RandomSearch => Ok(()),
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        ExperimentConfig {
            seed,
            ..self.clone()
        }
    }

    pub fn build_environment(&self) -> Result<Environment> {
        Environment::build(&self.environment, self.topology, self.horizon, self.seed)
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RoundRecord {
    pub joint: JointAction,
    pub loss: f64,
    /// `pi_t^i[a_t^i]` for every agent, exactly as used to sample.
    pub chosen_probs: Vec<f64>,
}

/// Agent state at the start of a round, before sampling.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PolicySnapshot {
    pub round: usize,
    pub scores: Vec<AgentScores>,
    pub distributions: Vec<SamplingDistribution>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RefitRecord {
    /// Round after which the refit happened.
    pub round: usize,
    pub samples: usize,
    pub max_abs_residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LossTrace {
    pub topology: Topology,
    pub horizon: usize,
    pub rounds: Vec<RoundRecord>,
    pub snapshots: Vec<PolicySnapshot>,
    pub refits: Vec<RefitRecord>,
}

impl LossTrace {
    pub fn new(topology: Topology, horizon: usize) -> Self {
        LossTrace {
            topology,
            horizon,
            rounds: Vec::with_capacity(horizon),
            snapshots: Vec::new(),
            refits: Vec::new(),
        }
    }

    pub fn losses(&self) -> impl Iterator<Item = f64> + '_ {
        self.rounds.iter().map(|r| r.loss)
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub trace: LossTrace,
    pub recommendation: JointAction,
    pub final_scores: Vec<AgentScores>,
}

/// A run that stopped early; `partial` holds every completed round.
#[derive(Debug, Clone)]
pub struct RunFailure {
    pub error: Error,
    pub partial: Box<LossTrace>,
}

impl fmt::Display for RunFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "run aborted after {} of {} rounds: {}",
            self.partial.rounds.len(),
            self.partial.horizon,
            self.error
        )
    }
}

#[cfg(feature = "std")]
impl std::error::Error for RunFailure {}

pub type RunResult = core::result::Result<RunOutput, RunFailure>;

fn fail(error: Error, partial: LossTrace) -> RunFailure {
    RunFailure {
        error,
        partial: Box::new(partial),
    }
}

// Shared per-round mechanics.
struct Loop<'a, E: LossOracle + ?Sized> {
    cfg: &'a ExperimentConfig,
    env: &'a E,
    rng: ChaCha8Rng,
    trace: LossTrace,
}

impl<'a, E: LossOracle + ?Sized> Loop<'a, E> {
    fn start(cfg: &'a ExperimentConfig, env: &'a E) -> core::result::Result<Self, RunFailure> {
        let trace = LossTrace::new(cfg.topology, cfg.horizon);
        if let Err(e) = cfg.validate() {
            return Err(fail(e, trace));
        }
        if env.topology() != cfg.topology {
            return Err(fail(
                Error::Topology(format!(
                    "environment topology {:?} does not match configured {:?}",
                    env.topology(),
                    cfg.topology
                )),
                trace,
            ));
        }
        Ok(Loop {
            cfg,
            env,
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
            trace,
        })
    }

    fn wants_snapshot(&self, round: usize) -> bool {
        let s = self.cfg.snapshot_interval;
        s > 0 && (round - 1).is_multiple_of(s)
    }

    /// Samples every agent, queries the oracle once, records the round.
    fn play(
        &mut self,
        round: usize,
        scores: &[AgentScores],
        dists: &[SamplingDistribution],
    ) -> core::result::Result<(JointAction, f64, Vec<f64>), RunFailure> {
        if self.wants_snapshot(round) {
            self.trace.snapshots.push(PolicySnapshot {
                round,
                scores: scores.to_vec(),
                distributions: dists.to_vec(),
            });
        }
        let mut actions = Vec::with_capacity(dists.len());
        let mut probs = Vec::with_capacity(dists.len());
        for dist in dists {
            let a = dist.sample(&mut self.rng);
            actions.push(a);
            probs.push(dist.probs()[a]);
        }
        let joint = JointAction::new(actions);
        let loss = match self.env.evaluate(&joint, round, &mut self.rng as &mut dyn RngCore) {
            Ok(l) => l,
            Err(e) => return Err(fail(e, self.trace.clone())),
        };
        if !loss.is_finite() {
            return Err(fail(
                Error::Input(format!("oracle returned non-finite loss {loss} at round {round}")),
                self.trace.clone(),
            ));
        }
        if self.cfg.require_unit_losses && !(0.0..=1.0).contains(&loss) {
            return Err(fail(Error::LossOutOfRange { round, loss }, self.trace.clone()));
        }
        self.trace.rounds.push(RoundRecord {
            joint: joint.clone(),
            loss,
            chosen_probs: probs.clone(),
        });
        Ok((joint, loss, probs))
    }

    fn recommend(&mut self, scores: &[AgentScores], dists: &[SamplingDistribution]) -> JointAction {
        let mode = self.cfg.recommend;
        JointAction::new(
            scores
                .iter()
                .zip(dists)
                .map(|(s, d)| recommend(s, mode, d, &mut self.rng))
                .collect(),
        )
    }

    fn finish(self, recommendation: JointAction, final_scores: Vec<AgentScores>) -> RunOutput {
        RunOutput {
            trace: self.trace,
            recommendation,
            final_scores,
        }
    }
}

/// EXP3 per agent on the shared loss, softmax sampling.
pub fn run_manas<E: LossOracle + ?Sized>(cfg: &ExperimentConfig, env: &E) -> RunResult {
    let Algorithm::Manas(hp) = cfg.algorithm else {
        return Err(fail(
            Error::Config(format!("run_manas called with algorithm {}", cfg.algorithm.name())),
            LossTrace::new(cfg.topology, cfg.horizon),
        ));
    };
    let mut lp = Loop::start(cfg, env)?;
    let n = cfg.topology.num_agents();
    let k = cfg.topology.num_actions();
    let mut scores = vec![AgentScores::zeros(k); n];
    let mut dists: Vec<SamplingDistribution> =
        scores.iter().map(|s| softmax_distribution(s, &hp)).collect();

    for round in 1..=cfg.horizon {
        let (joint, loss, probs) = lp.play(round, &scores, &dists)?;
        for ((s, &a), &p) in scores.iter_mut().zip(joint.actions()).zip(&probs) {
            if let Err(e) = s.apply_exp3(a, loss, p) {
                return Err(fail(e, lp.trace));
            }
        }
        for (d, s) in dists.iter_mut().zip(&scores) {
            *d = softmax_distribution(s, &hp);
        }
    }
    let rec = lp.recommend(&scores, &dists);
    Ok(lp.finish(rec, scores))
}

/// Periodic least-squares refits, Zipf sampling over fitted ranks.
///
/// Until the first refit every agent samples uniformly. After the horizon
/// a last refit folds in any samples gathered since the previous one.
pub fn run_manas_ls<E: LossOracle + ?Sized>(cfg: &ExperimentConfig, env: &E) -> RunResult {
    let Algorithm::ManasLs(ls) = cfg.algorithm else {
        return Err(fail(
            Error::Config(format!("run_manas_ls called with algorithm {}", cfg.algorithm.name())),
            LossTrace::new(cfg.topology, cfg.horizon),
        ));
    };
    let mut lp = Loop::start(cfg, env)?;
    let topo = cfg.topology;
    let n = topo.num_agents();
    let k = topo.num_actions();
    let mut batch = match ls.window {
        LsWindow::Sliding { size } => LsBatch::sliding(topo, size),
        LsWindow::Full => LsBatch::new(topo),
    };
    let mut scores = vec![AgentScores::zeros(k); n];
    let mut dists = vec![SamplingDistribution::uniform(k); n];
    let mut since_refit = 0usize;

    let refit = |lp: &mut Loop<'_, E>,
                 batch: &LsBatch,
                 scores: &mut Vec<AgentScores>,
                 dists: &mut Vec<SamplingDistribution>,
                 round: usize|
     -> Result<()> {
        let beta = ls_batch_solve(batch)?;
        lp.trace.refits.push(RefitRecord {
            round,
            samples: batch.len(),
            max_abs_residual: batch.max_abs_residual(&beta),
        });
        for (i, block) in beta.chunks_exact(k).enumerate() {
            scores[i] = AgentScores::new(block.to_vec())?;
            dists[i] = zipf_distribution(&scores[i]);
        }
        Ok(())
    };

    for round in 1..=cfg.horizon {
        let (joint, loss, _) = lp.play(round, &scores, &dists)?;
        if let Err(e) = batch.push_joint(joint, loss) {
            return Err(fail(e, lp.trace));
        }
        since_refit += 1;
        if since_refit >= ls.solve_period && batch.len() >= ls.min_samples {
            if let Err(e) = refit(&mut lp, &batch, &mut scores, &mut dists, round) {
                return Err(fail(e, lp.trace));
            }
            since_refit = 0;
        }
    }
    if since_refit > 0 && batch.len() >= ls.min_samples {
        if let Err(e) = refit(&mut lp, &batch, &mut scores, &mut dists, cfg.horizon) {
            return Err(fail(e, lp.trace));
        }
    }
    let rec = lp.recommend(&scores, &dists);
    Ok(lp.finish(rec, scores))
}

/// Uniform sampling throughout; recommends the best joint action observed
/// (earliest round on ties).
pub fn run_random_search<E: LossOracle + ?Sized>(cfg: &ExperimentConfig, env: &E) -> RunResult {
    if cfg.algorithm != Algorithm::RandomSearch {
        return Err(fail(
            Error::Config(format!(
                "run_random_search called with algorithm {}",
                cfg.algorithm.name()
            )),
            LossTrace::new(cfg.topology, cfg.horizon),
        ));
    }
    let mut lp = Loop::start(cfg, env)?;
    let n = cfg.topology.num_agents();
    let k = cfg.topology.num_actions();
    let scores = vec![AgentScores::zeros(k); n];
    let dists = vec![SamplingDistribution::uniform(k); n];
    let mut best: Option<(JointAction, f64)> = None;
    for round in 1..=cfg.horizon {
        let (joint, loss, _) = lp.play(round, &scores, &dists)?;
        if best.as_ref().is_none_or(|(_, b)| loss < *b) {
            best = Some((joint, loss));
        }
    }
    let (rec, _) = best.expect("horizon is at least 1");
    Ok(lp.finish(rec, scores))
}

/// Dispatches on `cfg.algorithm` against a caller-supplied oracle.
pub fn run_with_env<E: LossOracle + ?Sized>(cfg: &ExperimentConfig, env: &E) -> RunResult {
    match cfg.algorithm {
        Algorithm::Manas(_) => run_manas(cfg, env),
        Algorithm::ManasLs(_) => run_manas_ls(cfg, env),
        Algorithm::RandomSearch => run_random_search(cfg, env),
    }
}

/// A finished run with its regret report.
#[derive(Debug, Clone)]
pub struct CompletedRun {
    pub seed: u64,
    pub output: RunOutput,
    pub report: RegretReport,
}

/// Builds the configured environment for `cfg.seed`, runs, and reports.
pub fn run_single(cfg: &ExperimentConfig) -> core::result::Result<CompletedRun, RunFailure> {
    let env = cfg
        .build_environment()
        .map_err(|e| fail(e, LossTrace::new(cfg.topology, cfg.horizon)))?;
    let output = run_with_env(cfg, &env)?;
    let report = build_report(&output.trace, &env, &output.recommendation)
        .map_err(|e| fail(e, output.trace.clone()))?;
    Ok(CompletedRun {
        seed: cfg.seed,
        output,
        report,
    })
}

/// Seeds `seed, seed + 1, ..., seed + R - 1`.
pub fn repeat_seeds(cfg: &ExperimentConfig) -> impl Iterator<Item = u64> {
    let base = cfg.seed;
    (0..cfg.repeats as u64).map(move |r| base.wrapping_add(r))
}

#[derive(Debug, Clone)]
pub struct RepeatOutcome {
    pub completed: Vec<CompletedRun>,
    pub failures: Vec<(u64, RunFailure)>,
    /// `None` when every run failed.
    pub aggregate: Option<AggregateReport>,
}

impl RepeatOutcome {
    pub fn from_results(results: Vec<(u64, core::result::Result<CompletedRun, RunFailure>)>) -> Self {
        let mut completed = Vec::new();
        let mut failures = Vec::new();
        for (seed, r) in results {
            match r {
                Ok(run) => completed.push(run),
                Err(f) => failures.push((seed, f)),
            }
        }
        let reports: Vec<RegretReport> = completed.iter().map(|c| c.report.clone()).collect();
        let aggregate = aggregate(&reports).ok();
        RepeatOutcome {
            completed,
            failures,
            aggregate,
        }
    }

    pub fn best(&self) -> Option<&CompletedRun> {
        self.aggregate.as_ref().map(|a| &self.completed[a.best_run])
    }
}

/// Runs every repeat in sequence and aggregates the completed ones.
pub fn run_repeats(cfg: &ExperimentConfig) -> RepeatOutcome {
    let results = repeat_seeds(cfg)
        .map(|seed| (seed, run_single(&cfg.with_seed(seed))))
        .collect();
    RepeatOutcome::from_results(results)
}
