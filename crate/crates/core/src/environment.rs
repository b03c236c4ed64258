//! Loss oracles the agents play against.
//!
//! - Gaussian Squeeze Domain: agents' contributions add up to `x` and the
//!   team is scored by `G(x) = x exp(-(x - mu)^2 / sigma^2)`. The loss is
//!   `1 - G(x) / G(x*)`, with `x*` the best achievable sum, so it lies in
//!   `[0, 1]` and is exactly 0 at the optimum.
//! - Linear adversary: `L_t = beta_t^T z_t + noise`, `beta_t` stationary,
//!   piecewise constant or a Gaussian random walk.
//! - Tabular benchmark: a lookup table of per-architecture loss statistics.
//!
//! Stochastic oracles draw from the caller's random source, so a run's
//! determinism is controlled entirely by the runner's seed.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::topology::{encode, ArchitectureVector, JointAction, Topology};
use crate::{Error, Result};

/// Largest joint-action space enumerated exhaustively.
pub const BRUTE_FORCE_LIMIT: u128 = 1_000_000;

/// Largest span of integer sums handled by the GSD sum-set recursion.
const MAX_SUM_SPAN: u128 = 50_000_000;

/// Stream selector mixed into the seed of a random-walk beta schedule.
pub const RANDOM_WALK_STREAM: u64 = 0x005E_ED0F_BE7A_0001;

pub trait LossOracle {
    fn topology(&self) -> Topology;

    /// Observed loss of `joint` at 1-based `round`. Noise, if any, is drawn
    /// from `rng`; noise-free oracles never touch it.
    fn evaluate(&self, joint: &JointAction, round: usize, rng: &mut dyn RngCore) -> Result<f64>;

    /// Noise-free loss of `joint` at `round`, used to replay a recommendation.
    fn expected_loss(&self, joint: &JointAction, round: usize) -> Result<f64>;

    fn is_stochastic(&self) -> bool;

    /// Whether `expected_loss` ignores the round.
    fn is_time_invariant(&self) -> bool;

    /// Exact `argmin_a sum_{t=1..T} E[L_t(a)]` with lowest-lexicographic ties.
    fn best_in_hindsight(&self, horizon: usize) -> Result<(JointAction, f64)> {
        best_in_hindsight_bruteforce(self, horizon)
    }

    /// `beta_t` for linear oracles.
    fn beta_at(&self, _round: usize) -> Option<&[f64]> {
        None
    }
}

/// Exhaustive scan over all `K^N` joint actions.
pub fn best_in_hindsight_bruteforce<E: LossOracle + ?Sized>(
    env: &E,
    horizon: usize,
) -> Result<(JointAction, f64)> {
    let topo = env.topology();
    match topo.joint_space_size() {
        Some(size) if size <= BRUTE_FORCE_LIMIT => {}
        size => {
            return Err(Error::SpaceTooLarge {
                size,
                limit: BRUTE_FORCE_LIMIT,
            })
        }
    }
    let mut best: Option<(JointAction, f64)> = None;
    for joint in topo.joint_actions() {
        let total = if env.is_time_invariant() {
            env.expected_loss(&joint, 1)? * horizon as f64
        } else {
            let mut acc = 0.0;
            for t in 1..=horizon {
                acc += env.expected_loss(&joint, t)?;
            }
            acc
        };
        if best.as_ref().is_none_or(|(_, v)| total < *v) {
            best = Some((joint, total));
        }
    }
    Ok(best.expect("a topology has at least one joint action"))
}

// ---------------------------------------------------------------------------
// Gaussian Squeeze Domain

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct GsdConfig {
    pub mu: f64,
    pub sigma: f64,
    /// Value added to `x` by each action; `None` means action `k` adds `k`.
    #[cfg_attr(feature = "serde", serde(default))]
    pub contributions: Option<Vec<f64>>,
}

impl GsdConfig {
    pub fn new(mu: f64, sigma: f64) -> Self {
        GsdConfig {
            mu,
            sigma,
            contributions: None,
        }
    }

    pub fn contribution_table(&self, num_actions: usize) -> Vec<f64> {
        match &self.contributions {
            Some(c) => c.clone(),
            None => (0..num_actions).map(|k| k as f64).collect(),
        }
    }

    pub fn validate(&self, topo: &Topology) -> Result<()> {
        if !self.mu.is_finite() {
            return Err(Error::Config(format!("gsd mu must be finite, got {}", self.mu)));
        }
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return Err(Error::Config(format!("gsd sigma must be positive, got {}", self.sigma)));
        }
        if let Some(c) = &self.contributions {
            if c.len() != topo.num_actions() {
                return Err(Error::Config(format!(
                    "gsd contributions has {} entries, expected {}",
                    c.len(),
                    topo.num_actions()
                )));
            }
            if let Some(x) = c.iter().find(|x| !(x.is_finite() && **x >= 0.0)) {
                return Err(Error::Config(format!(
                    "gsd contribution {x} must be finite and non-negative"
                )));
            }
        }
        Ok(())
    }

    /// `G(x) = x exp(-(x - mu)^2 / sigma^2)`.
    pub fn objective(&self, x: f64) -> f64 {
        let d = x - self.mu;
        x * libm::exp(-(d * d) / (self.sigma * self.sigma))
    }

    /// `ln G(x)`, or `-inf` for `x <= 0`. Stays finite where `G` underflows.
    pub fn log_objective(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return f64::NEG_INFINITY;
        }
        let d = x - self.mu;
        libm::log(x) - (d * d) / (self.sigma * self.sigma)
    }
}

/// Best achievable contribution sum and a lexicographically smallest joint
/// action reaching it.
#[derive(Debug, Clone, PartialEq)]
pub struct GsdOptimum {
    pub sum: f64,
    pub objective: f64,
    pub log_objective: f64,
    pub witness: JointAction,
}

/// Maximises `G` over achievable sums. Integer contribution tables are
/// solved by a sum-set recursion in `O(N * K * span)`; anything else falls
/// back to enumerating joint actions.
pub fn gsd_best_in_hindsight(cfg: &GsdConfig, topo: &Topology) -> Result<GsdOptimum> {
    cfg.validate(topo)?;
    let table = cfg.contribution_table(topo.num_actions());
    let optimum = match integer_sumset_optimum(cfg, &table, topo) {
        Some(opt) => opt,
        None => enumerate_gsd_optimum(cfg, &table, topo)?,
    };
    Ok(optimum)
}

fn integer_sumset_optimum(cfg: &GsdConfig, table: &[f64], topo: &Topology) -> Option<GsdOptimum> {
    if table.iter().any(|c| libm::trunc(*c) != *c || *c > 1e9) {
        return None;
    }
    let offsets: Vec<usize> = table.iter().map(|&c| c as usize).collect();
    let lo = *offsets.iter().min()?;
    let shifted: Vec<usize> = offsets.iter().map(|&c| c - lo).collect();
    let span = *shifted.iter().max()?;
    let n = topo.num_agents();
    if (n as u128) * (span as u128) * (n as u128 + 1) / 2 > MAX_SUM_SPAN {
        return None;
    }

    // reach[m][s]: can m agents produce shifted sum s?
    let mut reach: Vec<Vec<bool>> = Vec::with_capacity(n + 1);
    reach.push(vec![true]);
    for m in 1..=n {
        let prev = &reach[m - 1];
        let mut next = vec![false; m * span + 1];
        for (s, _) in prev.iter().enumerate().filter(|(_, &r)| r) {
            for &c in &shifted {
                next[s + c] = true;
            }
        }
        reach.push(next);
    }

    let base = (n * lo) as f64;
    let mut best: Option<(usize, f64)> = None;
    for (s, _) in reach[n].iter().enumerate().filter(|(_, &r)| r) {
        let g = cfg.log_objective(base + s as f64);
        if best.is_none_or(|(_, bg)| g > bg) {
            best = Some((s, g));
        }
    }
    let (target, log_objective) = best?;

    let mut remaining = target;
    let mut actions = Vec::with_capacity(n);
    for i in 0..n {
        let rest = &reach[n - i - 1];
        let k = (0..shifted.len()).find(|&k| {
            shifted[k] <= remaining && rest.get(remaining - shifted[k]).copied().unwrap_or(false)
        })?;
        remaining -= shifted[k];
        actions.push(k);
    }
    Some(GsdOptimum {
        sum: base + target as f64,
        objective: cfg.objective(base + target as f64),
        log_objective,
        witness: JointAction::new(actions),
    })
}

fn enumerate_gsd_optimum(cfg: &GsdConfig, table: &[f64], topo: &Topology) -> Result<GsdOptimum> {
    match topo.joint_space_size() {
        Some(size) if size <= BRUTE_FORCE_LIMIT => {}
        size => {
            return Err(Error::SpaceTooLarge {
                size,
                limit: BRUTE_FORCE_LIMIT,
            })
        }
    }
    let mut best: Option<GsdOptimum> = None;
    for joint in topo.joint_actions() {
        let x: f64 = joint.actions().iter().map(|&a| table[a]).sum();
        let g = cfg.log_objective(x);
        if best.as_ref().is_none_or(|b| g > b.log_objective) {
            best = Some(GsdOptimum {
                sum: x,
                objective: cfg.objective(x),
                log_objective: g,
                witness: joint,
            });
        }
    }
    Ok(best.expect("non-empty joint action space"))
}

#[derive(Debug, Clone)]
pub struct GsdEnv {
    topo: Topology,
    cfg: GsdConfig,
    table: Vec<f64>,
    optimum: GsdOptimum,
}

impl GsdEnv {
    pub fn new(cfg: GsdConfig, topo: Topology) -> Result<Self> {
        let optimum = gsd_best_in_hindsight(&cfg, &topo)?;
        let table = cfg.contribution_table(topo.num_actions());
        Ok(GsdEnv {
            topo,
            cfg,
            table,
            optimum,
        })
    }

    pub fn config(&self) -> &GsdConfig {
        &self.cfg
    }

    pub fn optimum(&self) -> &GsdOptimum {
        &self.optimum
    }

    pub fn contribution_sum(&self, joint: &JointAction) -> f64 {
        joint.actions().iter().map(|&a| self.table[a]).sum()
    }

    pub fn loss(&self, joint: &JointAction) -> Result<f64> {
        joint.validate(&self.topo)?;
        let x = self.contribution_sum(joint);
        let best = self.optimum.log_objective;
        // a single achievable sum of zero leaves nothing to normalise against
        if x == self.optimum.sum || best == f64::NEG_INFINITY {
            return Ok(0.0);
        }
        let ratio = libm::exp(self.cfg.log_objective(x) - best);
        Ok((1.0 - ratio).clamp(0.0, 1.0))
    }
}

/// Normalised GSD loss. Builds the optimum on every call; hold a [`GsdEnv`]
/// when evaluating repeatedly.
pub fn gsd_loss(joint: &JointAction, cfg: &GsdConfig, topo: &Topology) -> Result<f64> {
    GsdEnv::new(cfg.clone(), *topo)?.loss(joint)
}

impl LossOracle for GsdEnv {
    fn topology(&self) -> Topology {
        self.topo
    }

    fn evaluate(&self, joint: &JointAction, _round: usize, _rng: &mut dyn RngCore) -> Result<f64> {
        self.loss(joint)
    }

    fn expected_loss(&self, joint: &JointAction, _round: usize) -> Result<f64> {
        self.loss(joint)
    }

    fn is_stochastic(&self) -> bool {
        false
    }

    fn is_time_invariant(&self) -> bool {
        true
    }

    fn best_in_hindsight(&self, horizon: usize) -> Result<(JointAction, f64)> {
        let per_round = self.loss(&self.optimum.witness)?;
        Ok((self.optimum.witness.clone(), per_round * horizon as f64))
    }
}

// ---------------------------------------------------------------------------
// Linear adversary

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct BetaSegment {
    /// First 1-based round this beta applies to.
    pub start: usize,
    pub beta: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(
    feature = "serde",
    serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)
)]
pub enum BetaSchedule {
    Stationary {
        beta: Vec<f64>,
    },
    /// Segments sorted by `start`, the first starting at round 1. Each
    /// applies until the next one starts.
    Piecewise {
        segments: Vec<BetaSegment>,
    },
    /// `beta_1 = initial`, `beta_{t+1} = beta_t + step_size * N(0, I)`.
    RandomWalk {
        initial: Vec<f64>,
        step_size: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct LinearEnvConfig {
    pub beta_schedule: BetaSchedule,
    #[cfg_attr(feature = "serde", serde(default))]
    pub noise_std: f64,
}

impl LinearEnvConfig {
    pub fn stationary(beta: Vec<f64>, noise_std: f64) -> Self {
        LinearEnvConfig {
            beta_schedule: BetaSchedule::Stationary { beta },
            noise_std,
        }
    }

    pub fn validate(&self, topo: &Topology) -> Result<()> {
        if !(self.noise_std.is_finite() && self.noise_std >= 0.0) {
            return Err(Error::Config(format!(
                "noise_std must be finite and non-negative, got {}",
                self.noise_std
            )));
        }
        let check = |beta: &[f64], what: &str| -> Result<()> {
            if beta.len() != topo.dim() {
                return Err(Error::Config(format!(
                    "{what} has length {}, expected K*N = {}",
                    beta.len(),
                    topo.dim()
                )));
            }
            if let Some(x) = beta.iter().find(|x| !x.is_finite()) {
                return Err(Error::Config(format!("{what} entry {x} is not finite")));
            }
            Ok(())
        };
        match &self.beta_schedule {
            BetaSchedule::Stationary { beta } => check(beta, "beta"),
            BetaSchedule::Piecewise { segments } => {
                if segments.first().map(|s| s.start) != Some(1) {
                    return Err(Error::Config(
                        "piecewise beta schedule must start with a segment at round 1".into(),
                    ));
                }
                if segments.windows(2).any(|w| w[1].start <= w[0].start) {
                    return Err(Error::Config(
                        "piecewise beta segments must have strictly increasing starts".into(),
                    ));
                }
                segments
                    .iter()
                    .try_for_each(|s| check(&s.beta, "piecewise segment beta"))
            }
            BetaSchedule::RandomWalk { initial, step_size } => {
                if !(step_size.is_finite() && *step_size >= 0.0) {
                    return Err(Error::Config(format!(
                        "random-walk step_size must be finite and non-negative, got {step_size}"
                    )));
                }
                check(initial, "random-walk initial beta")
            }
        }
    }
}

#[derive(Debug, Clone)]
enum BetaPath {
    Constant(Vec<f64>),
    Segments(Vec<BetaSegment>),
    /// `path[t - 1] = beta_t`.
    Explicit(Vec<Vec<f64>>),
}

#[derive(Debug, Clone)]
pub struct LinearEnv {
    topo: Topology,
    cfg: LinearEnvConfig,
    path: BetaPath,
    horizon: usize,
    noise: Option<Normal<f64>>,
}

impl LinearEnv {
    /// `seed` only matters for random-walk schedules, whose whole path over
    /// `horizon` rounds is drawn here from its own stream.
    pub fn new(cfg: LinearEnvConfig, topo: Topology, horizon: usize, seed: u64) -> Result<Self> {
        cfg.validate(&topo)?;
        let path = match &cfg.beta_schedule {
            BetaSchedule::Stationary { beta } => BetaPath::Constant(beta.clone()),
            BetaSchedule::Piecewise { segments } => BetaPath::Segments(segments.clone()),
            BetaSchedule::RandomWalk { initial, step_size } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed ^ RANDOM_WALK_STREAM);
                let step = Normal::new(0.0, *step_size)
                    .map_err(|e| Error::Config(format!("random-walk step: {e}")))?;
                let mut path = Vec::with_capacity(horizon.max(1));
                let mut current = initial.clone();
                for _ in 0..horizon.max(1) {
                    path.push(current.clone());
                    for x in &mut current {
                        *x += step.sample(&mut rng);
                    }
                }
                BetaPath::Explicit(path)
            }
        };
        let noise = if cfg.noise_std > 0.0 {
            Some(
                Normal::new(0.0, cfg.noise_std)
                    .map_err(|e| Error::Config(format!("noise_std: {e}")))?,
            )
        } else {
            None
        };
        Ok(LinearEnv {
            topo,
            cfg,
            path,
            horizon,
            noise,
        })
    }

    pub fn config(&self) -> &LinearEnvConfig {
        &self.cfg
    }

    /// `beta_t`; rounds past a random walk's horizon reuse its last value.
    pub fn beta(&self, round: usize) -> &[f64] {
        match &self.path {
            BetaPath::Constant(beta) => beta,
            BetaPath::Segments(segments) => {
                let idx = segments.partition_point(|s| s.start <= round.max(1));
                &segments[idx.saturating_sub(1)].beta
            }
            BetaPath::Explicit(path) => &path[round.clamp(1, path.len()) - 1],
        }
    }

    /// `sum_{t=1..T} beta_t`.
    pub fn cumulative_beta(&self, horizon: usize) -> Vec<f64> {
        let dim = self.topo.dim();
        match &self.path {
            BetaPath::Constant(beta) => beta.iter().map(|b| b * horizon as f64).collect(),
            BetaPath::Segments(segments) => {
                let mut total = vec![0.0; dim];
                for (i, seg) in segments.iter().enumerate() {
                    if seg.start > horizon {
                        break;
                    }
                    let end = segments
                        .get(i + 1)
                        .map_or(horizon, |next| (next.start - 1).min(horizon));
                    let len = (end + 1 - seg.start) as f64;
                    for (t, b) in total.iter_mut().zip(&seg.beta) {
                        *t += b * len;
                    }
                }
                total
            }
            BetaPath::Explicit(_) => {
                let mut total = vec![0.0; dim];
                for t in 1..=horizon {
                    for (acc, b) in total.iter_mut().zip(self.beta(t)) {
                        *acc += b;
                    }
                }
                total
            }
        }
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }
}

/// `beta_t^T z` plus Gaussian noise when configured.
pub fn linear_loss(
    z: &ArchitectureVector,
    env: &LinearEnv,
    round: usize,
    rng: &mut dyn RngCore,
) -> Result<f64> {
    if z.len() != env.topo.dim() {
        return Err(Error::Topology(format!(
            "architecture vector has length {}, expected {}",
            z.len(),
            env.topo.dim()
        )));
    }
    let mean = z.dot(env.beta(round));
    Ok(match &env.noise {
        Some(noise) => mean + noise.sample(rng),
        None => mean,
    })
}

/// Blockwise argmin of `totals` (lowest index on ties) and the sum of the
/// block minima.
pub fn blockwise_argmin(totals: &[f64], topo: &Topology) -> (JointAction, f64) {
    let k = topo.num_actions();
    let mut actions = Vec::with_capacity(topo.num_agents());
    let mut value = 0.0;
    for block in totals.chunks_exact(k) {
        let mut best = 0;
        for (a, &x) in block.iter().enumerate().skip(1) {
            if x < block[best] {
                best = a;
            }
        }
        actions.push(best);
        value += block[best];
    }
    (JointAction::new(actions), value)
}

impl LossOracle for LinearEnv {
    fn topology(&self) -> Topology {
        self.topo
    }

    fn evaluate(&self, joint: &JointAction, round: usize, rng: &mut dyn RngCore) -> Result<f64> {
        let z = encode(joint, &self.topo)?;
        linear_loss(&z, self, round, rng)
    }

    fn expected_loss(&self, joint: &JointAction, round: usize) -> Result<f64> {
        joint.validate(&self.topo)?;
        let beta = self.beta(round);
        Ok(joint.active_indices(self.topo.num_actions()).map(|i| beta[i]).sum())
    }

    fn is_stochastic(&self) -> bool {
        self.noise.is_some()
    }

    fn is_time_invariant(&self) -> bool {
        matches!(self.path, BetaPath::Constant(_))
    }

    fn best_in_hindsight(&self, horizon: usize) -> Result<(JointAction, f64)> {
        Ok(blockwise_argmin(&self.cumulative_beta(horizon), &self.topo))
    }

    fn beta_at(&self, round: usize) -> Option<&[f64]> {
        Some(self.beta(round))
    }
}

// ---------------------------------------------------------------------------
// Tabular benchmark

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TabularEntry {
    pub mean: f64,
    pub std: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TabularBenchmark {
    topology: Topology,
    entries: BTreeMap<JointAction, TabularEntry>,
}

impl TabularBenchmark {
    pub fn new(
        topology: Topology,
        entries: impl IntoIterator<Item = (JointAction, TabularEntry)>,
    ) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (joint, entry) in entries {
            joint.validate(&topology)?;
            if !entry.mean.is_finite() {
                return Err(Error::Input(format!(
                    "benchmark loss for {:?} is not finite",
                    joint.actions()
                )));
            }
            if let Some(s) = entry.std {
                if !(s.is_finite() && s >= 0.0) {
                    return Err(Error::Input(format!(
                        "benchmark std for {:?} must be finite and non-negative",
                        joint.actions()
                    )));
                }
            }
            if map.insert(joint.clone(), entry).is_some() {
                return Err(Error::Input(format!(
                    "duplicate benchmark entry for {:?}",
                    joint.actions()
                )));
            }
        }
        if map.is_empty() {
            return Err(Error::Input("benchmark has no entries".into()));
        }
        Ok(TabularBenchmark {
            topology,
            entries: map,
        })
    }

    pub fn topology(&self) -> Topology {
        self.topology
    }

    /// Entries in lexicographic order of their joint actions.
    pub fn entries(&self) -> impl Iterator<Item = (&JointAction, &TabularEntry)> {
        self.entries.iter()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, joint: &JointAction) -> Option<&TabularEntry> {
        self.entries.get(joint)
    }
}

/// Mean loss, plus `N(0, std^2)` noise when `noisy` and a std is recorded.
pub fn tabular_lookup<R: Rng + ?Sized>(
    joint: &JointAction,
    bench: &TabularBenchmark,
    noisy: bool,
    rng: &mut R,
) -> Result<f64> {
    let entry = bench
        .get(joint)
        .ok_or_else(|| Error::Lookup(joint.actions().to_vec()))?;
    match entry.std {
        Some(std) if noisy && std > 0.0 => {
            let noise = Normal::new(0.0, std).map_err(|e| Error::Input(format!("{e}")))?;
            Ok(entry.mean + noise.sample(rng))
        }
        _ => Ok(entry.mean),
    }
}

#[derive(Debug, Clone)]
pub struct TabularEnv {
    bench: TabularBenchmark,
    noisy: bool,
}

impl TabularEnv {
    pub fn new(bench: TabularBenchmark, noisy: bool) -> Self {
        TabularEnv { bench, noisy }
    }

    pub fn benchmark(&self) -> &TabularBenchmark {
        &self.bench
    }
}

impl LossOracle for TabularEnv {
    fn topology(&self) -> Topology {
        self.bench.topology
    }

    fn evaluate(&self, joint: &JointAction, _round: usize, rng: &mut dyn RngCore) -> Result<f64> {
        tabular_lookup(joint, &self.bench, self.noisy, rng)
    }

    fn expected_loss(&self, joint: &JointAction, _round: usize) -> Result<f64> {
        self.bench
            .get(joint)
            .map(|e| e.mean)
            .ok_or_else(|| Error::Lookup(joint.actions().to_vec()))
    }

    fn is_stochastic(&self) -> bool {
        self.noisy && self.bench.entries.values().any(|e| e.std.is_some_and(|s| s > 0.0))
    }

    fn is_time_invariant(&self) -> bool {
        true
    }

    /// Minimum over the recorded entries only.
    fn best_in_hindsight(&self, horizon: usize) -> Result<(JointAction, f64)> {
        let (joint, entry) = self
            .bench
            .entries
            .iter()
            .fold(None::<(&JointAction, &TabularEntry)>, |best, (j, e)| match best {
                Some((_, b)) if b.mean <= e.mean => best,
                _ => Some((j, e)),
            })
            .expect("benchmark is never empty");
        Ok((joint.clone(), entry.mean * horizon as f64))
    }
}

// ---------------------------------------------------------------------------

/// What to build an [`Environment`] from.
#[derive(Debug, Clone, PartialEq)]
pub enum EnvironmentSpec {
    Gsd(GsdConfig),
    Linear(LinearEnvConfig),
    Tabular { benchmark: TabularBenchmark, noisy: bool },
}

#[derive(Debug, Clone)]
pub enum Environment {
    Gsd(GsdEnv),
    Linear(LinearEnv),
    Tabular(TabularEnv),
}

impl Environment {
    pub fn build(spec: &EnvironmentSpec, topo: Topology, horizon: usize, seed: u64) -> Result<Self> {
        Ok(match spec {
            EnvironmentSpec::Gsd(cfg) => Environment::Gsd(GsdEnv::new(cfg.clone(), topo)?),
            EnvironmentSpec::Linear(cfg) => {
                Environment::Linear(LinearEnv::new(cfg.clone(), topo, horizon, seed)?)
            }
            EnvironmentSpec::Tabular { benchmark, noisy } => {
                if benchmark.topology() != topo {
                    return Err(Error::Config(format!(
                        "benchmark topology {}x{} does not match experiment topology {}x{}",
                        benchmark.topology().num_agents(),
                        benchmark.topology().num_actions(),
                        topo.num_agents(),
                        topo.num_actions()
                    )));
                }
                Environment::Tabular(TabularEnv::new(benchmark.clone(), *noisy))
            }
        })
    }

    fn inner(&self) -> &dyn LossOracle {
        match self {
            Environment::Gsd(e) => e,
            Environment::Linear(e) => e,
            Environment::Tabular(e) => e,
        }
    }
}

impl LossOracle for Environment {
    fn topology(&self) -> Topology {
        self.inner().topology()
    }

    fn evaluate(&self, joint: &JointAction, round: usize, rng: &mut dyn RngCore) -> Result<f64> {
        self.inner().evaluate(joint, round, rng)
    }

    fn expected_loss(&self, joint: &JointAction, round: usize) -> Result<f64> {
        self.inner().expected_loss(joint, round)
    }

    fn is_stochastic(&self) -> bool {
        self.inner().is_stochastic()
    }

    fn is_time_invariant(&self) -> bool {
        self.inner().is_time_invariant()
    }

    fn best_in_hindsight(&self, horizon: usize) -> Result<(JointAction, f64)> {
        self.inner().best_in_hindsight(horizon)
    }

    fn beta_at(&self, round: usize) -> Option<&[f64]> {
        match self {
            Environment::Linear(e) => Some(e.beta(round)),
            _ => None,
        }
    }
}
