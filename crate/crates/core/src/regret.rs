//! Regret accounting.
//!
//! Cumulative regret compares the summed loss of the played joint actions
//! with the best fixed joint action in hindsight; simple regret replays the
//! final recommendation over the whole horizon instead. For linear losses
//! both split exactly into per-agent terms, because every feasible
//! architecture selects one coordinate per agent block.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::environment::LossOracle;
use crate::runner::LossTrace;
use crate::topology::{JointAction, Topology};
use crate::{Error, Result};

/// Slack under which a negative regret is attributed to rounding.
pub const NEGATIVE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RegretReport {
    pub horizon: usize,
    /// Observed loss per round.
    pub losses: Vec<f64>,
    /// Instantaneous regret `L_t(a_t) - E[L_t(a*)]` per round.
    pub per_round: Vec<f64>,
    pub cumulative_regret: f64,
    pub simple_regret: f64,
    /// Linear environments only.
    pub per_agent: Option<Vec<f64>>,
    pub best_hindsight_action: JointAction,
    pub best_hindsight_value: f64,
    pub recommended: JointAction,
    /// `2 N sqrt(t K ln K)` for `t = 1..=T`.
    pub theoretical_bound_curve: Option<Vec<f64>>,
    /// The oracle adds noise, so negative regret is possible and is kept.
    pub stochastic: bool,
    pub negative_regret: bool,
}

impl RegretReport {
    /// Running sum of `per_round`.
    pub fn cumulative_curve(&self) -> Vec<f64> {
        let mut acc = 0.0;
        self.per_round
            .iter()
            .map(|r| {
                acc += r;
                acc
            })
            .collect()
    }
}

fn check_horizon(trace: &LossTrace) -> Result<()> {
    if trace.rounds.len() != trace.horizon {
        return Err(Error::Input(format!(
            "trace holds {} rounds but its horizon is {}",
            trace.rounds.len(),
            trace.horizon
        )));
    }
    Ok(())
}

/// `sum_t L_t(a_t) - oracle_min`.
pub fn cumulative_regret(trace: &LossTrace, oracle_min: f64) -> Result<f64> {
    check_horizon(trace)?;
    Ok(trace.rounds.iter().map(|r| r.loss).sum::<f64>() - oracle_min)
}

/// `sum_t E[L_t(recommended)] - oracle_min`, replaying the recommendation
/// through the oracle's noise-free loss.
pub fn simple_regret<E: LossOracle + ?Sized>(
    env: &E,
    recommended: &JointAction,
    horizon: usize,
    oracle_min: f64,
) -> Result<f64> {
    Ok(replayed_total(env, recommended, horizon)? - oracle_min)
}

fn replayed_total<E: LossOracle + ?Sized>(env: &E, joint: &JointAction, horizon: usize) -> Result<f64> {
    if env.is_time_invariant() {
        return Ok(env.expected_loss(joint, 1)? * horizon as f64);
    }
    let mut total = 0.0;
    for t in 1..=horizon {
        total += env.expected_loss(joint, t)?;
    }
    Ok(total)
}

pub use crate::environment::best_in_hindsight_bruteforce;

/// Per-agent regret `sum_t beta_t^i[a_t^i] - min_k sum_t beta_t^i[k]`.
pub fn per_agent_regret<E: LossOracle + ?Sized>(trace: &LossTrace, env: &E) -> Result<Vec<f64>> {
    check_horizon(trace)?;
    let topo = env.topology();
    let k = topo.num_actions();
    let mut played = vec![0.0; topo.num_agents()];
    let mut totals = vec![0.0; topo.dim()];
    for (idx, record) in trace.rounds.iter().enumerate() {
        let beta = env
            .beta_at(idx + 1)
            .ok_or(Error::UnsupportedMetric("per-agent regret needs a linear environment"))?;
        for (i, &a) in record.joint.actions().iter().enumerate() {
            played[i] += beta[i * k + a];
        }
        for (acc, b) in totals.iter_mut().zip(beta) {
            *acc += b;
        }
    }
    if trace.rounds.is_empty() && env.beta_at(1).is_none() {
        return Err(Error::UnsupportedMetric("per-agent regret needs a linear environment"));
    }
    Ok(played
        .into_iter()
        .zip(totals.chunks_exact(k))
        .map(|(p, block)| p - block.iter().copied().fold(f64::INFINITY, f64::min))
        .collect())
}

/// `curve[t-1] = 2 N sqrt(t K ln K)`; all zeros when `K = 1`.
pub fn exp3_bound_curve(topo: &Topology, horizon: usize) -> Vec<f64> {
    let k = topo.num_actions() as f64;
    let n = topo.num_agents() as f64;
    let per_t = k * libm::log(k);
    (1..=horizon)
        .map(|t| 2.0 * n * libm::sqrt(t as f64 * per_t))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Complexity {
    pub h: f64,
    /// Some agent block has a tied minimum, so its gap and `H` are 0.
    pub degenerate: bool,
}

/// `H = N * min_i min_{j != k*_i} (B_i[j] - B_i[k*_i])`.
pub fn ls_complexity_h(beta_totals: &[f64], topo: &Topology) -> Result<Complexity> {
    let k = topo.num_actions();
    if k < 2 {
        return Err(Error::Topology("complexity needs at least two actions per agent".into()));
    }
    if beta_totals.len() != topo.dim() {
        return Err(Error::Topology(format!(
            "beta totals have length {}, expected {}",
            beta_totals.len(),
            topo.dim()
        )));
    }
    let mut min_gap = f64::INFINITY;
    for block in beta_totals.chunks_exact(k) {
        let mut sorted = block.to_vec();
        sorted.sort_by(f64::total_cmp);
        min_gap = min_gap.min(sorted[1] - sorted[0]);
    }
    let degenerate = min_gap <= 0.0;
    let gap = if degenerate { 0.0 } else { min_gap };
    Ok(Complexity {
        h: topo.num_agents() as f64 * gap,
        degenerate,
    })
}

/// Assembles the full report for one finished run.
pub fn build_report<E: LossOracle + ?Sized>(
    trace: &LossTrace,
    env: &E,
    recommended: &JointAction,
) -> Result<RegretReport> {
    check_horizon(trace)?;
    let horizon = trace.horizon;
    let topo = env.topology();
    let (best, best_value) = env.best_in_hindsight(horizon)?;
    let invariant = env.is_time_invariant();
    let best_const = if invariant { Some(env.expected_loss(&best, 1)?) } else { None };

    let mut losses = Vec::with_capacity(horizon);
    let mut per_round = Vec::with_capacity(horizon);
    for (idx, r) in trace.rounds.iter().enumerate() {
        let reference = match best_const {
            Some(v) => v,
            None => env.expected_loss(&best, idx + 1)?,
        };
        losses.push(r.loss);
        per_round.push(r.loss - reference);
    }
    let cumulative = cumulative_regret(trace, best_value)?;
    let simple = simple_regret(env, recommended, horizon, best_value)?;
    let per_agent = match env.beta_at(1) {
        Some(_) => Some(per_agent_regret(trace, env)?),
        None => None,
    };
    Ok(RegretReport {
        horizon,
        losses,
        per_round,
        cumulative_regret: cumulative,
        simple_regret: simple,
        per_agent,
        best_hindsight_action: best,
        best_hindsight_value: best_value,
        recommended: recommended.clone(),
        theoretical_bound_curve: Some(exp3_bound_curve(&topo, horizon)),
        stochastic: env.is_stochastic(),
        negative_regret: cumulative < -NEGATIVE_TOLERANCE || simple < -NEGATIVE_TOLERANCE,
    })
}

/// Mean and spread over repeated runs.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AggregateReport {
    pub repeats: usize,
    pub mean_per_round: Vec<f64>,
    pub std_per_round: Vec<f64>,
    pub mean_cumulative: Vec<f64>,
    pub std_cumulative: Vec<f64>,
    pub mean_cumulative_regret: f64,
    pub std_cumulative_regret: f64,
    pub mean_simple_regret: f64,
    pub std_simple_regret: f64,
    /// Index (into the aggregated reports) of the run whose recommendation
    /// has the lowest simple regret; ties go to the earliest run.
    pub best_run: usize,
}

fn mean_std(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.clone().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, libm::sqrt(var))
}

/// Sample standard deviation (`R - 1` denominator), 0 for a single run.
pub fn aggregate(reports: &[RegretReport]) -> Result<AggregateReport> {
    let first = reports
        .first()
        .ok_or_else(|| Error::Input("no completed runs to aggregate".into()))?;
    let horizon = first.horizon;
    if let Some(r) = reports.iter().find(|r| r.horizon != horizon) {
        return Err(Error::Input(format!(
            "cannot aggregate horizons {horizon} and {}",
            r.horizon
        )));
    }
    let curves: Vec<Vec<f64>> = reports.iter().map(RegretReport::cumulative_curve).collect();
    let mut mean_per_round = Vec::with_capacity(horizon);
    let mut std_per_round = Vec::with_capacity(horizon);
    let mut mean_cumulative = Vec::with_capacity(horizon);
    let mut std_cumulative = Vec::with_capacity(horizon);
    for t in 0..horizon {
        let (m, s) = mean_std(reports.iter().map(|r| r.per_round[t]));
        mean_per_round.push(m);
        std_per_round.push(s);
        let (m, s) = mean_std(curves.iter().map(|c| c[t]));
        mean_cumulative.push(m);
        std_cumulative.push(s);
    }
    let (mean_cumulative_regret, std_cumulative_regret) =
        mean_std(reports.iter().map(|r| r.cumulative_regret));
    let (mean_simple_regret, std_simple_regret) = mean_std(reports.iter().map(|r| r.simple_regret));
    let best_run = reports
        .iter()
        .enumerate()
        .fold(0, |best, (i, r)| {
            if r.simple_regret < reports[best].simple_regret {
                i
            } else {
                best
            }
        });
    Ok(AggregateReport {
        repeats: reports.len(),
        mean_per_round,
        std_per_round,
        mean_cumulative,
        std_cumulative,
        mean_cumulative_regret,
        std_cumulative_regret,
        mean_simple_regret,
        std_simple_regret,
        best_run,
    })
}
