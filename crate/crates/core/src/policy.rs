//! Per-agent sampling policies and credit assignment.
//!
//! MANAS keeps, per agent, an importance-weighted cumulative loss `b[k]` for
//! every operation (EXP3 on losses) and samples from a softmax over `-eta * b`
//! mixed with a uniform component of weight `gamma`.
//!
//! MANAS-LS instead refits a linear model of the loss in the one-hot
//! architecture vector by minimum-norm least squares. Each agent reads its
//! block of the fitted coefficients as scores and samples operation `k` with
//! probability `1 / (rank(k) * H_K)`, `H_K` being the `K`-th harmonic number.
//!
//! The exact second-moment matrix `E[Z Z^T]` of the product sampling law and
//! the per-round estimator `L * P^+ Z` built on it are also provided; they
//! underpin the unbiasedness argument for the least-squares scores.

use alloc::collections::VecDeque;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::linalg::{Matrix, SymmetricEigen, DEFAULT_RTOL};
use crate::topology::{decode, ArchitectureVector, JointAction, Topology};
use crate::{Error, Result};

/// Tolerance on `sum(p) == 1` when validating a distribution.
pub const SUM_TOLERANCE: f64 = 1e-9;

/// Cumulative credit per operation for one agent. Lower is better.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(transparent))]
pub struct AgentScores(Vec<f64>);

impl AgentScores {
    pub fn zeros(num_actions: usize) -> Self {
        AgentScores(vec![0.0; num_actions])
    }

    pub fn new(b: Vec<f64>) -> Result<Self> {
        if let Some(x) = b.iter().find(|x| !x.is_finite()) {
            return Err(Error::Input(format!("score {x} is not finite")));
        }
        Ok(AgentScores(b))
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.0.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// In-place form of [`exp3_update`].
    pub fn apply_exp3(&mut self, chosen: usize, loss: f64, p_chosen: f64) -> Result<()> {
        if !(p_chosen > 0.0 && p_chosen <= 1.0) {
            return Err(Error::ImportanceWeight(p_chosen));
        }
        if !loss.is_finite() {
            return Err(Error::Input(format!("loss {loss} is not finite")));
        }
        let k = self.0.len();
        let slot = self
            .0
            .get_mut(chosen)
            .ok_or_else(|| Error::Input(format!("action {chosen} out of range for {k} actions")))?;
        *slot += loss / p_chosen;
        Ok(())
    }

    /// Lowest-index minimiser.
    pub fn argmin(&self) -> usize {
        let mut best = 0;
        for (k, &x) in self.0.iter().enumerate().skip(1) {
            if x < self.0[best] {
                best = k;
            }
        }
        best
    }
}

/// A probability vector over one agent's operations.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(transparent))]
pub struct SamplingDistribution(Vec<f64>);

impl SamplingDistribution {
    pub fn uniform(num_actions: usize) -> Self {
        SamplingDistribution(vec![1.0 / num_actions as f64; num_actions])
    }

    pub fn new(p: Vec<f64>) -> Result<Self> {
        if p.is_empty() {
            return Err(Error::Input("empty distribution".into()));
        }
        if let Some(x) = p.iter().find(|x| !(x.is_finite() && **x >= 0.0)) {
            return Err(Error::Input(format!("probability {x} is negative or not finite")));
        }
        let total: f64 = p.iter().sum();
        if libm::fabs(total - 1.0) > SUM_TOLERANCE {
            return Err(Error::Input(format!("probabilities sum to {total}, not 1")));
        }
        Ok(SamplingDistribution(p))
    }

    #[inline]
    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.0.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Inverse-CDF sampling from exactly one `f64` draw.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        self.invert(u)
    }

    /// Smallest `k` with `u < p[0] + ... + p[k]`; rounding slack at the top
    /// goes to the last action with positive mass.
    pub fn invert(&self, u: f64) -> usize {
        let mut cum = 0.0;
        for (k, &p) in self.0.iter().enumerate() {
            cum += p;
            if u < cum {
                return k;
            }
        }
        self.0.iter().rposition(|&p| p > 0.0).unwrap_or(0)
    }
}

/// Softmax temperature coefficient and uniform-mixture weight.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ManasHyperparams {
    pub eta: f64,
    pub gamma: f64,
    /// Planned number of sampled architectures the defaults were derived from.
    pub horizon_n: usize,
    /// Set when `K = 1`: nothing to learn, both parameters are zero.
    #[cfg_attr(feature = "serde", serde(default))]
    pub degenerate: bool,
}

impl ManasHyperparams {
    pub fn new(eta: f64, gamma: f64, horizon_n: usize) -> Result<Self> {
        let hp = ManasHyperparams {
            eta,
            gamma,
            horizon_n,
            degenerate: false,
        };
        hp.validate()?;
        Ok(hp)
    }

    /// `eta = 0` is accepted: it turns the softmax into the uniform law.
    pub fn validate(&self) -> Result<()> {
        if !(self.eta.is_finite() && self.eta >= 0.0) {
            return Err(Error::Config(format!("eta must be finite and >= 0, got {}", self.eta)));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::Config(format!("gamma must lie in [0, 1], got {}", self.gamma)));
        }
        if self.horizon_n == 0 {
            return Err(Error::Config("horizon_n must be at least 1".into()));
        }
        Ok(())
    }
}

/// Starting values `eta = 0.95 sqrt(ln K) / (n K)` and
/// `gamma = min(1, 1.05 K ln K / n)`.
pub fn manas_defaults(topo: &Topology, horizon_n: usize) -> Result<ManasHyperparams> {
    if horizon_n == 0 {
        return Err(Error::Config("horizon_n must be at least 1".into()));
    }
    let k = topo.num_actions();
    if k == 1 {
        return Ok(ManasHyperparams {
            eta: 0.0,
            gamma: 0.0,
            horizon_n,
            degenerate: true,
        });
    }
    let kf = k as f64;
    let n = horizon_n as f64;
    let ln_k = libm::log(kf);
    Ok(ManasHyperparams {
        eta: 0.95 * libm::sqrt(ln_k) / (n * kf),
        gamma: (1.05 * kf * ln_k / n).min(1.0),
        horizon_n,
        degenerate: false,
    })
}

/// `p[k] = (1 - gamma) exp(-eta b[k]) / sum_j exp(-eta b[j]) + gamma / K`.
///
/// Scores are shifted by their minimum before exponentiation.
pub fn softmax_distribution(scores: &AgentScores, hp: &ManasHyperparams) -> SamplingDistribution {
    let b = scores.as_slice();
    let k = b.len();
    let floor = b.iter().copied().fold(f64::INFINITY, f64::min);
    let weights: Vec<f64> = b.iter().map(|&x| libm::exp(-hp.eta * (x - floor))).collect();
    let total: f64 = weights.iter().sum();
    let mix = hp.gamma / k as f64;
    SamplingDistribution(
        weights
            .into_iter()
            .map(|w| (1.0 - hp.gamma) * (w / total) + mix)
            .collect(),
    )
}

/// `b[chosen] += loss / p_chosen`; every other entry is untouched.
pub fn exp3_update(
    scores: &AgentScores,
    chosen: usize,
    loss: f64,
    p_chosen: f64,
) -> Result<AgentScores> {
    let mut next = scores.clone();
    next.apply_exp3(chosen, loss, p_chosen)?;
    Ok(next)
}

/// `H_K = 1 + 1/2 + ... + 1/K`, summed smallest term first.
pub fn harmonic_number(k: usize) -> f64 {
    (1..=k).rev().map(|j| 1.0 / j as f64).sum()
}

/// 1-based ranks after an ascending stable sort (ties: lower index first).
pub fn ascending_ranks(b: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..b.len()).collect();
    order.sort_by(|&i, &j| b[i].total_cmp(&b[j]).then(i.cmp(&j)));
    let mut ranks = vec![0; b.len()];
    for (pos, &k) in order.iter().enumerate() {
        ranks[k] = pos + 1;
    }
    ranks
}

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

const EXACT_F64_INT: u128 = 1 << 53;

// H_K = num / lcm(1..K) with both integers exactly representable in f64.
fn harmonic_fraction(k: usize) -> Option<(u128, u128)> {
    let mut lcm: u128 = 1;
    for j in 1..=k as u128 {
        lcm = lcm / gcd(lcm, j) * j;
        if lcm > EXACT_F64_INT {
            return None;
        }
    }
    let num: u128 = (1..=k as u128).map(|j| lcm / j).sum();
    (num <= EXACT_F64_INT).then_some((num, lcm))
}

/// Zipf's law over estimated ranks: `p[k] = 1 / (rank(k) * H_K)`, rank 1
/// being the lowest score.
///
/// Whenever `H_K` has an exact small rational form each probability is
/// computed as one correctly rounded division `lcm / (rank * num)`.
pub fn zipf_distribution(scores: &AgentScores) -> SamplingDistribution {
    let b = scores.as_slice();
    let k = b.len();
    let ranks = ascending_ranks(b);
    let exact = harmonic_fraction(k);
    let probs = ranks
        .into_iter()
        .map(|rank| match exact {
            Some((num, lcm)) if (rank as u128) * num <= EXACT_F64_INT => {
                lcm as f64 / ((rank as u128 * num) as f64)
            }
            _ => 1.0 / (rank as f64 * harmonic_number(k)),
        })
        .collect();
    SamplingDistribution(probs)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum RecommendMode {
    #[default]
    Argmin,
    Sample,
}

pub fn recommend<R: Rng + ?Sized>(
    scores: &AgentScores,
    mode: RecommendMode,
    dist: &SamplingDistribution,
    rng: &mut R,
) -> usize {
    match mode {
        RecommendMode::Argmin => scores.argmin(),
        RecommendMode::Sample => dist.sample(rng),
    }
}

/// Evaluated architectures and their losses, the design of a least-squares
/// refit. Columns are stored as joint actions; their one-hot form is implied.
#[derive(Debug, Clone)]
pub struct LsBatch {
    topo: Topology,
    columns: VecDeque<JointAction>,
    losses: VecDeque<f64>,
    capacity: Option<usize>,
}

impl LsBatch {
    pub fn new(topo: Topology) -> Self {
        LsBatch {
            topo,
            columns: VecDeque::new(),
            losses: VecDeque::new(),
            capacity: None,
        }
    }

    /// Keeps only the most recent `capacity` samples.
    pub fn sliding(topo: Topology, capacity: usize) -> Self {
        LsBatch {
            capacity: Some(capacity.max(1)),
            ..LsBatch::new(topo)
        }
    }

    pub fn topology(&self) -> &Topology {
        &self.topo
    }

    pub fn push(&mut self, z: &ArchitectureVector, loss: f64) -> Result<()> {
        let joint = decode(z, &self.topo)?;
        self.push_joint(joint, loss)
    }

    pub fn push_joint(&mut self, joint: JointAction, loss: f64) -> Result<()> {
        joint.validate(&self.topo)?;
        if !loss.is_finite() {
            return Err(Error::Input(format!("loss {loss} is not finite")));
        }
        if let Some(cap) = self.capacity {
            while self.columns.len() >= cap {
                self.columns.pop_front();
                self.losses.pop_front();
            }
        }
        self.columns.push_back(joint);
        self.losses.push_back(loss);
        Ok(())
    }

    /// Number of samples `S`.
    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    /// `S >= K * N`, the identifiability gate applied before a refit.
    pub fn meets_sample_gate(&self) -> bool {
        self.len() >= self.topo.dim()
    }

    pub fn columns(&self) -> impl Iterator<Item = &JointAction> {
        self.columns.iter()
    }

    pub fn losses(&self) -> impl Iterator<Item = f64> + '_ {
        self.losses.iter().copied()
    }

    pub fn clear(&mut self) {
        self.columns.clear();
        self.losses.clear();
    }

    /// `Z Z^T` and `Z L` with `Z` the `KN x S` design.
    pub fn normal_equations(&self) -> (Matrix, Vec<f64>) {
        let k = self.topo.num_actions();
        let dim = self.topo.dim();
        let mut gram = Matrix::zeros(dim, dim);
        let mut rhs = vec![0.0; dim];
        let mut idx = Vec::with_capacity(self.topo.num_agents());
        for (joint, &loss) in self.columns.iter().zip(&self.losses) {
            idx.clear();
            idx.extend(joint.active_indices(k));
            for &r in &idx {
                rhs[r] += loss;
                let row = gram.row_mut(r);
                for &c in &idx {
                    row[c] += 1.0;
                }
            }
        }
        (gram, rhs)
    }

    /// `beta^T z_s` for every stored column.
    pub fn predictions(&self, beta: &[f64]) -> Vec<f64> {
        let k = self.topo.num_actions();
        self.columns
            .iter()
            .map(|j| j.active_indices(k).map(|i| beta[i]).sum())
            .collect()
    }

    pub fn max_abs_residual(&self, beta: &[f64]) -> f64 {
        self.predictions(beta)
            .into_iter()
            .zip(&self.losses)
            .fold(0.0f64, |m, (p, l)| m.max(libm::fabs(p - l)))
    }

    pub fn residual_sum_of_squares(&self, beta: &[f64]) -> f64 {
        self.predictions(beta)
            .into_iter()
            .zip(&self.losses)
            .map(|(p, l)| (p - l) * (p - l))
            .sum()
    }
}

/// Minimum-norm least-squares fit `beta = (Z Z^T)^+ Z L`.
///
/// The Gram matrix of a binary design holds integer counts and is formed
/// exactly; its eigenvalues at or below `1e-10` times the largest are
/// treated as zero.
pub fn ls_batch_solve(batch: &LsBatch) -> Result<Vec<f64>> {
    ls_batch_solve_with_rtol(batch, DEFAULT_RTOL)
}

pub fn ls_batch_solve_with_rtol(batch: &LsBatch, rtol: f64) -> Result<Vec<f64>> {
    if batch.is_empty() {
        return Err(Error::Input("least-squares batch is empty".into()));
    }
    let (gram, rhs) = batch.normal_equations();
    SymmetricEigen::new(&gram)?.pinv_apply(&rhs, rtol)
}

/// `P = E[Z Z^T]` under the product law: diagonal blocks `diag(pi_i)`,
/// off-diagonal blocks `pi_i pi_j^T`.
pub fn second_moment(policies: &[SamplingDistribution]) -> Result<Matrix> {
    let k = policies.first().map(SamplingDistribution::len).unwrap_or(0);
    if let Some(bad) = policies.iter().find(|p| p.len() != k) {
        return Err(Error::Topology(format!(
            "policies disagree on the number of actions ({} vs {k})",
            bad.len()
        )));
    }
    let dim = k * policies.len();
    let mut p = Matrix::zeros(dim, dim);
    for (i, pi) in policies.iter().enumerate() {
        for (j, pj) in policies.iter().enumerate() {
            for (a, &x) in pi.probs().iter().enumerate() {
                let row = p.row_mut(i * k + a);
                if i == j {
                    row[j * k + a] = x;
                } else {
                    for (b, &y) in pj.probs().iter().enumerate() {
                        row[j * k + b] = x * y;
                    }
                }
            }
        }
    }
    Ok(p)
}

/// Per-round estimate `loss * P^+ z`.
pub fn comband_estimate(loss: f64, z: &ArchitectureVector, pinv_p: &Matrix) -> Result<Vec<f64>> {
    if pinv_p.cols() != z.len() || pinv_p.rows() != z.len() {
        return Err(Error::Topology(format!(
            "pseudo-inverse is {}x{}, architecture vector has length {}",
            pinv_p.rows(),
            pinv_p.cols(),
            z.len()
        )));
    }
    let mut out = pinv_p.mul_vec(&z.to_f64())?;
    for x in &mut out {
        *x *= loss;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::pinv_symmetric;
    use crate::topology::encode;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn scores(b: &[f64]) -> AgentScores {
        AgentScores::new(b.to_vec()).unwrap()
    }

    fn hp(eta: f64, gamma: f64) -> ManasHyperparams {
        ManasHyperparams::new(eta, gamma, 1).unwrap()
    }

    #[test]
    fn defaults_match_formula() {
        let t = Topology::new(3, 10).unwrap();
        let d = manas_defaults(&t, 1000).unwrap();
        // 0.95 * sqrt(ln 10) / 10_000 and 1.05 * 10 * ln 10 / 1000
        assert!((d.eta - 1.4416e-4).abs() < 1e-8, "{}", d.eta);
        assert!((d.gamma - 0.024177).abs() < 1e-6, "{}", d.gamma);
        assert!(!d.degenerate);

        let one = manas_defaults(&Topology::new(3, 1).unwrap(), 77).unwrap();
        assert_eq!((one.eta, one.gamma, one.degenerate), (0.0, 0.0, true));

        // gamma is capped at 1 for very short horizons
        assert_eq!(manas_defaults(&t, 2).unwrap().gamma, 1.0);
        assert!(manas_defaults(&t, 0).is_err());
    }

    #[test]
    fn softmax_examples() {
        let p = softmax_distribution(&scores(&[0.0, 0.0, 0.0]), &hp(0.3, 0.0));
        for &x in p.probs() {
            assert!((x - 1.0 / 3.0).abs() < 1e-15);
        }

        let p = softmax_distribution(&scores(&[0.0, 1000.0]), &hp(1.0, 0.0));
        assert!((p.probs()[0] - 1.0).abs() < 1e-9);
        assert!(p.probs()[1] < 1e-9);

        for eta in [0.01, 1.0, 7.5] {
            let p = softmax_distribution(&scores(&[0.0, core::f64::consts::LN_2 / eta]), &hp(eta, 0.0));
            assert!((p.probs()[0] - 2.0 / 3.0).abs() < 1e-12);
            assert!((p.probs()[1] - 1.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn softmax_gamma_floor_and_zero_eta() {
        let p = softmax_distribution(&scores(&[0.0, 50.0, 1e6]), &hp(1.0, 0.3));
        assert!(p.probs().iter().all(|&x| x >= 0.3 / 3.0));
        let u = softmax_distribution(&scores(&[3.0, -2.0, 9.0, 0.0]), &hp(0.0, 0.0));
        assert!(u.probs().iter().all(|&x| x == 0.25));
    }

    #[test]
    fn exp3_examples() {
        let b = exp3_update(&scores(&[0.0, 0.0]), 0, 0.7, 0.5).unwrap();
        assert_eq!(b.as_slice(), &[1.4, 0.0]);
        let b = exp3_update(&scores(&[2.0, 3.0]), 1, 0.0, 0.1).unwrap();
        assert_eq!(b.as_slice(), &[2.0, 3.0]);
        assert_eq!(
            exp3_update(&scores(&[0.0]), 0, 1.0, 0.0).unwrap_err(),
            Error::ImportanceWeight(0.0)
        );
        assert!(exp3_update(&scores(&[0.0]), 0, 1.0, 1.5).is_err());
        assert!(exp3_update(&scores(&[0.0]), 0, 1.0, -0.2).is_err());
    }

    #[test]
    fn exp3_increment_is_unbiased() {
        // p = [0.25, 0.75], loss = 1: E[increment to b[0]] = 1.
        let dist = SamplingDistribution::new(vec![0.25, 0.75]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 100_000;
        let mut sum = 0.0;
        let mut sq = 0.0;
        for _ in 0..n {
            let a = dist.sample(&mut rng);
            let b = exp3_update(&AgentScores::zeros(2), a, 1.0, dist.probs()[a]).unwrap();
            let x = b.as_slice()[0];
            sum += x;
            sq += x * x;
        }
        let mean = sum / n as f64;
        let sd = libm::sqrt(sq / n as f64 - mean * mean);
        assert!((mean - 1.0).abs() <= 3.0 * sd / libm::sqrt(n as f64), "mean {mean}");
    }

    #[test]
    fn zipf_examples() {
        assert_eq!(zipf_distribution(&scores(&[4.2])).probs(), &[1.0]);

        let p = zipf_distribution(&scores(&[0.1, 0.4, 0.2, 0.3]));
        assert_eq!(p.probs(), &[12.0 / 25.0, 3.0 / 25.0, 6.0 / 25.0, 4.0 / 25.0]);

        let p = zipf_distribution(&AgentScores::zeros(10));
        assert_eq!(p.probs()[0], 2520.0 / 7381.0);
        assert!((p.probs()[0] - 0.34142).abs() < 1e-5);
    }

    #[test]
    fn zipf_ties_go_to_lower_index() {
        assert_eq!(ascending_ranks(&[1.0, 1.0, 0.5]), vec![2, 3, 1]);
    }

    #[test]
    fn zipf_large_k_falls_back_and_normalises() {
        let b: Vec<f64> = (0..200).map(|i| libm::sin(i as f64)).collect();
        let p = zipf_distribution(&scores(&b));
        let total: f64 = p.probs().iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert!(SamplingDistribution::new(p.probs().to_vec()).is_ok());
    }

    #[test]
    fn recommend_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let u = SamplingDistribution::uniform(3);
        assert_eq!(recommend(&scores(&[3.0, 1.0, 2.0]), RecommendMode::Argmin, &u, &mut rng), 1);
        assert_eq!(recommend(&scores(&[5.0, 5.0]), RecommendMode::Argmin, &u, &mut rng), 0);
        let point = SamplingDistribution::new(vec![0.0, 1.0]).unwrap();
        for _ in 0..1000 {
            assert_eq!(recommend(&scores(&[0.0, 0.0]), RecommendMode::Sample, &point, &mut rng), 1);
        }
    }

    #[test]
    fn distribution_validation() {
        assert!(SamplingDistribution::new(vec![]).is_err());
        assert!(SamplingDistribution::new(vec![0.5, 0.6]).is_err());
        assert!(SamplingDistribution::new(vec![-0.1, 1.1]).is_err());
        assert!(SamplingDistribution::new(vec![0.5, 0.5]).is_ok());
        let d = SamplingDistribution::new(vec![0.2, 0.0, 0.8]).unwrap();
        assert_eq!(d.invert(0.0), 0);
        assert_eq!(d.invert(0.2), 2);
        assert_eq!(d.invert(0.999_999), 2);
        assert_eq!(d.invert(1.0), 2);
    }

    #[test]
    fn ls_orthogonal_design() {
        let t = Topology::new(1, 2).unwrap();
        let mut batch = LsBatch::new(t);
        batch.push(&ArchitectureVector::from_bits(vec![1, 0]), 0.3).unwrap();
        batch.push(&ArchitectureVector::from_bits(vec![0, 1]), 0.9).unwrap();
        let beta = ls_batch_solve(&batch).unwrap();
        assert!((beta[0] - 0.3).abs() < 1e-15 && (beta[1] - 0.9).abs() < 1e-15);
    }

    #[test]
    fn ls_recovers_linear_predictions() {
        let t = Topology::new(2, 2).unwrap();
        let beta = [0.1, 0.9, 0.2, 0.8];
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut batch = LsBatch::new(t);
        for _ in 0..50 {
            let j = JointAction::new(vec![rng.random_range(0..2), rng.random_range(0..2)]);
            let z = encode(&j, &t).unwrap();
            batch.push(&z, z.dot(&beta)).unwrap();
        }
        let fit = ls_batch_solve(&batch).unwrap();
        for j in t.joint_actions() {
            let z = encode(&j, &t).unwrap();
            assert!((z.dot(&fit) - z.dot(&beta)).abs() < 1e-8);
        }
    }

    #[test]
    fn ls_rank_one_design() {
        let t = Topology::new(2, 3).unwrap();
        let mut batch = LsBatch::new(t);
        for _ in 0..10 {
            batch.push_joint(JointAction::new(vec![2, 1]), 0.6).unwrap();
        }
        let fit = ls_batch_solve(&batch).unwrap();
        assert!(batch.max_abs_residual(&fit) < 1e-14);
        // minimum norm: the two active coefficients share the loss equally
        assert!((fit[2] - 0.3).abs() < 1e-14 && (fit[4] - 0.3).abs() < 1e-14);
        assert!(fit.iter().enumerate().all(|(i, &x)| i == 2 || i == 4 || x.abs() < 1e-14));
    }

    #[test]
    fn ls_rejects_bad_input() {
        let t = Topology::new(1, 2).unwrap();
        let mut batch = LsBatch::new(t);
        assert!(ls_batch_solve(&batch).is_err());
        assert!(batch.push_joint(JointAction::new(vec![0]), f64::NAN).is_err());
        assert!(batch.push(&ArchitectureVector::from_bits(vec![1, 1]), 0.1).is_err());
    }

    #[test]
    fn sliding_batch_evicts_oldest() {
        let t = Topology::new(1, 2).unwrap();
        let mut batch = LsBatch::sliding(t, 2);
        for (a, l) in [(0, 1.0), (1, 2.0), (0, 3.0)] {
            batch.push_joint(JointAction::new(vec![a]), l).unwrap();
        }
        assert_eq!(batch.len(), 2);
        assert_eq!(batch.losses().collect::<Vec<_>>(), vec![2.0, 3.0]);
        assert!(batch.meets_sample_gate());
    }

    #[test]
    fn second_moment_examples() {
        let u = SamplingDistribution::uniform(2);
        let p = second_moment(core::slice::from_ref(&u)).unwrap();
        assert_eq!(p.as_slice(), &[0.5, 0.0, 0.0, 0.5]);

        let a = SamplingDistribution::new(vec![1.0, 0.0]).unwrap();
        let p = second_moment(&[a, u]).unwrap();
        assert_eq!([p[(0, 2)], p[(0, 3)], p[(1, 2)], p[(1, 3)]], [0.5, 0.5, 0.0, 0.0]);
        assert_eq!(p.max_asymmetry(), 0.0);
    }

    #[test]
    fn comband_examples() {
        let u = SamplingDistribution::uniform(2);
        let pinv = pinv_symmetric(&second_moment(&[u]).unwrap(), DEFAULT_RTOL).unwrap();
        let z = ArchitectureVector::from_bits(vec![1, 0]);
        let est = comband_estimate(1.0, &z, &pinv).unwrap();
        assert!((est[0] - 2.0).abs() < 1e-14 && est[1].abs() < 1e-14);
        assert_eq!(comband_estimate(0.0, &z, &pinv).unwrap(), vec![0.0, 0.0]);
        let long = ArchitectureVector::from_bits(vec![1, 0, 0]);
        assert!(matches!(comband_estimate(1.0, &long, &pinv), Err(Error::Topology(_))));
    }
}
