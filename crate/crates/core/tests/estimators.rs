//! Least-squares refit, second moment and per-round estimator checked
//! against nalgebra's symmetric eigensolver and direct Monte Carlo.

use agentnas_core::linalg::{pinv_symmetric, Matrix, DEFAULT_RTOL};
use agentnas_core::policy::{comband_estimate, ls_batch_solve, second_moment, LsBatch, SamplingDistribution};
use agentnas_core::topology::encode;
use agentnas_core::{JointAction, Topology};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn design(topo: &Topology, joints: &[JointAction]) -> DMatrix<f64> {
    // rows are samples
    let mut z = DMatrix::zeros(joints.len(), topo.dim());
    for (s, j) in joints.iter().enumerate() {
        for (i, &a) in j.actions().iter().enumerate() {
            z[(s, i * topo.num_actions() + a)] = 1.0;
        }
    }
    z
}

// nalgebra's SVD misreports singular values of some rank-deficient tall
// matrices, so the oracle goes through its symmetric eigensolver instead
fn nalgebra_pinv(a: &DMatrix<f64>) -> DMatrix<f64> {
    let e = a.clone().symmetric_eigen();
    let tol = 1e-9 * e.eigenvalues.amax().max(1.0);
    let inv = e.eigenvalues.map(|v| if v.abs() > tol { 1.0 / v } else { 0.0 });
    &e.eigenvectors * DMatrix::from_diagonal(&inv) * e.eigenvectors.transpose()
}

fn min_norm_solution(z: &DMatrix<f64>, l: &DVector<f64>) -> DVector<f64> {
    nalgebra_pinv(&(z.transpose() * z)) * z.transpose() * l
}

fn to_na(m: &Matrix) -> DMatrix<f64> {
    DMatrix::from_row_slice(m.rows(), m.cols(), m.as_slice())
}

fn arb_batch() -> impl Strategy<Value = (Topology, Vec<JointAction>, Vec<f64>)> {
    (1usize..=4, 1usize..=3)
        .prop_filter("KN <= 12", |(n, k)| n * k <= 12)
        .prop_flat_map(|(n, k)| {
            let topo = Topology::new(n, k).unwrap();
            let joint = prop::collection::vec(0..k, n).prop_map(JointAction::new);
            (Just(topo), prop::collection::vec(joint, 1..30))
        })
        .prop_flat_map(|(topo, joints)| {
            let s = joints.len();
            (Just(topo), Just(joints), prop::collection::vec(-2.0f64..2.0, s))
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn ls_matches_nalgebra_minimum_norm((topo, joints, losses) in arb_batch()) {
        let mut batch = LsBatch::new(topo);
        for (j, &l) in joints.iter().zip(&losses) {
            batch.push_joint(j.clone(), l).unwrap();
        }
        let ours = ls_batch_solve(&batch).unwrap();
        let z = design(&topo, &joints);
        let want = min_norm_solution(&z, &DVector::from_vec(losses.clone()));
        for (a, b) in ours.iter().zip(want.iter()) {
            prop_assert!((a - b).abs() < 1e-8, "ours {:?} nalgebra {:?}", ours, want);
        }
    }

    #[test]
    fn ls_minimises_residuals((topo, joints, losses) in arb_batch(), dir in prop::collection::vec(-1.0f64..1.0, 12)) {
        let mut batch = LsBatch::new(topo);
        for (j, &l) in joints.iter().zip(&losses) {
            batch.push_joint(j.clone(), l).unwrap();
        }
        let beta = ls_batch_solve(&batch).unwrap();
        let rss = batch.residual_sum_of_squares(&beta);
        let moved: Vec<f64> = beta.iter().zip(&dir).map(|(b, d)| b + 0.05 * d).collect();
        prop_assert!(batch.residual_sum_of_squares(&moved) >= rss - 1e-9);
    }

    #[test]
    fn pinv_matches_nalgebra(entries in prop::collection::vec(-3.0f64..3.0, 1..40), n in 1usize..7) {
        // symmetric, possibly rank deficient: A = B Bᵀ with B n x r
        let r = (entries.len() / n).clamp(1, n);
        let mut b = DMatrix::zeros(n, r);
        for i in 0..n {
            for j in 0..r {
                b[(i, j)] = entries[(i * r + j) % entries.len()];
            }
        }
        let a = &b * b.transpose();
        let ours = pinv_symmetric(&Matrix::from_row_major(n, n, a.transpose().as_slice().to_vec()).unwrap(), DEFAULT_RTOL).unwrap();
        let want = nalgebra_pinv(&a);
        let diff = (to_na(&ours) - &want).abs().max();
        prop_assert!(diff < 1e-6 * want.norm().max(1.0), "diff {diff}");
    }
}

#[test]
fn noise_free_linear_loss_is_interpolated() {
    let topo = Topology::new(3, 3).unwrap();
    let beta = [0.3, 0.1, 0.7, 0.9, 0.2, 0.4, 0.5, 0.6, 0.05];
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut batch = LsBatch::new(topo);
    while batch.len() < topo.dim() * 2 {
        let j = JointAction::new((0..3).map(|_| rng.random_range(0..3)).collect());
        let z = encode(&j, &topo).unwrap();
        batch.push(&z, z.dot(&beta)).unwrap();
    }
    let fit = ls_batch_solve(&batch).unwrap();
    assert!(batch.max_abs_residual(&fit) < 1e-8);
    // every feasible architecture, not just the sampled ones
    for j in topo.joint_actions() {
        let z = encode(&j, &topo).unwrap();
        assert!((z.dot(&fit) - z.dot(&beta)).abs() < 1e-8);
    }
}

fn random_dist(rng: &mut ChaCha8Rng, k: usize) -> SamplingDistribution {
    let w: Vec<f64> = (0..k).map(|_| rng.random::<f64>() + 0.05).collect();
    let s: f64 = w.iter().sum();
    SamplingDistribution::new(w.iter().map(|x| x / s).collect()).unwrap()
}

#[test]
fn second_moment_matches_exact_expectation_and_is_psd() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for (n, k) in [(1, 3), (2, 2), (3, 3), (2, 4)] {
        let topo = Topology::new(n, k).unwrap();
        let dists: Vec<SamplingDistribution> = (0..n).map(|_| random_dist(&mut rng, k)).collect();
        let p = to_na(&second_moment(&dists).unwrap());
        // exact expectation over every joint action
        let mut exact = DMatrix::zeros(n * k, n * k);
        for j in topo.joint_actions() {
            let w: f64 = j.actions().iter().zip(&dists).map(|(&a, d)| d.probs()[a]).product();
            let z = DVector::from_vec(encode(&j, &topo).unwrap().to_f64());
            exact += w * &z * z.transpose();
        }
        assert!((&p - &exact).abs().max() < 1e-12);
        let eig = p.clone().symmetric_eigen();
        assert!(eig.eigenvalues.iter().all(|&v| v > -1e-12));
    }
}

#[test]
fn second_moment_matches_monte_carlo() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let topo = Topology::new(2, 3).unwrap();
    let dists: Vec<SamplingDistribution> = (0..2).map(|_| random_dist(&mut rng, 3)).collect();
    let p = to_na(&second_moment(&dists).unwrap());
    let draws = 100_000;
    let mut acc = DMatrix::<f64>::zeros(6, 6);
    for _ in 0..draws {
        let j = JointAction::new(dists.iter().map(|d| d.sample(&mut rng)).collect());
        let z = DVector::from_vec(encode(&j, &topo).unwrap().to_f64());
        acc += &z * z.transpose();
    }
    acc /= draws as f64;
    // each entry is a Bernoulli mean: 3 sigma is at most 1.5 / sqrt(draws)
    assert!((&acc - &p).abs().max() < 1.5 / (draws as f64).sqrt());
}

#[test]
fn comband_agrees_with_least_squares_in_expectation() {
    // E[L P† z] = P† E[z zᵀ] β = P† P β, the projection of β on the span of
    // the architecture vectors; so is the LS fit on a spanning batch
    let topo = Topology::new(2, 3).unwrap();
    let beta = [0.2, 0.6, 0.9, 0.1, 0.4, 0.3];
    let dists = vec![SamplingDistribution::uniform(3); 2];
    let pinv = pinv_symmetric(&second_moment(&dists).unwrap(), DEFAULT_RTOL).unwrap();
    let mut mean = [0.0; 6];
    let mut batch = LsBatch::new(topo);
    for j in topo.joint_actions() {
        let z = encode(&j, &topo).unwrap();
        let loss = z.dot(&beta);
        let est = comband_estimate(loss, &z, &pinv).unwrap();
        for (m, e) in mean.iter_mut().zip(&est) {
            *m += e / 9.0;
        }
        batch.push(&z, loss).unwrap();
    }
    let ls = ls_batch_solve(&batch).unwrap();
    for j in topo.joint_actions() {
        let z = encode(&j, &topo).unwrap();
        assert!((z.dot(&mean) - z.dot(&ls)).abs() < 1e-10);
        assert!((z.dot(&mean) - z.dot(&beta)).abs() < 1e-10);
    }
}
