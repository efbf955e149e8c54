//! Each conditional update checked against a density normalised on a grid.

use btties_core::dataset::{ComparisonDataset, Outcome};
use btties_core::gibbs::{lambda_conditional, mh_step_delta, recentre, sample_lambda, ObservedPairs, SamplerState};
use btties_core::graph::WardGraph;
use btties_core::linalg::sample_gaussian_canonical;
use btties_core::spatial::{build_spatial_covariance, sample_alpha2, InverseGammaPrior};
use btties_oracles::{ks_one_sample, Grid1d, Grid2d};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Solves `A x = b` by Gaussian elimination with partial pivoting.
fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&r, &s| a[r][col].abs().total_cmp(&a[s][col].abs())).unwrap();
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    x
}

struct TwoWard {
    pairs: ObservedPairs,
    state: SamplerState,
    prior: btties_core::SpatialPrior,
}

/// Two adjacent wards, one comparison won by ward 0, `z = 2`, `δ = 1.5`.
fn two_ward_instance() -> TwoWard {
    let mut d = ComparisonDataset::new(2);
    d.record(0, 1, Outcome::I).unwrap();
    let prior = build_spatial_covariance(&WardGraph::path(2), 0.8).unwrap();
    let pairs = ObservedPairs::from_dataset(&d);
    let state = SamplerState {
        lambda: vec![0.0, 0.0],
        z: vec![2.0],
        delta: 1.5,
        alpha2: 0.8,
        iteration: 0,
    };
    TwoWard { pairs, state, prior }
}

/// Prior × augmented likelihood of one pair, written out from scratch.
fn two_ward_oracle() -> Grid2d {
    let r = 1f64.tanh();
    let alpha2 = 0.8;
    let (kappa, z, delta) = (0.5, 2.0, 1.5);
    Grid2d::from_log_density((-6.0, 6.0), (-6.0, 6.0), 801, |a, b| {
        let quad = (a * a - 2.0 * r * a * b + b * b) / (1.0 - r * r);
        let psi = a - b - delta;
        -0.5 * quad / alpha2 + kappa * psi - 0.5 * z * psi * psi
    })
}

#[test]
fn lambda_conditional_matches_grid_oracle() {
    let inst = two_ward_instance();
    let oracle = two_ward_oracle();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let n = 20_000;
    let mut first = Vec::with_capacity(n);
    let mut second = Vec::with_capacity(n);
    let mut state = inst.state.clone();
    for _ in 0..n {
        sample_lambda(&mut state, &inst.pairs, &inst.prior, &[0.0, 0.0], &mut rng).unwrap();
        first.push(state.lambda[0]);
        second.push(state.lambda[1]);
    }
    let p1 = ks_one_sample(&first, |x| oracle.first.cdf(x)).p_value;
    let p2 = ks_one_sample(&second, |x| oracle.second.cdf(x)).p_value;
    assert!(p1 > 0.01 && p2 > 0.01, "KS p-values {p1}, {p2}");
}

#[test]
fn opposite_delta_sign_is_rejected_by_oracle() {
    let inst = two_ward_instance();
    let oracle = two_ward_oracle();
    let (precision, mut linear) = lambda_conditional(&inst.state, &inst.pairs, &inst.prior, &[0.0, 0.0]);
    // Flip the δz part of the linear term: κ − δz instead of κ + δz.
    let shift = 2.0 * inst.state.delta * inst.state.z[0];
    linear[0] -= shift;
    linear[1] += shift;
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let draws: Vec<f64> = (0..20_000)
        .map(|_| sample_gaussian_canonical(&precision, &linear, &mut rng).unwrap()[0])
        .collect();
    let p = ks_one_sample(&draws, |x| oracle.first.cdf(x)).p_value;
    assert!(p < 1e-6, "wrong sign not detected, p = {p}");
}

#[test]
fn lambda_conditional_without_data_is_prior() {
    let prior = build_spatial_covariance(&WardGraph::path(3), 1.0).unwrap();
    let pairs = ObservedPairs::from_dataset(&ComparisonDataset::new(3));
    let mut state = SamplerState {
        lambda: vec![0.0; 3],
        z: vec![],
        delta: 0.5,
        alpha2: 1.0,
        iteration: 0,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let n = 100_000;
    let mut cross = [[0.0; 3]; 3];
    let mut sum = [0.0; 3];
    for _ in 0..n {
        sample_lambda(&mut state, &pairs, &prior, &[0.0; 3], &mut rng).unwrap();
        for i in 0..3 {
            sum[i] += state.lambda[i];
            for j in 0..3 {
                cross[i][j] += state.lambda[i] * state.lambda[j];
            }
        }
    }
    let k = prior.base_corr();
    for i in 0..3 {
        assert!((sum[i] / n as f64).abs() < 4.0 / (n as f64).sqrt());
        for j in 0..3 {
            // Standard error of a product moment is at most ~sqrt(2/n).
            assert!((cross[i][j] / n as f64 - k[(i, j)]).abs() < 4.0 * (2.0 / n as f64).sqrt());
        }
    }
}

#[test]
fn delta_conditional_matches_quadrature() {
    let mut d = ComparisonDataset::new(3);
    for (i, j, o, times) in [
        (0, 1, Outcome::I, 6),
        (0, 1, Outcome::Tie, 3),
        (1, 2, Outcome::J, 4),
        (0, 2, Outcome::Tie, 2),
        (2, 0, Outcome::I, 3),
    ] {
        for _ in 0..times {
            d.record(i, j, o).unwrap();
        }
    }
    let pairs = ObservedPairs::from_dataset(&d);
    let lambda = vec![0.4, -0.1, 0.2];
    let rate = 0.01;

    // Log conditional built from the outcome probabilities directly.
    let log_cond = |delta: f64| {
        let sig = |x: f64| 1.0 / (1.0 + (-x).exp());
        let mut total = -rate * delta;
        for i in 0..3 {
            for j in 0..3 {
                if i == j {
                    continue;
                }
                let gap = lambda[i] - lambda[j];
                total += d.wins(i, j) as f64 * sig(gap - delta).ln();
                if i < j && d.ties(i, j) > 0 {
                    let tie = (2.0 * delta).exp_m1() * sig(gap - delta) * sig(-gap - delta);
                    total += d.ties(i, j) as f64 * tie.ln();
                }
            }
        }
        total
    };
    let oracle = Grid1d::from_log_density(1e-9, 6.0, 20_001, log_cond);

    let mut state = SamplerState {
        lambda: lambda.clone(),
        z: vec![],
        delta: 0.5,
        alpha2: 1.0,
        iteration: 0,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(24);
    for _ in 0..2_000 {
        mh_step_delta(&mut state, &pairs, rate, 0.5, &mut rng);
    }
    let thin = 25;
    let draws: Vec<f64> = (0..4_000 * thin)
        .filter_map(|k| {
            mh_step_delta(&mut state, &pairs, rate, 0.5, &mut rng);
            (k % thin == 0).then_some(state.delta)
        })
        .collect();
    let p = ks_one_sample(&draws, |x| oracle.cdf(x)).p_value;
    assert!(p > 0.01, "KS p = {p}");
}

#[test]
fn alpha2_conditional_matches_quadrature() {
    let prior = build_spatial_covariance(&WardGraph::cycle(5), 1.0)
        .unwrap()
        .with_alpha2_prior(InverseGammaPrior::new(0.01, 0.01).unwrap());
    let lambda = vec![0.9, -0.3, 0.4, -1.2, 0.1];
    let k = prior.base_corr();
    let rows: Vec<Vec<f64>> = (0..5).map(|i| (0..5).map(|j| k[(i, j)]).collect()).collect();
    let q: f64 = solve(rows, lambda.clone()).iter().zip(&lambda).map(|(a, b)| a * b).sum();

    // IG prior × N(λ | 0, α² K), as a function of α².
    let log_density = |a2: f64| -(0.01 + 1.0) * a2.ln() - 0.01 / a2 - 2.5 * a2.ln() - 0.5 * q / a2;
    let oracle = Grid1d::from_log_density(1e-4, 60.0, 200_001, log_density);

    let mut rng = ChaCha8Rng::seed_from_u64(25);
    let draws: Vec<f64> = (0..20_000).map(|_| sample_alpha2(&lambda, &prior, &mut rng).unwrap()).collect();
    let p = ks_one_sample(&draws, |x| oracle.cdf(x)).p_value;
    assert!(p > 0.01, "KS p = {p}");
}

#[test]
fn recentre_level_variance() {
    let prior = build_spatial_covariance(&WardGraph::empty(4), 1.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(26);
    let n = 100_000;
    let mut lambda = vec![0.0; 4];
    let levels: Vec<f64> = (0..n).map(|_| recentre(&mut lambda, &prior, 1.0, &mut rng)).collect();
    let var = levels.iter().map(|l| l * l).sum::<f64>() / n as f64;
    // Variance of a sample variance of normals: 2σ⁴/n.
    assert!((var - 0.25).abs() < 4.0 * (2.0 * 0.0625 / n as f64).sqrt(), "{var}");
}
