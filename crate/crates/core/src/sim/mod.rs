//! Synthetic comparative-judgement data and the simulation studies.

pub mod bench;
pub mod ess;

use faer::Mat;
use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};

use crate::dataset::{ComparisonDataset, Outcome};
use crate::error::{Error, Result};
use crate::graph::WardGraph;
use crate::linalg;
use crate::model::{sigmoid, tie_probability_for_gap};
use crate::spatial::{build_spatial_covariance, SpatialPrior};

pub use ess::effective_sample_size;

/// Where the prior correlation of a scenario comes from.
#[derive(Clone, Debug)]
pub enum PriorSource {
    /// Matrix-exponential kernel of a ward graph.
    Graph(WardGraph),
    /// A normalised `Wishart(I, N)` draw.
    Wishart,
}

#[derive(Clone, Debug)]
pub struct SimulationScenario {
    pub n_wards: usize,
    pub n_comparisons: usize,
    pub true_delta: f64,
    pub alpha2: f64,
    pub prior: PriorSource,
    pub seed: u64,
}

impl SimulationScenario {
    /// `n_wards` on a near-square grid graph with ten comparisons per ward.
    pub fn new(n_wards: usize, true_delta: f64) -> Self {
        Self {
            n_wards,
            n_comparisons: 10 * n_wards,
            true_delta,
            alpha2: 1.0,
            prior: PriorSource::Graph(WardGraph::near_square_grid(n_wards)),
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_wards < 2 {
            return Err(Error::InvalidParameter("a scenario needs at least two wards".into()));
        }
        if self.n_comparisons < 1 {
            return Err(Error::InvalidParameter("a scenario needs at least one comparison".into()));
        }
        if !(self.true_delta >= 0.0 && self.true_delta.is_finite()) {
            return Err(Error::InvalidParameter(format!("true delta {} must be non-negative", self.true_delta)));
        }
        if let PriorSource::Graph(g) = &self.prior {
            if g.n_wards() != self.n_wards {
                return Err(Error::DimensionMismatch {
                    expected: self.n_wards,
                    got: g.n_wards(),
                });
            }
        }
        Ok(())
    }

    /// The prior the data are generated under, at the scenario's `α²`.
    pub fn build_prior<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<SpatialPrior> {
        self.validate()?;
        match &self.prior {
            PriorSource::Graph(g) => build_spatial_covariance(g, self.alpha2),
            PriorSource::Wishart => simulate_prior_covariance_wishart(self.n_wards, self.alpha2, rng),
        }
    }
}

/// Draws one outcome of comparing `i` with `j`.
pub fn draw_outcome<R: Rng + ?Sized>(gap: f64, delta: f64, rng: &mut R) -> Outcome {
    let win = sigmoid(gap - delta);
    let tie = tie_probability_for_gap(gap, delta);
    let u: f64 = rng.random();
    if u < win {
        Outcome::I
    } else if u < win + tie {
        Outcome::Tie
    } else {
        Outcome::J
    }
}

/// Schedules `n_comparisons` pairs uniformly over unordered ward pairs and
/// draws each outcome from the tie model.
pub fn simulate_comparisons<R: Rng + ?Sized>(
    scenario: &SimulationScenario,
    lambda_true: &[f64],
    rng: &mut R,
) -> Result<ComparisonDataset> {
    scenario.validate()?;
    let n = scenario.n_wards;
    if lambda_true.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: lambda_true.len(),
        });
    }
    let mut data = ComparisonDataset::new(n);
    for _ in 0..scenario.n_comparisons {
        let i = rng.random_range(0..n);
        let j = (i + rng.random_range(1..n)) % n;
        let outcome = draw_outcome(lambda_true[i] - lambda_true[j], scenario.true_delta, rng);
        data.record(i, j, outcome)?;
    }
    Ok(data)
}

/// `Wishart(I, df)` by the Bartlett decomposition.
pub fn sample_wishart_identity<R: Rng + ?Sized>(n: usize, df: usize, rng: &mut R) -> Result<Mat<f64>> {
    if df < n {
        return Err(Error::InvalidParameter(format!("Wishart needs df >= {n}, got {df}")));
    }
    let mut a = Mat::<f64>::zeros(n, n);
    for i in 0..n {
        let chi = ChiSquared::new((df - i) as f64).expect("positive degrees of freedom");
        a[(i, i)] = chi.sample(rng).sqrt();
        for j in 0..i {
            a[(i, j)] = rng.sample(StandardNormal);
        }
    }
    let mut w = &a * a.transpose();
    linalg::symmetrise(&mut w);
    Ok(w)
}

const WISHART_RETRIES: usize = 20;

/// Normalised `Wishart(I, N)` draw as a prior correlation, scaled by `α²`.
/// Draws that are not numerically positive definite are redrawn.
pub fn simulate_prior_covariance_wishart<R: Rng + ?Sized>(
    n_wards: usize,
    alpha2: f64,
    rng: &mut R,
) -> Result<SpatialPrior> {
    if n_wards < 2 {
        return Err(Error::InvalidParameter("a Wishart prior needs at least two wards".into()));
    }
    for _ in 0..WISHART_RETRIES {
        let w = sample_wishart_identity(n_wards, n_wards, rng)?;
        let inv_sqrt: Vec<f64> = (0..n_wards).map(|k| 1.0 / w[(k, k)].sqrt()).collect();
        let mut k = Mat::from_fn(n_wards, n_wards, |i, j| inv_sqrt[i] * w[(i, j)] * inv_sqrt[j]);
        for d in 0..n_wards {
            k[(d, d)] = 1.0;
        }
        match SpatialPrior::from_correlation(k, alpha2) {
            Ok(prior) => return Ok(prior),
            Err(Error::NotPositiveDefinite(_)) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(Error::Degenerate(WISHART_RETRIES))
}

/// The `δ` at which two equal wards tie with probability `share`, found by
/// bisection on `tanh(δ/2) = share`.
pub fn calibrate_delta_for_tie_share(share: f64) -> Result<f64> {
    if !(share > 0.0 && share < 1.0) {
        return Err(Error::InvalidParameter(format!("tie share must lie in (0, 1), got {share}")));
    }
    let f = |d: f64| tie_probability_for_gap(0.0, d) - share;
    let (mut lo, mut hi) = (0.0, 1.0);
    while f(hi) < 0.0 {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-14 {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn calibration_inverts_tie_share() {
        let d = calibrate_delta_for_tie_share(0.5).unwrap();
        assert!((d - 1.0986122886681098).abs() < 1e-12);
        for p in [0.05, 0.2, 0.75] {
            let d = calibrate_delta_for_tie_share(p).unwrap();
            assert!((d - 2.0 * p.atanh()).abs() < 1e-12);
        }
        assert!(calibrate_delta_for_tie_share(1.0).is_err());
    }

    #[test]
    fn no_ties_without_delta() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let scenario = SimulationScenario::new(9, 0.0);
        let lambda: Vec<f64> = (0..9).map(|k| k as f64 * 0.1).collect();
        let d = simulate_comparisons(&scenario, &lambda, &mut rng).unwrap();
        assert_eq!(d.tie_events(), 0);
        assert_eq!(d.n_comparisons(), 90);
    }

    #[test]
    fn wishart_prior_has_unit_diagonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let prior = simulate_prior_covariance_wishart(16, 2.0, &mut rng).unwrap();
        for k in 0..16 {
            assert_eq!(prior.base_corr()[(k, k)], 1.0);
            assert!((prior.covariance()[(k, k)] - 2.0).abs() < 1e-15);
        }
    }
}
