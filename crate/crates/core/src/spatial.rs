//! Correlated Gaussian prior on ward qualities built from the ward graph.
//!
//! The base correlation is `K = D^{-1/2} e^A D^{-1/2}` with `D = diag(e^A)`, so
//! `K` has a unit diagonal and the prior covariance is `Σ = α² K`.

use faer::Mat;
use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::WardGraph;
use crate::linalg;

/// `InverseGamma(shape, scale)` with density `∝ x^{−shape−1} e^{−scale/x}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InverseGammaPrior {
    pub shape: f64,
    pub scale: f64,
}

impl Default for InverseGammaPrior {
    fn default() -> Self {
        Self {
            shape: 0.01,
            scale: 0.01,
        }
    }
}

impl InverseGammaPrior {
    pub fn new(shape: f64, scale: f64) -> Result<Self> {
        if !(shape > 0.0 && scale > 0.0 && shape.is_finite() && scale.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "inverse-gamma shape and scale must be positive, got ({shape}, {scale})"
            )));
        }
        Ok(Self { shape, scale })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let gamma = Gamma::new(self.shape, 1.0).expect("validated shape");
        self.scale / gamma.sample(rng)
    }
}

/// Prior `λ ~ N(μ, α² K)` plus the inverse-gamma prior on `α²`.
#[derive(Clone, Debug)]
pub struct SpatialPrior {
    mean: Vec<f64>,
    base_corr: Mat<f64>,
    base_precision: Mat<f64>,
    base_cholesky: Mat<f64>,
    corr_total: f64,
    alpha2: f64,
    alpha2_prior: InverseGammaPrior,
}

impl SpatialPrior {
    /// Wraps a correlation matrix, checking symmetry, unit diagonal and
    /// positive definiteness.
    pub fn from_correlation(base_corr: Mat<f64>, alpha2: f64) -> Result<Self> {
        let n = base_corr.nrows();
        if base_corr.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: base_corr.ncols(),
            });
        }
        if !(alpha2 > 0.0 && alpha2.is_finite()) {
            return Err(Error::InvalidParameter(format!("alpha2 must be positive, got {alpha2}")));
        }
        if !linalg::is_symmetric(&base_corr, 1e-12) {
            return Err(Error::InvalidParameter("base correlation is not symmetric".into()));
        }
        if let Some(k) = (0..n).find(|&k| (base_corr[(k, k)] - 1.0).abs() > 1e-10) {
            return Err(Error::InvalidParameter(format!(
                "base correlation diagonal entry {k} is {}",
                base_corr[(k, k)]
            )));
        }
        let base_cholesky = linalg::cholesky_lower(&base_corr)?;
        let base_precision = linalg::spd_inverse_from_cholesky(&base_cholesky);
        let corr_total = (0..n).map(|j| base_corr.col_as_slice(j).iter().sum::<f64>()).sum();
        Ok(Self {
            mean: vec![0.0; n],
            base_corr,
            base_precision,
            base_cholesky,
            corr_total,
            alpha2,
            alpha2_prior: InverseGammaPrior::default(),
        })
    }

    pub fn with_mean(mut self, mean: Vec<f64>) -> Result<Self> {
        if mean.len() != self.n_wards() {
            return Err(Error::DimensionMismatch {
                expected: self.n_wards(),
                got: mean.len(),
            });
        }
        self.mean = mean;
        Ok(self)
    }

    pub fn with_alpha2(mut self, alpha2: f64) -> Result<Self> {
        if !(alpha2 > 0.0 && alpha2.is_finite()) {
            return Err(Error::InvalidParameter(format!("alpha2 must be positive, got {alpha2}")));
        }
        self.alpha2 = alpha2;
        Ok(self)
    }

    pub fn with_alpha2_prior(mut self, prior: InverseGammaPrior) -> Self {
        self.alpha2_prior = prior;
        self
    }

    pub fn n_wards(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn alpha2(&self) -> f64 {
        self.alpha2
    }

    pub fn alpha2_prior(&self) -> InverseGammaPrior {
        self.alpha2_prior
    }

    /// `K`, unit diagonal.
    pub fn base_corr(&self) -> &Mat<f64> {
        &self.base_corr
    }

    /// `K⁻¹`.
    pub fn base_precision(&self) -> &Mat<f64> {
        &self.base_precision
    }

    /// Lower Cholesky factor of `K`.
    pub fn base_cholesky(&self) -> &Mat<f64> {
        &self.base_cholesky
    }

    /// `Σ = α² K`.
    pub fn covariance(&self) -> Mat<f64> {
        let n = self.n_wards();
        Mat::from_fn(n, n, |i, j| self.alpha2 * self.base_corr[(i, j)])
    }

    /// `(λ − μ)ᵀ K⁻¹ (λ − μ)`.
    pub fn quadratic_form(&self, lambda: &[f64]) -> f64 {
        let centred: Vec<f64> = lambda.iter().zip(&self.mean).map(|(l, m)| l - m).collect();
        linalg::quadratic_form(&self.base_precision, &centred)
    }

    /// `1ᵀ K 1`.
    pub fn corr_total(&self) -> f64 {
        self.corr_total
    }

    /// Prior variance of the ward average under scale `alpha2`: `α² 1ᵀK1 / N²`.
    pub fn average_variance(&self, alpha2: f64) -> f64 {
        let n = self.n_wards() as f64;
        alpha2 * self.corr_total / (n * n)
    }

    /// Draws `λ ~ N(μ, α² K)`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let w: Vec<f64> = (0..self.n_wards())
            .map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal))
            .collect();
        let scale = self.alpha2.sqrt();
        linalg::lower_mul(&self.base_cholesky, &w)
            .into_iter()
            .zip(&self.mean)
            .map(|(x, m)| m + scale * x)
            .collect()
    }
}

/// Builds the graph prior `Σ = α² D^{-1/2} e^A D^{-1/2}` with zero mean.
pub fn build_spatial_covariance(graph: &WardGraph, alpha2: f64) -> Result<SpatialPrior> {
    let n = graph.n_wards();
    if n == 0 {
        return Err(Error::InvalidGraph("graph has no wards".into()));
    }
    let exp_a = linalg::symmetric_exponential(&graph.adjacency_matrix())?;
    let inv_sqrt: Vec<f64> = (0..n).map(|k| 1.0 / exp_a[(k, k)].sqrt()).collect();
    let mut k = Mat::from_fn(n, n, |i, j| inv_sqrt[i] * exp_a[(i, j)] * inv_sqrt[j]);
    for d in 0..n {
        k[(d, d)] = 1.0;
    }
    SpatialPrior::from_correlation(k, alpha2)
}

/// Full conditional of `α²` given `λ`: `IG(shape + N/2, scale + (λ−μ)ᵀK⁻¹(λ−μ)/2)`.
pub fn alpha2_conditional(lambda: &[f64], prior: &SpatialPrior) -> Result<InverseGammaPrior> {
    if lambda.len() != prior.n_wards() {
        return Err(Error::DimensionMismatch {
            expected: prior.n_wards(),
            got: lambda.len(),
        });
    }
    let p = prior.alpha2_prior();
    InverseGammaPrior::new(
        p.shape + 0.5 * lambda.len() as f64,
        p.scale + 0.5 * prior.quadratic_form(lambda),
    )
}

/// Draws `α²` from its conjugate full conditional.
pub fn sample_alpha2<R: Rng + ?Sized>(lambda: &[f64], prior: &SpatialPrior, rng: &mut R) -> Result<f64> {
    Ok(alpha2_conditional(lambda, prior)?.sample(rng))
}
