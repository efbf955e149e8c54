//! Closed-form probabilities and likelihoods for the standard and tied
//! Bradley–Terry models.
//!
//! Ward `i` beats ward `j` with probability `σ(λ_i − λ_j − δ)`, and the pair is
//! declared tied with probability `(e^{2δ} − 1) σ(λ_i − λ_j − δ) σ(λ_j − λ_i − δ)`.
//! With `δ = 0` the tie probability vanishes and the model is the standard
//! Bradley–Terry model. Every probability is evaluated through the
//! log-sigmoid so that quality gaps of several hundred units stay finite.

use serde::{Deserialize, Serialize};

use crate::dataset::ComparisonDataset;
use crate::error::{Error, Result};

/// Ward quality parameters on the log scale.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct QualityVector(Vec<f64>);

impl QualityVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "quality parameter {bad} is not finite"
            )));
        }
        Ok(Self(values))
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn mean(&self) -> f64 {
        if self.0.is_empty() {
            return 0.0;
        }
        self.0.iter().sum::<f64>() / self.0.len() as f64
    }

    /// Shifts every entry by `offset`.
    pub fn translated(&self, offset: f64) -> Self {
        Self(self.0.iter().map(|v| v + offset).collect())
    }

    fn check_index(&self, index: usize) -> Result<()> {
        if index >= self.0.len() {
            return Err(Error::WardOutOfRange {
                index,
                n_wards: self.0.len(),
            });
        }
        Ok(())
    }
}

impl std::ops::Index<usize> for QualityVector {
    type Output = f64;

    fn index(&self, index: usize) -> &f64 {
        &self.0[index]
    }
}

/// Tie propensity `δ ≥ 0`; larger values make ties more likely.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct TieParameter(f64);

impl TieParameter {
    pub const ZERO: TieParameter = TieParameter(0.0);

    pub fn new(delta: f64) -> Result<Self> {
        if !delta.is_finite() || delta < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "tie parameter must be finite and non-negative, got {delta}"
            )));
        }
        Ok(Self(delta))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for TieParameter {
    type Error = Error;

    fn try_from(value: f64) -> Result<Self> {
        Self::new(value)
    }
}

impl From<TieParameter> for f64 {
    fn from(value: TieParameter) -> f64 {
        value.0
    }
}

/// The regressor `x_ij` with `+1` at `i` and `−1` at `j`. It is never
/// materialised; [`PairRegressor::dot`] gives `x_ij · λ` directly.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct PairRegressor {
    i: usize,
    j: usize,
}

impl PairRegressor {
    pub fn new(i: usize, j: usize) -> Result<Self> {
        if i == j {
            return Err(Error::InvalidPair(i));
        }
        Ok(Self { i, j })
    }

    pub fn i(self) -> usize {
        self.i
    }

    pub fn j(self) -> usize {
        self.j
    }

    pub fn dot(self, lambda: &[f64]) -> f64 {
        lambda[self.i] - lambda[self.j]
    }
}

/// `log σ(x) = −log(1 + e^{−x})`, finite for all finite `x`.
#[inline]
pub fn log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `log(e^{2δ} − 1)`; `−∞` at `δ = 0`.
#[inline]
pub fn log_tie_factor(delta: f64) -> f64 {
    let two = 2.0 * delta;
    if two > 30.0 {
        two + (-(-two).exp()).ln_1p()
    } else {
        two.exp_m1().ln()
    }
}

/// Probabilities of the three outcomes of comparing `i` with `j`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OutcomeProbabilities {
    pub win: f64,
    pub loss: f64,
    pub tie: f64,
}

fn quality_gap(lambda: &QualityVector, i: usize, j: usize) -> Result<f64> {
    lambda.check_index(i)?;
    lambda.check_index(j)?;
    Ok(PairRegressor::new(i, j)?.dot(lambda.as_slice()))
}

/// Tie probability as a function of the quality gap `λ_i − λ_j`.
pub fn tie_probability_for_gap(gap: f64, delta: f64) -> f64 {
    if delta == 0.0 {
        return 0.0;
    }
    (log_tie_factor(delta) + log_sigmoid(gap - delta) + log_sigmoid(-gap - delta)).exp()
}

/// Probability that ward `i` is judged higher than ward `j`.
pub fn win_probability(lambda: &QualityVector, i: usize, j: usize, delta: TieParameter) -> Result<f64> {
    let gap = quality_gap(lambda, i, j)?;
    Ok(sigmoid(gap - delta.value()))
}

/// Probability that the comparison of `i` and `j` is declared a tie.
pub fn tie_probability(lambda: &QualityVector, i: usize, j: usize, delta: TieParameter) -> Result<f64> {
    let gap = quality_gap(lambda, i, j)?;
    Ok(tie_probability_for_gap(gap, delta.value()))
}

pub fn outcome_probabilities(
    lambda: &QualityVector,
    i: usize,
    j: usize,
    delta: TieParameter,
) -> Result<OutcomeProbabilities> {
    let gap = quality_gap(lambda, i, j)?;
    let d = delta.value();
    Ok(OutcomeProbabilities {
        win: sigmoid(gap - d),
        loss: sigmoid(-gap - d),
        tie: tie_probability_for_gap(gap, d),
    })
}

fn check_dims(dataset: &ComparisonDataset, lambda: &QualityVector) -> Result<()> {
    if dataset.n_wards() != lambda.len() {
        return Err(Error::DimensionMismatch {
            expected: dataset.n_wards(),
            got: lambda.len(),
        });
    }
    Ok(())
}

/// Log-likelihood of the tie model, up to the multinomial constant.
///
/// Uses the factored form `T·log(e^{2δ} − 1) + Σ_{i≠j} (y_ij + t_ij) log σ(λ_i − λ_j − δ)`
/// where `T` is the number of tie events (each stored symmetrically in `t`).
pub fn log_likelihood_ties(
    dataset: &ComparisonDataset,
    lambda: &QualityVector,
    delta: TieParameter,
) -> Result<f64> {
    check_dims(dataset, lambda)?;
    let d = delta.value();
    let lam = lambda.as_slice();
    let n = dataset.n_wards();
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let count = dataset.wins(i, j) + dataset.ties(i, j);
            if count > 0 {
                total += count as f64 * log_sigmoid(lam[i] - lam[j] - d);
            }
        }
    }
    let tie_events = dataset.tie_events();
    if tie_events > 0 {
        total += tie_events as f64 * log_tie_factor(d);
    }
    Ok(total)
}

/// Log-likelihood of the standard model, without the binomial constants.
pub fn log_likelihood_standard(dataset: &ComparisonDataset, lambda: &QualityVector) -> Result<f64> {
    check_dims(dataset, lambda)?;
    if dataset.tie_events() > 0 {
        return Err(Error::TiesPresent(dataset.tie_events()));
    }
    let lam = lambda.as_slice();
    let n = dataset.n_wards();
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            let y = if i == j { 0 } else { dataset.wins(i, j) };
            if y > 0 {
                total += y as f64 * log_sigmoid(lam[i] - lam[j]);
            }
        }
    }
    Ok(total)
}
