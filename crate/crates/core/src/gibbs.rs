//! Pólya-Gamma augmented Gibbs sampler for the tie model.
//!
//! Each iteration redraws the latent `z` for every observed ordered pair, then
//! `λ` from its Gaussian full conditional, `δ` by a random-walk Metropolis
//! step, `α²` from its inverse-gamma conditional, and finally translates `λ`
//! so that its mean equals a draw of the ward average from the prior.

use std::io::Write;
use std::time::Instant;

use faer::Mat;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dataset::ComparisonDataset;
use crate::error::{Error, Result};
use crate::exec::{substream, Execution};
use crate::linalg;
use crate::model::{log_sigmoid, log_tie_factor};
use crate::polya_gamma::{sample_pg, PgParams};
use crate::spatial::{sample_alpha2, InverseGammaPrior, SpatialPrior};

/// Latent draws per random substream.
pub const Z_CHUNK: usize = 64;

/// Acceptance rate the adaptive random-walk steps aim for.
pub const TARGET_ACCEPTANCE: f64 = 0.44;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplerConfig {
    pub n_iterations: usize,
    pub burn_in: usize,
    /// Rate `χ` of the exponential prior on `δ`.
    pub delta_prior_rate: f64,
    pub alpha2_prior: InverseGammaPrior,
    /// Initial standard deviation of the `δ` random walk.
    pub delta_step: f64,
    /// Initial standard deviation of the per-ward random walk (baseline only).
    pub lambda_step: f64,
    /// Tune the random-walk steps during burn-in.
    pub adapt: bool,
    pub learn_alpha2: bool,
    pub fixed_delta: Option<f64>,
    pub initial_delta: f64,
    pub seed: u64,
    pub execution: Execution,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            n_iterations: 5000,
            burn_in: 100,
            delta_prior_rate: 0.01,
            alpha2_prior: InverseGammaPrior::default(),
            delta_step: 0.1,
            lambda_step: 0.5,
            adapt: true,
            learn_alpha2: true,
            fixed_delta: None,
            initial_delta: 0.5,
            seed: 0,
            execution: Execution::default(),
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.burn_in >= self.n_iterations {
            return Err(Error::InvalidParameter(format!(
                "burn-in ({}) must be smaller than the number of iterations ({})",
                self.burn_in, self.n_iterations
            )));
        }
        if !(self.delta_prior_rate > 0.0 && self.delta_prior_rate.is_finite()) {
            return Err(Error::InvalidParameter("delta prior rate must be positive".into()));
        }
        if !(self.delta_step > 0.0 && self.lambda_step > 0.0) {
            return Err(Error::InvalidParameter("random-walk steps must be positive".into()));
        }
        if let Some(d) = self.fixed_delta {
            if !(d >= 0.0 && d.is_finite()) {
                return Err(Error::InvalidParameter(format!("fixed delta {d} must be non-negative")));
            }
        }
        if !(self.initial_delta >= 0.0 && self.initial_delta.is_finite()) {
            return Err(Error::InvalidParameter("initial delta must be non-negative".into()));
        }
        InverseGammaPrior::new(self.alpha2_prior.shape, self.alpha2_prior.scale)?;
        Ok(())
    }

    pub fn n_kept(&self) -> usize {
        self.n_iterations - self.burn_in
    }
}

/// Ordered pairs `(i, j)` with `b = y_ij + t_ij ≥ 1`, in a flat layout.
#[derive(Clone, Debug)]
pub struct ObservedPairs {
    pub n_wards: usize,
    pub first: Vec<usize>,
    pub second: Vec<usize>,
    pub counts: Vec<u32>,
    pub tie_events: u64,
}

impl ObservedPairs {
    pub fn from_dataset(dataset: &ComparisonDataset) -> Self {
        let observed = dataset.observed_pairs();
        Self {
            n_wards: dataset.n_wards(),
            first: observed.iter().map(|p| p.0).collect(),
            second: observed.iter().map(|p| p.1).collect(),
            counts: observed.iter().map(|p| p.2).collect(),
            tie_events: dataset.tie_events(),
        }
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// Tie-model log-likelihood (same value as
    /// [`log_likelihood_ties`](crate::model::log_likelihood_ties)).
    pub fn log_likelihood(&self, lambda: &[f64], delta: f64) -> f64 {
        let mut total: f64 = (0..self.len())
            .map(|p| self.counts[p] as f64 * log_sigmoid(lambda[self.first[p]] - lambda[self.second[p]] - delta))
            .sum();
        if self.tie_events > 0 {
            total += self.tie_events as f64 * log_tie_factor(delta);
        }
        total
    }

    /// Unnormalised log full conditional of `δ`; `−∞` outside `δ > 0` when
    /// ties are present and for `δ < 0` always.
    pub fn delta_log_conditional(&self, lambda: &[f64], delta: f64, rate: f64) -> f64 {
        if delta < 0.0 {
            return f64::NEG_INFINITY;
        }
        self.log_likelihood(lambda, delta) - rate * delta
    }
}

/// Current values of every block of the sampler.
#[derive(Clone, Debug)]
pub struct SamplerState {
    pub lambda: Vec<f64>,
    /// One latent value per entry of [`ObservedPairs`].
    pub z: Vec<f64>,
    pub delta: f64,
    pub alpha2: f64,
    pub iteration: usize,
}

impl SamplerState {
    /// `λ = 0`, the configured initial `δ`, and `z` drawn at zero tilt.
    pub fn initial(pairs: &ObservedPairs, prior: &SpatialPrior, config: &SamplerConfig, rng: &mut ChaCha8Rng) -> Result<Self> {
        let mut state = Self {
            lambda: vec![0.0; pairs.n_wards],
            z: vec![0.0; pairs.len()],
            delta: config.fixed_delta.unwrap_or(config.initial_delta),
            alpha2: if config.learn_alpha2 { 1.0 } else { prior.alpha2() },
            iteration: 0,
        };
        let zero_tilt = Self {
            delta: 0.0,
            ..state.clone()
        };
        state.z = draw_z(&zero_tilt, pairs, rng.random(), config.execution)?;
        Ok(state)
    }
}

fn draw_z(state: &SamplerState, pairs: &ObservedPairs, key: u64, exec: Execution) -> Result<Vec<f64>> {
    let tilts: Vec<f64> = (0..pairs.len())
        .map(|p| state.lambda[pairs.first[p]] - state.lambda[pairs.second[p]] - state.delta)
        .collect();
    if let Some(bad) = tilts.iter().find(|c| !c.is_finite()) {
        return Err(Error::InvalidParameter(format!("non-finite latent tilt {bad}")));
    }
    let mut z = vec![0.0; pairs.len()];
    exec.for_each_chunk(&mut z, Z_CHUNK, |k, chunk| {
        let mut rng = substream(key, k);
        let start = k * Z_CHUNK;
        for (offset, v) in chunk.iter_mut().enumerate() {
            let p = start + offset;
            let params = PgParams::new(pairs.counts[p], tilts[p]).expect("validated counts and tilts");
            *v = sample_pg(&params, &mut rng);
        }
    });
    Ok(z)
}

/// Redraws `z_ij ~ PG(y_ij + t_ij, λ_i − λ_j − δ)` for every observed pair.
/// Chunk `k` of [`Z_CHUNK`] pairs uses substream `k` of `key`, so the result
/// does not depend on `exec`.
pub fn sample_z(state: &mut SamplerState, pairs: &ObservedPairs, key: u64, exec: Execution) -> Result<()> {
    state.z = draw_z(state, pairs, key, exec)?;
    Ok(())
}

/// Precision matrix and linear term of the Gaussian full conditional of `λ`:
/// `K⁻¹/α² + Σ z (e_i − e_j)(e_i − e_j)ᵀ` and `K⁻¹μ/α² + Σ (b/2 + δz)(e_i − e_j)`.
/// Only the lower triangle of the precision is filled.
pub fn lambda_conditional(
    state: &SamplerState,
    pairs: &ObservedPairs,
    prior: &SpatialPrior,
    prior_linear: &[f64],
) -> (Mat<f64>, Vec<f64>) {
    let n = pairs.n_wards;
    let inv_alpha2 = 1.0 / state.alpha2;
    let base = prior.base_precision();
    let mut precision = Mat::from_fn(n, n, |i, j| if i >= j { base[(i, j)] * inv_alpha2 } else { 0.0 });
    let mut linear: Vec<f64> = prior_linear.iter().map(|h| h * inv_alpha2).collect();
    for p in 0..pairs.len() {
        let (i, j, z) = (pairs.first[p], pairs.second[p], state.z[p]);
        precision[(i, i)] += z;
        precision[(j, j)] += z;
        precision[(i.max(j), i.min(j))] -= z;
        let h = 0.5 * pairs.counts[p] as f64 + state.delta * z;
        linear[i] += h;
        linear[j] -= h;
    }
    (precision, linear)
}

/// Draws `λ` from its Gaussian full conditional given `z`, `δ` and `α²`.
/// `prior_linear` is `K⁻¹μ`.
pub fn sample_lambda<R: Rng + ?Sized>(
    state: &mut SamplerState,
    pairs: &ObservedPairs,
    prior: &SpatialPrior,
    prior_linear: &[f64],
    rng: &mut R,
) -> Result<()> {
    let (precision, linear) = lambda_conditional(state, pairs, prior, prior_linear);
    state.lambda = linalg::sample_gaussian_canonical(&precision, &linear, rng)?;
    Ok(())
}

/// One random-walk Metropolis update of `δ` with proposal standard deviation
/// `step`. Negative proposals are rejected outright.
pub fn mh_step_delta<R: Rng + ?Sized>(
    state: &mut SamplerState,
    pairs: &ObservedPairs,
    rate: f64,
    step: f64,
    rng: &mut R,
) -> bool {
    let proposal = state.delta + step * rng.sample::<f64, _>(StandardNormal);
    if proposal < 0.0 {
        return false;
    }
    let log_ratio = pairs.delta_log_conditional(&state.lambda, proposal, rate)
        - pairs.delta_log_conditional(&state.lambda, state.delta, rate);
    let accept = log_ratio >= 0.0 || rng.random::<f64>().ln() < log_ratio;
    if accept {
        state.delta = proposal;
    }
    accept
}

/// Translates `λ` so that its mean equals `Λ ~ N(mean(μ), α² 1ᵀK1 / N²)`;
/// returns `Λ`.
pub fn recentre<R: Rng + ?Sized>(lambda: &mut [f64], prior: &SpatialPrior, alpha2: f64, rng: &mut R) -> f64 {
    let n = lambda.len() as f64;
    let level_mean = prior.mean().iter().sum::<f64>() / n;
    let level = level_mean + prior.average_variance(alpha2).sqrt() * rng.sample::<f64, _>(StandardNormal);
    let current = lambda.iter().sum::<f64>() / n;
    for v in lambda.iter_mut() {
        *v += level - current;
    }
    level
}

/// Robbins–Monro adaptation of a log step size towards [`TARGET_ACCEPTANCE`].
#[derive(Clone, Copy, Debug)]
pub(crate) struct StepAdapter {
    log_step: f64,
    updates: usize,
}

impl StepAdapter {
    pub(crate) fn new(step: f64) -> Self {
        Self {
            log_step: step.ln(),
            updates: 0,
        }
    }

    pub(crate) fn step(&self) -> f64 {
        self.log_step.exp()
    }

    pub(crate) fn update(&mut self, accepted: bool) {
        self.updates += 1;
        let signal = if accepted { 1.0 } else { 0.0 } - TARGET_ACCEPTANCE;
        self.log_step = (self.log_step + signal / (self.updates as f64).sqrt()).clamp(-12.0, 5.0);
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplerKind {
    PolyaGamma,
    RandomWalk,
}

impl std::fmt::Display for SamplerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.pad(match self {
            SamplerKind::PolyaGamma => "pg_gibbs",
            SamplerKind::RandomWalk => "mhrw",
        })
    }
}

/// Retained draws of one run.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PosteriorSamples {
    pub sampler: SamplerKind,
    pub n_wards: usize,
    /// First retained iteration.
    pub burn_in: usize,
    /// Row-major `n_draws × n_wards`.
    pub lambda_draws: Vec<f64>,
    /// The `Λ` each stored `λ` row was recentred to.
    pub level_draws: Vec<f64>,
    pub delta_draws: Vec<f64>,
    pub alpha2_draws: Vec<f64>,
    /// Over all iterations, including burn-in; zero when `δ` is fixed.
    pub acceptance_rate_delta: f64,
    /// Per-ward acceptance rates after burn-in (random-walk sampler only).
    pub acceptance_rate_lambda: Vec<f64>,
    /// Sampler loop wall time, excluding setup.
    pub elapsed_secs: f64,
}

impl PosteriorSamples {
    pub(crate) fn with_capacity(sampler: SamplerKind, n_wards: usize, config: &SamplerConfig) -> Self {
        let kept = config.n_kept();
        Self {
            sampler,
            n_wards,
            burn_in: config.burn_in,
            lambda_draws: Vec::with_capacity(kept * n_wards),
            level_draws: Vec::with_capacity(kept),
            delta_draws: Vec::with_capacity(kept),
            alpha2_draws: Vec::with_capacity(kept),
            acceptance_rate_delta: 0.0,
            acceptance_rate_lambda: Vec::new(),
            elapsed_secs: 0.0,
        }
    }

    pub(crate) fn push(&mut self, lambda: &[f64], level: f64, delta: f64, alpha2: f64) {
        self.lambda_draws.extend_from_slice(lambda);
        self.level_draws.push(level);
        self.delta_draws.push(delta);
        self.alpha2_draws.push(alpha2);
    }

    pub fn n_draws(&self) -> usize {
        self.delta_draws.len()
    }

    pub fn lambda_row(&self, draw: usize) -> &[f64] {
        &self.lambda_draws[draw * self.n_wards..(draw + 1) * self.n_wards]
    }

    /// Trace of one ward's `λ`.
    pub fn lambda_chain(&self, ward: usize) -> Vec<f64> {
        (0..self.n_draws()).map(|d| self.lambda_draws[d * self.n_wards + ward]).collect()
    }

    /// Trace of `λ_i − λ_j`.
    pub fn difference_chain(&self, i: usize, j: usize) -> Vec<f64> {
        (0..self.n_draws()).map(|d| {
            let row = self.lambda_row(d);
            row[i] - row[j]
        })
        .collect()
    }

    /// Posterior mean of `λ` per ward.
    pub fn lambda_mean(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.n_wards];
        for d in 0..self.n_draws() {
            for (o, v) in out.iter_mut().zip(self.lambda_row(d)) {
                *o += v;
            }
        }
        let n = self.n_draws().max(1) as f64;
        out.iter_mut().for_each(|o| *o /= n);
        out
    }

    /// Newline-delimited JSON, one record per retained iteration.
    pub fn write_ndjson<W: Write>(&self, mut writer: W) -> Result<()> {
        for d in 0..self.n_draws() {
            let record = serde_json::json!({
                "iteration": self.burn_in + d,
                "lambda": self.lambda_row(d),
                "delta": self.delta_draws[d],
                "alpha2": self.alpha2_draws[d],
            });
            serde_json::to_writer(&mut writer, &record)?;
            writer.write_all(b"\n")?;
        }
        Ok(())
    }
}

/// Checks that the prior and config fit the dataset and returns the pair list.
pub(crate) fn prepare(dataset: &ComparisonDataset, prior: &SpatialPrior, config: &SamplerConfig) -> Result<ObservedPairs> {
    config.validate()?;
    dataset.validate()?;
    if prior.n_wards() != dataset.n_wards() {
        return Err(Error::DimensionMismatch {
            expected: dataset.n_wards(),
            got: prior.n_wards(),
        });
    }
    if dataset.n_wards() < 2 {
        return Err(Error::InvalidDataset("at least two wards are required".into()));
    }
    if config.fixed_delta == Some(0.0) && dataset.tie_events() > 0 {
        return Err(Error::TiesPresent(dataset.tie_events()));
    }
    Ok(ObservedPairs::from_dataset(dataset))
}

/// Runs the Pólya-Gamma Gibbs sampler. Deterministic given `config.seed`,
/// whatever `config.execution` is.
pub fn run_gibbs(dataset: &ComparisonDataset, prior: &SpatialPrior, config: &SamplerConfig) -> Result<PosteriorSamples> {
    let pairs = prepare(dataset, prior, config)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let prior = prior.clone().with_alpha2_prior(config.alpha2_prior);
    let prior_linear = linalg::mat_vec(prior.base_precision(), prior.mean());
    let mut state = SamplerState::initial(&pairs, &prior, config, &mut rng)?;
    let mut out = PosteriorSamples::with_capacity(SamplerKind::PolyaGamma, pairs.n_wards, config);
    let mut adapter = StepAdapter::new(config.delta_step);
    let mut accepted = 0usize;

    let start = Instant::now();
    for it in 0..config.n_iterations {
        state.iteration = it;
        let key: u64 = rng.random();
        sample_z(&mut state, &pairs, key, config.execution).map_err(|e| e.at_iteration(it))?;
        sample_lambda(&mut state, &pairs, &prior, &prior_linear, &mut rng).map_err(|e| e.at_iteration(it))?;
        if config.fixed_delta.is_none() {
            let ok = mh_step_delta(&mut state, &pairs, config.delta_prior_rate, adapter.step(), &mut rng);
            accepted += ok as usize;
            if config.adapt && it < config.burn_in {
                adapter.update(ok);
            }
        }
        if config.learn_alpha2 {
            state.alpha2 = sample_alpha2(&state.lambda, &prior, &mut rng).map_err(|e| e.at_iteration(it))?;
        }
        let level = recentre(&mut state.lambda, &prior, state.alpha2, &mut rng);
        if it >= config.burn_in {
            out.push(&state.lambda, level, state.delta, state.alpha2);
        }
    }
    out.elapsed_secs = start.elapsed().as_secs_f64();
    if config.fixed_delta.is_none() {
        out.acceptance_rate_delta = accepted as f64 / config.n_iterations as f64;
    }
    Ok(out)
}

/// Gibbs sampler for the standard model without ties: `δ` is held at zero.
/// Fails if the dataset contains ties.
pub fn run_gibbs_standard(
    dataset: &ComparisonDataset,
    prior: &SpatialPrior,
    config: &SamplerConfig,
) -> Result<PosteriorSamples> {
    if dataset.tie_events() > 0 {
        return Err(Error::TiesPresent(dataset.tie_events()));
    }
    let config = SamplerConfig {
        fixed_delta: Some(0.0),
        ..config.clone()
    };
    run_gibbs(dataset, prior, &config)
}
