//! Exact Pólya-Gamma sampling.
//!
//! A `PG(1, c)` variate is `J*(1, |c|/2) / 4`, drawn with the alternating-series
//! accept-reject method: the proposal mixes a truncated exponential on
//! `(t, ∞)` with a truncated inverse Gaussian on `(0, t]`, `t = 0.64`, and the
//! piecewise series coefficients decide acceptance. `PG(b, c)` for integer
//! `b ≥ 1` is the sum of `b` independent `PG(1, c)` draws.

use std::f64::consts::{FRAC_PI_2, PI, SQRT_2};

use rand::Rng;
use rand_distr::{Exp1, StandardNormal};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::exec::{substream, Execution};

/// Switch point between the left and right series representations.
pub const TRUNCATION: f64 = 0.64;

const PI_SQ: f64 = PI * PI;

/// Shape `b` (a positive integer) and tilt `c` of `PG(b, c)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PgParams {
    b: u32,
    c: f64,
}

impl PgParams {
    pub fn new(b: u32, c: f64) -> Result<Self> {
        if b < 1 {
            return Err(Error::InvalidParameter("Polya-Gamma shape must be at least 1".into()));
        }
        if !c.is_finite() {
            return Err(Error::InvalidParameter(format!("Polya-Gamma tilt {c} is not finite")));
        }
        Ok(Self { b, c })
    }

    /// Accepts a real shape, rejecting anything that is not a positive integer.
    pub fn from_real(b: f64, c: f64) -> Result<Self> {
        if !(b >= 1.0 && b.fract() == 0.0 && b <= u32::MAX as f64) {
            return Err(Error::InvalidParameter(format!(
                "Polya-Gamma shape must be a positive integer, got {b}"
            )));
        }
        Self::new(b as u32, c)
    }

    pub fn b(&self) -> u32 {
        self.b
    }

    pub fn c(&self) -> f64 {
        self.c
    }
}

/// `E[PG(b, c)] = b tanh(c/2) / (2c)`, `b/4` at `c = 0`.
pub fn pg_mean(b: f64, c: f64) -> f64 {
    if c.abs() < 1e-6 {
        b * (0.25 - c * c / 48.0)
    } else {
        b * (0.5 * c).tanh() / (2.0 * c)
    }
}

/// `Var[PG(b, c)] = b (sinh c − c) / (4 c³ cosh²(c/2))`, `b/24` at `c = 0`.
pub fn pg_variance(b: f64, c: f64) -> f64 {
    if c.abs() < 1e-3 {
        b * (1.0 / 24.0 - c * c / 240.0)
    } else {
        let ch = (0.5 * c).cosh();
        b * (c.sinh() - c) / (4.0 * c.powi(3) * ch * ch)
    }
}

fn log_normal_cdf(x: f64) -> f64 {
    if x > -30.0 {
        (0.5 * erfc(-x / SQRT_2)).ln()
    } else {
        let x2 = x * x;
        let series = 1.0 - 1.0 / x2 + 3.0 / (x2 * x2) - 15.0 / (x2 * x2 * x2);
        -0.5 * x2 - (-x).ln() - 0.5 * (2.0 * PI).ln() + series.ln()
    }
}

/// Series coefficients `a_n(x)` of the `J*(1, 0)` density at a fixed `x`,
/// using the left representation below the truncation point and the right
/// one above it.
#[derive(Clone, Copy)]
struct Series {
    x: f64,
    /// `(πx/2)^{-3/2}` on the left, unused on the right.
    left_scale: Option<f64>,
}

impl Series {
    #[inline]
    fn at(x: f64) -> Self {
        let left_scale = (x <= TRUNCATION).then(|| {
            let y = FRAC_PI_2 * x;
            1.0 / (y * y.sqrt())
        });
        Self { x, left_scale }
    }

    #[inline]
    fn coefficient(&self, n: u32) -> f64 {
        let half = n as f64 + 0.5;
        let k = half * PI;
        match self.left_scale {
            None => k * (-0.5 * k * k * self.x).exp(),
            Some(scale) if self.x > 0.0 => k * scale * (-2.0 * half * half / self.x).exp(),
            Some(_) => 0.0,
        }
    }
}

/// Per-tilt constants shared by every `J*(1, z)` draw with the same `z`.
#[derive(Clone, Copy, Debug)]
struct Proposal {
    z: f64,
    rate: f64,
    /// Probability of proposing from the exponential tail.
    tail_mass: f64,
}

impl Proposal {
    fn new(z: f64) -> Self {
        let t = TRUNCATION;
        let rate = PI_SQ / 8.0 + 0.5 * z * z;
        let b = (1.0 / t).sqrt() * (t * z - 1.0);
        let a = -(1.0 / t).sqrt() * (t * z + 1.0);
        let q_over_p = if z < 20.0 {
            let phi = |v: f64| 0.5 * erfc(-v / SQRT_2);
            4.0 / PI * rate * ((rate * t - z).exp() * phi(b) + (rate * t + z).exp() * phi(a))
        } else {
            let x0 = rate.ln() + rate * t;
            let xb = x0 - z + log_normal_cdf(b);
            let xa = x0 + z + log_normal_cdf(a);
            4.0 / PI * (xb.exp() + xa.exp())
        };
        Self {
            z,
            rate,
            tail_mass: 1.0 / (1.0 + q_over_p),
        }
    }

    /// Inverse Gaussian `IG(1/z, 1)` truncated to `(0, t]`.
    fn truncated_inverse_gaussian<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let t = TRUNCATION;
        let z = self.z;
        if 1.0 / t > z {
            // Mean above the truncation point: Lévy proposal, then tilt.
            loop {
                let (mut e1, mut e2): (f64, f64) = (rng.sample(Exp1), rng.sample(Exp1));
                while e1 * e1 > 2.0 * e2 / t {
                    e1 = rng.sample(Exp1);
                    e2 = rng.sample(Exp1);
                }
                let s = 1.0 + e1 * t;
                let x = t / (s * s);
                let alpha = (-0.5 * z * z * x).exp();
                if rng.random::<f64>() <= alpha {
                    return x;
                }
            }
        }
        let mu = 1.0 / z;
        loop {
            let y: f64 = rng.sample::<f64, _>(StandardNormal).powi(2);
            let mu_y = mu * y;
            let mut x = mu + 0.5 * mu * mu_y - 0.5 * mu * (4.0 * mu_y + mu_y * mu_y).sqrt();
            if rng.random::<f64>() > mu / (mu + x) {
                x = mu * mu / x;
            }
            if x <= t {
                return x;
            }
        }
    }

    /// One `J*(1, z)` draw.
    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        loop {
            let x = if rng.random::<f64>() < self.tail_mass {
                TRUNCATION + rng.sample::<f64, _>(Exp1) / self.rate
            } else {
                self.truncated_inverse_gaussian(rng)
            };
            let series = Series::at(x);
            let mut s = series.coefficient(0);
            let y = rng.random::<f64>() * s;
            let mut n = 0u32;
            loop {
                n += 1;
                if n % 2 == 1 {
                    s -= series.coefficient(n);
                    if y <= s {
                        return x;
                    }
                } else {
                    s += series.coefficient(n);
                    if y > s {
                        break;
                    }
                }
            }
        }
    }
}

/// One draw from `PG(b, c)`; always strictly positive.
pub fn sample_pg<R: Rng + ?Sized>(params: &PgParams, rng: &mut R) -> f64 {
    let proposal = Proposal::new(0.5 * params.c.abs());
    (0..params.b).map(|_| 0.25 * proposal.draw(rng)).sum()
}

/// `n` independent `PG(b, c)` draws split into fixed chunks with their own
/// substreams of `seed`, so the result does not depend on `exec`.
pub fn sample_pg_batch(params: &PgParams, n: usize, seed: u64, exec: Execution) -> Vec<f64> {
    const CHUNK: usize = 4096;
    let proposal = Proposal::new(0.5 * params.c.abs());
    let b = params.b;
    let mut out = vec![0.0; n];
    exec.for_each_chunk(&mut out, CHUNK, |k, chunk| {
        let mut rng = substream(seed, k);
        for v in chunk {
            *v = (0..b).map(|_| 0.25 * proposal.draw(&mut rng)).sum();
        }
    });
    out
}

/// Compares both sides of the Pólya-Gamma integral identity
/// `(e^x)^a / (1 + e^x)^b = 2^{−b} e^{(a − b/2)x} E[e^{−z x²/2}]`, `z ~ PG(b, 0)`,
/// returning the exact left side and a Monte Carlo estimate of the right.
pub fn pg_identity_check<R: Rng + ?Sized>(
    a: f64,
    b: u32,
    x: f64,
    n_samples: usize,
    rng: &mut R,
) -> Result<(f64, f64)> {
    if n_samples < 1 {
        return Err(Error::InvalidParameter("need at least one sample".into()));
    }
    if !a.is_finite() || !x.is_finite() {
        return Err(Error::InvalidParameter("identity arguments must be finite".into()));
    }
    let params = PgParams::new(b, 0.0)?;
    let bf = b as f64;
    let softplus = x.max(0.0) + (-x.abs()).exp().ln_1p();
    let lhs = (a * x - bf * softplus).exp();
    let mean: f64 = (0..n_samples)
        .map(|_| (-0.5 * sample_pg(&params, rng) * x * x).exp())
        .sum::<f64>()
        / n_samples as f64;
    let rhs = 2f64.powf(-bf) * ((a - 0.5 * bf) * x).exp() * mean;
    Ok((lhs, rhs))
}
