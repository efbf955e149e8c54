//! Effective sample size with Geyer's initial positive sequence.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

/// Biased autocovariances `γ_0 … γ_{n−1}` by zero-padded FFT.
pub fn autocovariance(chain: &[f64]) -> Vec<f64> {
    let n = chain.len();
    let mean = chain.iter().sum::<f64>() / n as f64;
    let size = (2 * n).next_power_of_two();
    let mut buf: Vec<Complex<f64>> = chain
        .iter()
        .map(|&x| Complex::new(x - mean, 0.0))
        .chain(std::iter::repeat(Complex::new(0.0, 0.0)))
        .take(size)
        .collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(size).process(&mut buf);
    for v in buf.iter_mut() {
        *v = Complex::new(v.norm_sqr(), 0.0);
    }
    planner.plan_fft_inverse(size).process(&mut buf);
    let scale = 1.0 / (size as f64 * n as f64);
    buf[..n].iter().map(|c| c.re * scale).collect()
}

/// `n / (1 + 2 Σ ρ_k)`, truncating the sum at the first pair
/// `ρ_{2m} + ρ_{2m+1}` that is not positive. Clipped to `[1, n]`; a constant
/// chain gives 1.
pub fn effective_sample_size(chain: &[f64]) -> Result<f64> {
    let n = chain.len();
    if n < 10 {
        return Err(Error::InvalidParameter(format!("ESS needs at least 10 draws, got {n}")));
    }
    if chain.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidParameter("chain contains non-finite values".into()));
    }
    let first = chain[0];
    if chain.iter().all(|&x| x == first) {
        return Ok(1.0);
    }
    let acov = autocovariance(chain);
    if acov[0] <= 0.0 {
        return Ok(1.0);
    }
    let rho = |k: usize| if k < n { acov[k] / acov[0] } else { 0.0 };
    // τ = −1 + 2 Σ_m Γ_m with Γ_m = ρ_{2m} + ρ_{2m+1} and ρ_0 = 1.
    let mut tau = -1.0;
    let mut m = 0;
    while 2 * m < n {
        let pair = rho(2 * m) + rho(2 * m + 1);
        if pair <= 0.0 {
            break;
        }
        tau += 2.0 * pair;
        m += 1;
    }
    Ok((n as f64 / tau).clamp(1.0, n as f64))
}
