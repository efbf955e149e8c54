//! Reference computations for the test suites, written without any use of
//! the inference crate: goodness-of-fit tests, grid-normalised densities and
//! closed-form Pólya-Gamma identities.

pub mod gof;
pub mod grid;
pub mod pg;

pub use gof::{chi_square_uniform, ks_one_sample, ks_two_sample, KsResult};
pub use grid::{Grid1d, Grid2d};

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(-x / std::f64::consts::SQRT_2)
}
