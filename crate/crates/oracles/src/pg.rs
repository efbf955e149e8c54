//! Closed-form Pólya-Gamma quantities: Laplace transform, moments from it,
//! and the alternating-series density.

use std::f64::consts::PI;

/// `cosh(√x)`, continued analytically to `cos(√−x)` for negative `x`.
fn cosh_sqrt(x: f64) -> f64 {
    if x >= 0.0 {
        x.sqrt().cosh()
    } else {
        (-x).sqrt().cos()
    }
}

/// `E[e^{−s ω}]` for `ω ~ PG(b, c)`: `cosh^b(c/2) / cosh^b(√(c²/4 + s/2))`.
pub fn laplace_transform(b: f64, c: f64, s: f64) -> f64 {
    ((c / 2.0).cosh() / cosh_sqrt(c * c / 4.0 + s / 2.0)).powf(b)
}

/// First two moments from finite differences of the Laplace transform at 0.
pub fn moments_from_transform(b: f64, c: f64) -> (f64, f64) {
    let h = 1e-3;
    let l = |s: f64| laplace_transform(b, c, s);
    // Five-point stencils.
    let d1 = (-l(2.0 * h) + 8.0 * l(h) - 8.0 * l(-h) + l(-2.0 * h)) / (12.0 * h);
    let d2 = (-l(2.0 * h) + 16.0 * l(h) - 30.0 * l(0.0) + 16.0 * l(-h) - l(-2.0 * h)) / (12.0 * h * h);
    let mean = -d1;
    (mean, d2 - mean * mean)
}

/// Density of `PG(1, c)` at `w > 0`, from the series for `J*(1)` at `x = 4w`
/// with exponential tilting. Terms are summed until below `1e-12`.
pub fn pg1_density(w: f64, c: f64) -> f64 {
    if w <= 0.0 {
        return 0.0;
    }
    let x = 4.0 * w;
    let mut total = 0.0;
    for n in 0..10_000 {
        let a = n as f64 + 0.5;
        let term = if x > 0.64 {
            PI * a * (-a * a * PI * PI * x / 2.0).exp()
        } else {
            PI * a * (2.0 / (PI * x)).powf(1.5) * (-2.0 * a * a / x).exp()
        };
        total += if n % 2 == 0 { term } else { -term };
        if term < 1e-12 {
            break;
        }
    }
    let z = c.abs() / 2.0;
    4.0 * z.cosh() * (-z * z * x / 2.0).exp() * total
}

/// Both series for `J*(1)` at `x`, for cross-checking the representations.
pub fn jstar_density_both(x: f64) -> (f64, f64) {
    let mut left = 0.0;
    let mut right = 0.0;
    for n in 0..10_000 {
        let a = n as f64 + 0.5;
        let r = PI * a * (-a * a * PI * PI * x / 2.0).exp();
        let l = PI * a * (2.0 / (PI * x)).powf(1.5) * (-2.0 * a * a / x).exp();
        let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
        right += sign * r;
        left += sign * l;
        if r < 1e-15 && l < 1e-15 {
            break;
        }
    }
    (left, right)
}

/// Mean of `PG(1, c)` by quadrature of the series density.
pub fn pg1_mean_by_quadrature(c: f64) -> f64 {
    let upper = 12.0;
    let steps = 120_000;
    let h = upper / steps as f64;
    let mut total = 0.0;
    for k in 1..=steps {
        let w = k as f64 * h;
        let weight = if k == steps { 0.5 } else { 1.0 };
        total += weight * w * pg1_density(w, c);
    }
    total * h
}
