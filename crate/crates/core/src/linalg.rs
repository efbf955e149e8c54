//! Dense symmetric linear algebra on top of `faer`.

use faer::{Mat, MatMut, Side};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Lower Cholesky factor `L` with `A = L Lᵀ`. Only the lower triangle of
/// `a` is read.
pub fn cholesky_lower(a: &Mat<f64>) -> Result<Mat<f64>> {
    let llt = a
        .llt(Side::Lower)
        .map_err(|e| Error::NotPositiveDefinite(format!("Cholesky factorisation failed: {e:?}")))?;
    Ok(llt.L().to_owned())
}

/// Inverse of a symmetric positive-definite matrix from its Cholesky factor.
pub fn spd_inverse_from_cholesky(l: &Mat<f64>) -> Mat<f64> {
    let n = l.nrows();
    let mut inv = Mat::<f64>::identity(n, n);
    l.solve_lower_triangular_in_place(inv.as_mut());
    l.transpose().solve_upper_triangular_in_place(inv.as_mut());
    symmetrise(&mut inv);
    inv
}

/// Replaces `m` by `(m + mᵀ)/2`.
pub fn symmetrise(m: &mut Mat<f64>) {
    let n = m.nrows();
    for j in 0..n {
        for i in (j + 1)..n {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
}

pub fn is_symmetric(m: &Mat<f64>, tol: f64) -> bool {
    let n = m.nrows();
    if m.ncols() != n {
        return false;
    }
    (0..n).all(|j| (j + 1..n).all(|i| (m[(i, j)] - m[(j, i)]).abs() <= tol))
}

/// Matrix exponential of a symmetric matrix via `V diag(e^μ) Vᵀ`.
pub fn symmetric_exponential(a: &Mat<f64>) -> Result<Mat<f64>> {
    let n = a.nrows();
    let evd = a
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::InvalidParameter(format!("eigendecomposition failed: {e:?}")))?;
    let u = evd.U();
    let s = evd.S();
    let scaled = Mat::from_fn(n, n, |i, k| u[(i, k)] * s[k].exp());
    let mut out = &scaled * u.transpose();
    symmetrise(&mut out);
    Ok(out)
}

pub fn min_eigenvalue(a: &Mat<f64>) -> Result<f64> {
    let vals = a
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::InvalidParameter(format!("eigendecomposition failed: {e:?}")))?;
    Ok(vals.into_iter().fold(f64::INFINITY, f64::min))
}

/// `xᵀ M x` for symmetric `M`.
pub fn quadratic_form(m: &Mat<f64>, x: &[f64]) -> f64 {
    let n = x.len();
    let mut total = 0.0;
    for j in 0..n {
        let col = m.col_as_slice(j);
        let dot: f64 = col.iter().zip(x).map(|(a, b)| a * b).sum();
        total += x[j] * dot;
    }
    total
}

/// `M x` for a dense matrix stored column-major.
pub fn mat_vec(m: &Mat<f64>, x: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; m.nrows()];
    for (j, &xj) in x.iter().enumerate() {
        if xj == 0.0 {
            continue;
        }
        for (o, a) in out.iter_mut().zip(m.col_as_slice(j)) {
            *o += a * xj;
        }
    }
    out
}

/// `L w` for lower-triangular `L`.
pub fn lower_mul(l: &Mat<f64>, w: &[f64]) -> Vec<f64> {
    let n = w.len();
    let mut out = vec![0.0; n];
    for (j, &wj) in w.iter().enumerate() {
        let col = l.col_as_slice(j);
        for i in j..n {
            out[i] += col[i] * wj;
        }
    }
    out
}

fn as_column(v: &mut [f64]) -> MatMut<'_, f64> {
    let n = v.len();
    MatMut::from_column_major_slice_mut(v, n, 1)
}

/// Draws `x ~ N(P⁻¹ h, P⁻¹)` given the precision `P` (lower triangle read)
/// and the linear term `h`. Uses `P = L Lᵀ`: solve `L u = h`, then
/// `Lᵀ x = u + w` with `w ~ N(0, I)`.
pub fn sample_gaussian_canonical<R: Rng + ?Sized>(
    precision: &Mat<f64>,
    linear: &[f64],
    rng: &mut R,
) -> Result<Vec<f64>> {
    let llt = precision
        .llt(Side::Lower)
        .map_err(|e| Error::NotPositiveDefinite(format!("posterior precision is indefinite: {e:?}")))?;
    let l = llt.L();
    let mut x = linear.to_vec();
    l.solve_lower_triangular_in_place(as_column(&mut x));
    for v in x.iter_mut() {
        *v += rng.sample::<f64, _>(StandardNormal);
    }
    l.transpose().solve_upper_triangular_in_place(as_column(&mut x));
    Ok(x)
}

/// Mean and covariance of the canonical-form Gaussian, for tests and oracles.
pub fn canonical_moments(precision: &Mat<f64>, linear: &[f64]) -> Result<(Vec<f64>, Mat<f64>)> {
    let l = cholesky_lower(precision)?;
    let cov = spd_inverse_from_cholesky(&l);
    let mean = mat_vec(&cov, linear);
    Ok((mean, cov))
}
