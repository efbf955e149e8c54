//! Densities normalised numerically on a grid, with interpolated CDFs.

/// Piecewise-linear density on `[lo, hi]`, normalised by the trapezoid rule.
#[derive(Clone, Debug)]
pub struct Grid1d {
    x: Vec<f64>,
    density: Vec<f64>,
    cdf: Vec<f64>,
}

impl Grid1d {
    /// Evaluates an unnormalised log-density at `points` equally spaced nodes.
    pub fn from_log_density<F: Fn(f64) -> f64>(lo: f64, hi: f64, points: usize, log_density: F) -> Self {
        assert!(points >= 3 && hi > lo);
        let h = (hi - lo) / (points - 1) as f64;
        let x: Vec<f64> = (0..points).map(|k| lo + k as f64 * h).collect();
        let logs: Vec<f64> = x.iter().map(|&v| log_density(v)).collect();
        let peak = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let weights: Vec<f64> = logs.iter().map(|l| (l - peak).exp()).collect();
        Self::from_weights(x, weights)
    }

    /// Builds from nodes and non-negative unnormalised density values.
    pub fn from_weights(x: Vec<f64>, weights: Vec<f64>) -> Self {
        assert_eq!(x.len(), weights.len());
        let mut cdf = vec![0.0; x.len()];
        for k in 1..x.len() {
            cdf[k] = cdf[k - 1] + 0.5 * (weights[k] + weights[k - 1]) * (x[k] - x[k - 1]);
        }
        let total = *cdf.last().unwrap();
        assert!(total > 0.0, "density vanishes on the grid");
        let density = weights.iter().map(|w| w / total).collect();
        for c in cdf.iter_mut() {
            *c /= total;
        }
        Self { x, density, cdf }
    }

    /// CDF, exact for the piecewise-linear density between nodes.
    pub fn cdf(&self, v: f64) -> f64 {
        let n = self.x.len();
        if v <= self.x[0] {
            return 0.0;
        }
        if v >= self.x[n - 1] {
            return 1.0;
        }
        let k = self.x.partition_point(|&p| p <= v) - 1;
        let h = self.x[k + 1] - self.x[k];
        let t = v - self.x[k];
        let (f0, f1) = (self.density[k], self.density[k + 1]);
        self.cdf[k] + f0 * t + 0.5 * (f1 - f0) * t * t / h
    }

    pub fn mean(&self) -> f64 {
        self.moment(|v| v)
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.moment(|v| (v - m) * (v - m))
    }

    /// Trapezoid-rule expectation of `f`.
    pub fn moment<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        let mut total = 0.0;
        for k in 1..self.x.len() {
            let h = self.x[k] - self.x[k - 1];
            total += 0.5 * h * (f(self.x[k]) * self.density[k] + f(self.x[k - 1]) * self.density[k - 1]);
        }
        total
    }
}

/// Rectangular grid density with marginal CDFs.
#[derive(Clone, Debug)]
pub struct Grid2d {
    pub first: Grid1d,
    pub second: Grid1d,
}

impl Grid2d {
    /// Integrates an unnormalised 2-D log-density over `[lo, hi]²` and keeps
    /// both marginals.
    pub fn from_log_density<F: Fn(f64, f64) -> f64>(
        (lo1, hi1): (f64, f64),
        (lo2, hi2): (f64, f64),
        points: usize,
        log_density: F,
    ) -> Self {
        let h1 = (hi1 - lo1) / (points - 1) as f64;
        let h2 = (hi2 - lo2) / (points - 1) as f64;
        let x1: Vec<f64> = (0..points).map(|k| lo1 + k as f64 * h1).collect();
        let x2: Vec<f64> = (0..points).map(|k| lo2 + k as f64 * h2).collect();
        let mut logs = vec![0.0; points * points];
        let mut peak = f64::NEG_INFINITY;
        for (a, &u) in x1.iter().enumerate() {
            for (b, &v) in x2.iter().enumerate() {
                let l = log_density(u, v);
                logs[a * points + b] = l;
                peak = peak.max(l);
            }
        }
        let trap = |k: usize| if k == 0 || k == points - 1 { 0.5 } else { 1.0 };
        let mut m1 = vec![0.0; points];
        let mut m2 = vec![0.0; points];
        for a in 0..points {
            for b in 0..points {
                let w = (logs[a * points + b] - peak).exp();
                m1[a] += w * trap(b) * h2;
                m2[b] += w * trap(a) * h1;
            }
        }
        Self {
            first: Grid1d::from_weights(x1, m1),
            second: Grid1d::from_weights(x2, m2),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::normal_cdf;

    #[test]
    fn gaussian_grid_matches_closed_form() {
        let g = Grid1d::from_log_density(-15.0, 17.0, 6401, |x| -0.5 * (x - 1.0) * (x - 1.0) / 4.0);
        for v in [-2.0, 0.0, 1.0, 2.5, 4.0] {
            assert!((g.cdf(v) - normal_cdf((v - 1.0) / 2.0)).abs() < 1e-5);
        }
        assert!((g.mean() - 1.0).abs() < 1e-6);
        assert!((g.variance() - 4.0).abs() < 1e-4);
    }

    #[test]
    fn correlated_gaussian_marginals() {
        // Precision [[2, -1], [-1, 2]] has covariance [[2/3, 1/3], [1/3, 2/3]].
        let g = Grid2d::from_log_density((-6.0, 6.0), (-6.0, 6.0), 601, |a, b| {
            -0.5 * (2.0 * a * a - 2.0 * a * b + 2.0 * b * b)
        });
        assert!((g.first.variance() - 2.0 / 3.0).abs() < 1e-4);
        assert!((g.second.cdf(0.5) - normal_cdf(0.5 / (2.0f64 / 3.0).sqrt())).abs() < 1e-4);
    }
}
