//! Posterior summaries: per-ward medians and intervals, `δ` with its credible
//! interval, and the tie-probability curve.

use serde::{Deserialize, Serialize};

use crate::gibbs::PosteriorSamples;
use crate::model::tie_probability_for_gap;
use crate::stats;

/// Median with a central 95% credible interval.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntervalSummary {
    pub median: f64,
    pub lower: f64,
    pub upper: f64,
}

impl IntervalSummary {
    pub fn from_draws(draws: &[f64]) -> Self {
        let mut sorted = draws.to_vec();
        sorted.sort_by(f64::total_cmp);
        Self {
            median: stats::quantile_sorted(&sorted, 0.5),
            lower: stats::quantile_sorted(&sorted, 0.025),
            upper: stats::quantile_sorted(&sorted, 0.975),
        }
    }

    pub fn contains(&self, value: f64) -> bool {
        self.lower <= value && value <= self.upper
    }
}

impl std::fmt::Display for IntervalSummary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:.3} (95% CI ({:.3}, {:.3}))", self.median, self.lower, self.upper)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WardSummary {
    pub label: String,
    pub median: f64,
    pub mean: f64,
    pub variance: f64,
    pub q025: f64,
    pub q975: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TieCurvePoint {
    pub difference: f64,
    pub probability: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSummary {
    pub n_draws: usize,
    pub wards: Vec<WardSummary>,
    pub delta: IntervalSummary,
    pub alpha2: IntervalSummary,
    pub acceptance_rate_delta: f64,
    /// Tie probability against the quality gap at the median `δ`.
    pub tie_curve: Vec<TieCurvePoint>,
}

impl PosteriorSummary {
    pub fn medians(&self) -> Vec<f64> {
        self.wards.iter().map(|w| w.median).collect()
    }
}

/// Tie probability at `points` evenly spaced gaps in `[−max_gap, max_gap]`.
pub fn tie_curve(delta: f64, max_gap: f64, points: usize) -> Vec<TieCurvePoint> {
    let points = points.max(2);
    (0..points)
        .map(|k| {
            let difference = -max_gap + 2.0 * max_gap * k as f64 / (points - 1) as f64;
            TieCurvePoint {
                difference,
                probability: tie_probability_for_gap(difference, delta),
            }
        })
        .collect()
}

/// Summarises every ward and the scalar parameters. Missing labels default to
/// the ward index.
pub fn summarize(samples: &PosteriorSamples, labels: &[String]) -> PosteriorSummary {
    let wards = (0..samples.n_wards)
        .map(|w| {
            let chain = samples.lambda_chain(w);
            let interval = IntervalSummary::from_draws(&chain);
            WardSummary {
                label: labels.get(w).cloned().unwrap_or_else(|| w.to_string()),
                median: interval.median,
                mean: stats::mean(&chain),
                variance: stats::variance(&chain),
                q025: interval.lower,
                q975: interval.upper,
            }
        })
        .collect();
    let delta = IntervalSummary::from_draws(&samples.delta_draws);
    PosteriorSummary {
        n_draws: samples.n_draws(),
        wards,
        delta,
        alpha2: IntervalSummary::from_draws(&samples.alpha2_draws),
        acceptance_rate_delta: samples.acceptance_rate_delta,
        tie_curve: tie_curve(delta.median, 4.0, 81),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interval_format() {
        let s = IntervalSummary {
            median: 0.468,
            lower: 0.39,
            upper: 0.552,
        };
        assert_eq!(s.to_string(), "0.468 (95% CI (0.390, 0.552))");
    }

    #[test]
    fn tie_curve_peak_at_zero_gap() {
        let curve = tie_curve(0.8, 4.0, 81);
        assert_eq!(curve.len(), 81);
        let mid = curve[40];
        assert!(mid.difference.abs() < 1e-12);
        assert!((mid.probability - 0.4f64.tanh()).abs() < 1e-12);
        assert!(curve.iter().all(|p| p.probability <= mid.probability + 1e-15));
    }
}
