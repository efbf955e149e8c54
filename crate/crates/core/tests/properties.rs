use btties_core::dataset::{ComparisonDataset, Outcome};
use btties_core::model::{log_likelihood_ties, outcome_probabilities, tie_probability, win_probability};
use btties_core::sim::effective_sample_size;
use btties_core::{QualityVector, TieParameter};
use proptest::prelude::*;

fn outcome() -> impl Strategy<Value = Outcome> {
    prop_oneof![Just(Outcome::I), Just(Outcome::J), Just(Outcome::Tie), Just(Outcome::Skip)]
}

fn dataset(n: usize) -> impl Strategy<Value = ComparisonDataset> {
    prop::collection::vec((0..n, 1..n, outcome()), 0..60).prop_map(move |events| {
        let mut d = ComparisonDataset::new(n);
        for (i, shift, o) in events {
            d.record(i, (i + shift) % n, o).unwrap();
        }
        d
    })
}

proptest! {
    #[test]
    fn outcomes_are_exhaustive(a in -50.0..50.0f64, b in -50.0..50.0f64, delta in 0.0..20.0f64) {
        let lambda = QualityVector::new(vec![a, b]).unwrap();
        let p = outcome_probabilities(&lambda, 0, 1, TieParameter::new(delta).unwrap()).unwrap();
        prop_assert!((p.win + p.loss + p.tie - 1.0).abs() < 1e-12);
        prop_assert!(p.tie >= 0.0 && p.tie < 1.0);
    }

    #[test]
    fn likelihood_is_translation_invariant(
        d in dataset(5),
        lam in prop::collection::vec(-3.0..3.0f64, 5),
        delta in 0.01..3.0f64,
        c in -10.0..10.0f64,
    ) {
        let base = QualityVector::new(lam.clone()).unwrap();
        let shifted = base.translated(c);
        let delta = TieParameter::new(delta).unwrap();
        let a = log_likelihood_ties(&d, &base, delta).unwrap();
        let b = log_likelihood_ties(&d, &shifted, delta).unwrap();
        prop_assert!((a - b).abs() < 1e-10);
    }

    #[test]
    fn win_probability_increases_with_gap(gap in -20.0..20.0f64, step in 1e-3..5.0f64, delta in 0.0..5.0f64) {
        let delta = TieParameter::new(delta).unwrap();
        let lo = win_probability(&QualityVector::new(vec![gap, 0.0]).unwrap(), 0, 1, delta).unwrap();
        let hi = win_probability(&QualityVector::new(vec![gap + step, 0.0]).unwrap(), 0, 1, delta).unwrap();
        prop_assert!(hi > lo);
    }

    #[test]
    fn tie_probability_increases_with_delta(gap in -10.0..10.0f64, delta in 0.0..5.0f64, step in 1e-3..2.0f64) {
        let lambda = QualityVector::new(vec![gap, 0.0]).unwrap();
        let lo = tie_probability(&lambda, 0, 1, TieParameter::new(delta).unwrap()).unwrap();
        let hi = tie_probability(&lambda, 0, 1, TieParameter::new(delta + step).unwrap()).unwrap();
        prop_assert!(hi > lo);
    }

    #[test]
    fn aggregated_counts_conserve_events(d in dataset(6)) {
        prop_assert!(d.validate().is_ok());
        let n = 6;
        let mut from_pairs = 0u64;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    prop_assert_eq!(d.ties(i, j), d.ties(j, i));
                    if i < j {
                        from_pairs += d.n_compared(i, j) as u64;
                    }
                }
            }
            prop_assert_eq!(d.wins(i, i), 0);
        }
        prop_assert_eq!(from_pairs, d.n_comparisons());
        prop_assert_eq!(d.total_wins() + d.tie_events() + d.skips(), d.total_judgements());
    }

    #[test]
    fn ess_is_affine_invariant(
        x in prop::collection::vec(-5.0..5.0f64, 20..200),
        a in prop_oneof![0.01..100.0f64, -100.0..-0.01f64],
        b in -1e3..1e3f64,
    ) {
        prop_assume!(x.iter().any(|&v| v != x[0]));
        let e = effective_sample_size(&x).unwrap();
        let y: Vec<f64> = x.iter().map(|v| a * v + b).collect();
        let f = effective_sample_size(&y).unwrap();
        prop_assert!((e - f).abs() <= 1e-9 * e, "{} vs {}", e, f);
    }
}
