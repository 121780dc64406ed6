use nusid::analysis::{aggregation_matrices, gamma_distance, missing_bound, BoundReport, SIGMA_XI};
use nusid::observations::{observed_count, sample_missing_mask};
use proptest::prelude::*;

#[test]
fn aggregation_singular_values() {
    for tr in 1..=50 {
        let r = aggregation_matrices(tr * 4, tr).unwrap();
        assert!((r.sigma_max - (tr as f64).sqrt()).abs() <= 1e-10, "Tr={tr}: {}", r.sigma_max);
        assert!(r.beta_in_bracket(), "Tr={tr}: beta {} outside {:?}", r.beta, r.bracket);
    }
}

#[test]
fn gamma_distance_on_grid() {
    for t in [1usize, 2, 7, 20, 64, 104, 250, 1000] {
        for n in 1..=t {
            let step = (t / 25).max(1);
            if n % step != 0 && n != t {
                continue;
            }
            let available: Vec<usize> = (0..n).map(|i| i * t / n).collect();
            let g = gamma_distance(t, &available).unwrap();
            let p = (t - n) as f64 / t as f64;
            let expect = p.sqrt() / (t as f64).sqrt();
            assert!((g.constructed - expect).abs() <= 1e-12, "T={t} N={n}");
            assert!((g.closed_form - expect).abs() <= 1e-12);
        }
    }
}

#[test]
fn reference_bound_value() {
    let b = missing_bound(SIGMA_XI, 104, 0.25);
    assert!((b - 0.2059).abs() < 1e-4, "{b}");
    match BoundReport::missing(104, 0.25, SIGMA_XI).unwrap() {
        BoundReport::Missing { observed, bound, .. } => {
            assert_eq!(observed, 78);
            assert_eq!(bound, b);
        }
        other => panic!("unexpected {other:?}"),
    }
}

proptest! {
    #[test]
    fn sampled_masks_match_requested_fraction(t in 1usize..400, p in 0.0f64..0.99, seed in any::<u64>()) {
        prop_assume!(observed_count(t, p) > 0);
        let mask = sample_missing_mask(t, p, seed).unwrap();
        let target = (1.0 - p) * t as f64;
        prop_assert!((mask.len() as f64 - target).abs() <= 1.0);
        prop_assert!(mask.windows(2).all(|w| w[0] < w[1]));
        let g = gamma_distance(t, &mask).unwrap();
        prop_assert!((g.constructed - g.closed_form).abs() <= 1e-12);
    }

    #[test]
    fn beta_bracket_for_random_horizons(tr in 1usize..30, m in 1usize..6) {
        let r = aggregation_matrices(tr * m, tr).unwrap();
        prop_assert!(r.beta_in_bracket());
        prop_assert!((r.sigma_max - (tr as f64).sqrt()).abs() <= 1e-10);
    }
}
