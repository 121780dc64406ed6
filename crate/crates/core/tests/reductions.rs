mod common;

use common::{case, reduced_objectives, Scheme};
use nusid::cost::{build_aggregated, build_missing, build_multirun, build_uniform, RunTerm, SchemeObjective};
use nusid::observations::ObservationSet;
use nusid::optimizer::{objective_value, DecisionVector};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rows(rng: &mut ChaCha8Rng, t: usize, n: usize) -> Vec<Vec<f64>> {
    (0..t).map(|_| (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect()).collect()
}

proptest! {
    #[test]
    fn cost_builders_reduce_to_uniform(seed in any::<u64>(), t in 1usize..40, n in 1usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pred = rows(&mut rng, t, n);
        let meas = rows(&mut rng, t, n);
        let all: Vec<usize> = (0..t).collect();
        let uniform = build_uniform(&pred, &meas).unwrap();
        prop_assert_eq!(build_missing(&pred, &meas, &all).unwrap(), uniform);
        let run = RunTerm { pred: &pred, meas: &meas, available: &all };
        prop_assert_eq!(build_multirun(&[run]).unwrap(), uniform);
        prop_assert_eq!(build_aggregated(&pred, &meas).unwrap(), uniform);
    }

    #[test]
    fn scheme_objectives_reduce_to_uniform(seed in any::<u64>()) {
        let (uniform, reduced) = reduced_objectives(seed);
        for (label, v) in reduced {
            prop_assert_eq!(v, uniform, "{}", label);
        }
    }

    #[test]
    fn missing_cost_ignores_mask_order(seed in any::<u64>(), t in 2usize..40) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pred = rows(&mut rng, t, 2);
        let mut available: Vec<usize> = (0..t).filter(|_| rng.gen()).collect();
        available.push(t - 1);
        available.dedup();
        let meas = rows(&mut rng, available.len(), 2);
        let before = build_missing(&pred, &meas, &available).unwrap();
        let mut pairs: Vec<(usize, Vec<f64>)> = available.into_iter().zip(meas).collect();
        pairs.shuffle(&mut rng);
        let (available, meas): (Vec<usize>, Vec<Vec<f64>>) = pairs.into_iter().unzip();
        let after = build_missing(&pred, &meas, &available).unwrap();
        prop_assert!((after - before).abs() <= 1e-12 * before.abs());
    }

    #[test]
    fn multirun_objective_ignores_run_order(seed in any::<u64>()) {
        let (obj, dv) = case("linear2nd", Scheme::MultiRun, seed);
        let before = objective_value(&obj, &dv).unwrap();
        let ObservationSet::MultiRun { runs } = obj.data.clone() else { unreachable!() };
        let mut order: Vec<usize> = (0..runs.len()).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed ^ 1));
        let data = ObservationSet::MultiRun { runs: order.iter().map(|&i| runs[i].clone()).collect() };
        let dv = DecisionVector { x0: order.iter().map(|&i| dv.x0[i].clone()).collect(), ..dv };
        let shuffled = SchemeObjective::new(&obj.model, obj.dictionary.clone(), data, obj.penalties.clone()).unwrap();
        let after = objective_value(&shuffled, &dv).unwrap();
        prop_assert!((after - before).abs() <= 1e-12 * before.abs(), "{before} vs {after}");
    }
}
