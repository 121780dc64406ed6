mod common;

use common::{dictionary, inputs, model, nominal_x0, rel, window_equivalence, MODELS};
use nusid::cost::{Penalties, SchemeObjective};
use nusid::dynamics::{extend_for_aggregation, rollout_windows, simulate, AlphaMode, Residual};
use nusid::observations::{aggregate, NoiseSpec, ObservationSet, Trace};
use nusid::optimizer::{value_and_gradient, DecisionVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn extended_window_output_is_scaled_sum(seed in any::<u64>()) {
        let e = window_equivalence(seed);
        prop_assert!(e <= 1e-12, "{e:e}");
    }

    #[test]
    fn aggregate_of_simulation_matches_chained_windows(seed in any::<u64>(), window in 1usize..8, windows in 1usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let name = MODELS[rng.gen_range(0..3)];
        let m = model(name);
        let n = window * windows;
        let u = inputs(name, n, &mut rng);
        let x0 = nominal_x0(name);
        let traj = simulate(&m, &x0, &u, &m.nominal_theta, &Residual::Truth, n, &NoiseSpec::default()).unwrap();
        for mode in [AlphaMode::Cumulative, AlphaMode::Averaged] {
            let ObservationSet::Aggregated(a) = aggregate(&traj.outputs, &u, window, windows, mode).unwrap() else {
                unreachable!()
            };
            let ext = extend_for_aggregation(&m, mode.alpha(window)).unwrap();
            let r = rollout_windows(&ext, &x0, &u, &m.nominal_theta, &Residual::Truth, window, windows).unwrap();
            for (rec, out) in a.records.iter().zip(&r.window_outputs) {
                for (x, y) in rec.iter().zip(out) {
                    prop_assert!(rel(*y, *x) <= 1e-12);
                }
            }
            prop_assert_eq!(&r.base_outputs, &traj.outputs);
        }
    }

    #[test]
    fn zero_compensator_reproduces_undisturbed_truth(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for name in MODELS {
            let mut m = model(name);
            m.truth_disturbance = None;
            let u = inputs(name, 30, &mut rng);
            let x0 = nominal_x0(name);
            let dict = dictionary(name);
            let omega = vec![0.0; dict.n_weights()];
            let quiet = NoiseSpec::default();
            let truth = simulate(&m, &x0, &u, &m.nominal_theta, &Residual::Truth, 30, &quiet).unwrap();
            let est = simulate(
                &m.estimation_view(),
                &x0,
                &u,
                &m.nominal_theta,
                &Residual::Compensator { dictionary: &dict, weights: &omega },
                30,
                &quiet,
            )
            .unwrap();
            prop_assert_eq!(truth, est);
        }
    }
}

#[test]
fn nominal_point_is_stationary_without_disturbance() {
    for name in MODELS {
        let mut m = model(name);
        m.truth_disturbance = None;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let u = inputs(name, 40, &mut rng);
        let x0 = nominal_x0(name);
        let traj = simulate(&m, &x0, &u, &m.nominal_theta, &Residual::Truth, 40, &NoiseSpec::default()).unwrap();
        let set = ObservationSet::Uniform(Trace {
            inputs: u,
            outputs: traj.outputs,
        });
        let dict = dictionary(name);
        let obj = SchemeObjective::new(&m, Some(dict.clone()), set, Penalties::none()).unwrap();
        let dv = DecisionVector {
            theta: m.nominal_theta.clone(),
            x0: vec![x0],
            omega: vec![0.0; dict.n_weights()],
        };
        let (f, g) = value_and_gradient(&obj, &dv).unwrap();
        assert_eq!(f, 0.0, "{name}");
        let g_theta: f64 = g[..m.nominal_theta.len()].iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(g_theta <= 1e-8, "{name}: {g_theta:e}");
    }
}
