//! Fit linear2nd from several short, partially observed runs, each with its
//! own initial state.

use nusid::cost::{Penalties, SchemeObjective};
use nusid::dynamics::{registry_get, simulate, ModelParams, Residual};
use nusid::observations::{sample_missing_mask, split_runs, NoiseSpec, ObservationSet, Trace};
use nusid::optimizer::{init_ball, minimize, DecisionVector, FreeBlocks, Hyper, Scaling};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() {
    let m = registry_get("linear2nd", &ModelParams::default()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let horizon = 120;
    let inputs: Vec<Vec<f64>> = (0..horizon).map(|_| vec![rng.gen_range(-1.0..1.0)]).collect();
    let noise = NoiseSpec {
        output_std: vec![0.01],
        input_std: vec![],
        seed: 6,
    };
    let sim = simulate(&m, &[0.0, 0.0], &inputs, &m.nominal_theta, &Residual::Truth, horizon, &noise).unwrap();
    let trace = Trace {
        inputs,
        outputs: sim.noisy_outputs,
    };
    let mask = sample_missing_mask(horizon, 0.3, 7).unwrap();
    let runs = split_runs(&trace, &mask, 30).unwrap();
    let true_x0: Vec<Vec<f64>> = (0..runs.len()).map(|r| sim.states[30 * r].clone()).collect();
    println!("{} runs, observed per run: {:?}", runs.len(), runs.iter().map(|r| r.observed()).collect::<Vec<_>>());

    let objective = SchemeObjective::new(&m, None, ObservationSet::MultiRun { runs }, Penalties::none()).unwrap();
    let init = DecisionVector {
        theta: init_ball(&m.nominal_theta, 0.1, 8),
        x0: vec![vec![0.0, 0.0]; true_x0.len()],
        omega: vec![],
    };
    let hyper = Hyper {
        learning_rate: 0.01,
        max_iters: 3000,
        ..Hyper::default()
    };
    let scaling = Scaling::by_magnitude(&m.nominal_theta, &[1.0, 1.0], 1.0);
    let fit = minimize(&objective, &init, &scaling, FreeBlocks::default(), &hyper).unwrap();

    let err = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    println!("objective {:.3e} after {} iterations ({:?})", fit.objective, fit.iterations, fit.termination);
    println!("theta error: init {:.4} fitted {:.4}", err(&init.theta, &m.nominal_theta), err(&fit.decision.theta, &m.nominal_theta));
    for (r, (x, t)) in fit.decision.x0.iter().zip(&true_x0).enumerate() {
        println!("run {r}: x0 {x:.3?} true {t:.3?}");
    }
}
