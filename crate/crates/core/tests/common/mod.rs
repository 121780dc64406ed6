#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use nusid::cost::{Penalties, SchemeObjective};
use nusid::dynamics::{
    extend_for_aggregation, registry_get, simulate, AlphaMode, BasisDictionary, Dynamics, ModelParams, ModelSpec, Residual,
};
use nusid::observations::{aggregate, sample_missing_mask, MaskedTrace, NoiseSpec, ObservationSet, Trace};
use nusid::optimizer::{objective_value, value_and_gradient, DecisionVector};

pub const MODELS: [&str; 3] = ["linear2nd", "cstr", "lotka_volterra"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    Uniform,
    Missing,
    MultiRun,
    Aggregated,
}

pub const SCHEMES: [Scheme; 4] = [Scheme::Uniform, Scheme::Missing, Scheme::MultiRun, Scheme::Aggregated];

pub fn model(name: &str) -> ModelSpec {
    registry_get(name, &ModelParams::default()).unwrap()
}

pub fn nominal_x0(name: &str) -> Vec<f64> {
    match name {
        "linear2nd" => vec![0.1, -0.2],
        "cstr" => vec![0.09, 441.0],
        _ => vec![2.0, 3.0],
    }
}

/// Characteristic magnitude of each state, used for perturbations.
pub fn state_scale(name: &str) -> Vec<f64> {
    match name {
        "linear2nd" => vec![0.2, 0.2],
        "cstr" => vec![0.005, 2.0],
        _ => vec![0.2, 0.2],
    }
}

pub fn inputs(name: &str, horizon: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    match name {
        "linear2nd" => (0..horizon).map(|_| vec![rng.gen_range(-1.0..1.0)]).collect(),
        "cstr" => {
            let mut level = 100.0;
            (0..horizon)
                .map(|k| {
                    if k % 5 == 0 {
                        level = rng.gen_range(97.0..103.0);
                    }
                    vec![level]
                })
                .collect()
        }
        _ => vec![vec![]; horizon],
    }
}

pub fn dictionary(name: &str) -> BasisDictionary {
    match name {
        "cstr" => BasisDictionary::standard(2, true)
            .with_normalization(vec![0.09, 441.0], vec![0.02, 5.0])
            .with_output_scale(vec![1e-3, 0.1]),
        "linear2nd" => BasisDictionary::standard(2, true).with_output_scale(vec![0.01, 0.01]),
        _ => BasisDictionary::standard(2, false).with_output_scale(vec![0.01, 0.01]),
    }
}

/// An objective on simulated data and a random decision vector near the truth.
pub fn case(name: &str, scheme: Scheme, seed: u64) -> (SchemeObjective, DecisionVector) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = model(name);
    let x0 = nominal_x0(name);
    let horizon = 24;
    let u = inputs(name, horizon, &mut rng);
    let noise = NoiseSpec {
        output_std: state_scale(name).iter().map(|s| 0.05 * s).collect(),
        input_std: vec![],
        seed,
    };
    let traj = simulate(&m, &x0, &u, &m.nominal_theta, &Residual::Truth, horizon, &noise).unwrap();
    let z = traj.noisy_outputs;
    let trace = Trace {
        inputs: u.clone(),
        outputs: z.clone(),
    };
    let (set, runs) = match scheme {
        Scheme::Uniform => (
            ObservationSet::Uniform(trace.clone()),
            1,
        ),
        Scheme::Missing => {
            let mask = sample_missing_mask(horizon, rng.gen_range(0.1..0.7), rng.gen()).unwrap();
            (ObservationSet::Missing(trace.masked(mask).unwrap()), 1)
        }
        Scheme::MultiRun => {
            let n = rng.gen_range(2..=3);
            let len = horizon / n;
            let runs: Vec<MaskedTrace> = (0..n)
                .map(|r| {
                    let lo = r * len;
                    let mask = sample_missing_mask(len, rng.gen_range(0.0..0.5), rng.gen()).unwrap();
                    Trace {
                        inputs: u[lo..lo + len].to_vec(),
                        outputs: z[lo..lo + len].to_vec(),
                    }
                    .masked(mask)
                    .unwrap()
                })
                .collect();
            (ObservationSet::MultiRun { runs }, n)
        }
        Scheme::Aggregated => {
            let window = [2, 3, 4, 6][rng.gen_range(0..4)];
            let mode = if rng.gen() { AlphaMode::Averaged } else { AlphaMode::Cumulative };
            (aggregate(&z, &u, window, horizon / window, mode).unwrap(), 1)
        }
    };
    let penalties = Penalties {
        l1_weight: 1e-3,
        barrier_weight: 1e-3,
        barrier_sharpness: 5.0,
        barrier_indices: (0..m.n_theta()).collect(),
        ..Penalties::default()
    };
    let dict = dictionary(name);
    let n_omega = dict.n_weights();
    let obj = SchemeObjective::new(&m, Some(dict), set, penalties).unwrap();
    let theta = m
        .nominal_theta
        .iter()
        .map(|t| t * (1.0 + rng.gen_range(-0.05..0.05)))
        .collect();
    let scale = state_scale(name);
    let x0s = (0..runs)
        .map(|_| x0.iter().zip(&scale).map(|(x, s)| x + 0.1 * s * rng.gen_range(-1.0..1.0)).collect())
        .collect();
    let omega = (0..n_omega).map(|_| rng.gen_range(-0.05..0.05)).collect();
    (obj, DecisionVector { theta, x0: x0s, omega })
}

/// Per-entry perturbation scale of a decision vector.
pub fn entry_scales(name: &str, dv: &DecisionVector) -> Vec<f64> {
    let mut s: Vec<f64> = dv.theta.iter().map(|t| t.abs().max(1e-3)).collect();
    for _ in &dv.x0 {
        s.extend(state_scale(name));
    }
    s.extend(std::iter::repeat(0.1).take(dv.omega.len()));
    s
}

/// Relative error `‖G − G_fd‖ / ‖G_fd‖` of the scaled gradient `G_i = g_i s_i`
/// against a fourth-order central difference.
pub fn gradient_error<O: nusid::cost::Objective>(obj: &O, dv: &DecisionVector, scales: &[f64]) -> f64 {
    let (_, g) = value_and_gradient(obj, dv).unwrap();
    let flat = dv.flatten();
    let layout = dv.layout();
    let at = |i: usize, d: f64| {
        let mut v = flat.clone();
        v[i] += d;
        objective_value(obj, &DecisionVector::unflatten(layout, &v).unwrap()).unwrap()
    };
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..flat.len() {
        let h = 1e-4 * scales[i];
        let fd = (-at(i, 2.0 * h) + 8.0 * at(i, h) - 8.0 * at(i, -h) + at(i, -2.0 * h)) / (12.0 * h);
        num += ((g[i] - fd) * scales[i]).powi(2);
        den += (fd * scales[i]).powi(2);
    }
    (num / den).sqrt()
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

/// One random extended-vs-base comparison; returns the largest relative error.
pub fn window_equivalence(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let name = MODELS[rng.gen_range(0..3)];
    let m = model(name);
    let window = rng.gen_range(1..=50);
    let alpha = if rng.gen() { 1.0 } else { 1.0 / window as f64 };
    let theta: Vec<f64> = m.nominal_theta.iter().map(|t| t * (1.0 + rng.gen_range(-0.05..0.05))).collect();
    let x0: Vec<f64> = nominal_x0(name)
        .iter()
        .zip(state_scale(name))
        .map(|(x, s)| x + 0.1 * s * rng.gen_range(-1.0..1.0))
        .collect();
    let u = inputs(name, window, &mut rng);
    let quiet = NoiseSpec::default();
    let base = simulate(&m, &x0, &u, &theta, &Residual::Truth, window, &quiet).unwrap();
    let ext = extend_for_aggregation(&m, alpha).unwrap();
    let mut u_ext = u.clone();
    u_ext.push(u[window - 1].clone());
    let extended = simulate(&ext, &ext.initial_state(&x0), &u_ext, &theta, &Residual::Truth, window + 1, &quiet).unwrap();
    let mut worst: f64 = 0.0;
    for i in 0..m.n_z() {
        let mut sum = 0.0;
        for z in &base.outputs {
            sum += z[i];
        }
        worst = worst.max(rel(extended.outputs[window][i], alpha * sum));
    }
    worst
}

/// Objective value on a uniform record and on the same record expressed as
/// fully observed missing, single-run and unit-window aggregated data.
pub fn reduced_objectives(seed: u64) -> (f64, Vec<(&'static str, f64)>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let name = MODELS[rng.gen_range(0..3)];
    let m = model(name);
    let u = inputs(name, 20, &mut rng);
    let x0 = nominal_x0(name);
    let noise = NoiseSpec { output_std: vec![1e-3; 2], input_std: vec![], seed };
    let z = simulate(&m, &x0, &u, &m.nominal_theta, &Residual::Truth, 20, &noise).unwrap().noisy_outputs;
    let trace = Trace { inputs: u.clone(), outputs: z.clone() };
    let dict = dictionary(name);
    let dv = DecisionVector {
        theta: m.nominal_theta.iter().map(|t| t * 1.01).collect(),
        x0: vec![x0],
        omega: (0..dict.n_weights()).map(|_| rng.gen_range(-0.01..0.01)).collect(),
    };
    let value = |set: ObservationSet| {
        let obj = SchemeObjective::new(&m, Some(dict.clone()), set, Penalties::default()).unwrap();
        objective_value(&obj, &dv).unwrap()
    };
    let uniform = value(ObservationSet::Uniform(trace.clone()));
    let reduced = vec![
        ("missing", value(ObservationSet::Missing(trace.full_mask()))),
        ("multirun", value(ObservationSet::MultiRun { runs: vec![trace.full_mask()] })),
        ("aggregated", value(aggregate(&z, &u, 1, 20, AlphaMode::Cumulative).unwrap())),
    ];
    (uniform, reduced)
}
