//! Model registry, black-box compensator, forward simulation and the
//! cumulative-state extension for aggregated data.

mod dictionary;
mod extended;
mod models;

pub use dictionary::{Basis, BasisDictionary};
pub use extended::{extend_for_aggregation, rollout_windows, AlphaMode, ExtendedModel, WindowRollout};
pub use models::{
    registry_get, CstrConstants, Disturbance, ModelKind, ModelParams, ModelSpec, PolyTerm, PolynomialModel,
    LINEAR2ND_THETA, LOTKA_VOLTERRA_THETA,
};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adiff::{AdError, Scalar};
use crate::observations::NoiseSpec;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("unknown model `{0}`")]
    UnknownModel(String),
    #[error("bad dimension: {0}")]
    BadDimension(String),
    #[error("domain error{}: {source}", step.map(|k| format!(" at step {k}")).unwrap_or_default())]
    Domain { step: Option<usize>, source: AdError },
}

impl ModelError {
    pub(crate) fn domain(op: &'static str, value: f64) -> Self {
        ModelError::Domain {
            step: None,
            source: AdError::Domain { op, value },
        }
    }

    /// Attach the offending time step to a domain error.
    pub fn at_step(self, k: usize) -> Self {
        match self {
            ModelError::Domain { step: None, source } => ModelError::Domain { step: Some(k), source },
            other => other,
        }
    }
}

impl From<AdError> for ModelError {
    fn from(source: AdError) -> Self {
        ModelError::Domain { step: None, source }
    }
}

/// What is added to the physics update `f(x, u; θ)`.
pub enum Residual<'a, S> {
    None,
    /// The model's truth disturbance `Δ(x, u)`; data generation only.
    Truth,
    /// Black-box compensator `δ(x, u; ω)`.
    Compensator {
        dictionary: &'a BasisDictionary,
        weights: &'a [S],
    },
}

/// Discrete-time dynamics evaluable over any [`Scalar`].
pub trait Dynamics {
    fn n_x(&self) -> usize;
    fn n_u(&self) -> usize;
    fn n_z(&self) -> usize;
    fn n_theta(&self) -> usize;

    /// `x_{k+1} = f(x_k, u_k; θ) + residual`.
    fn step<S: Scalar>(
        &self,
        x: &[S],
        u: &[f64],
        theta: &[S],
        residual: &Residual<'_, S>,
    ) -> Result<Vec<S>, ModelError>;

    /// `z_k = h(x_k; θ)`.
    fn output<S: Scalar>(&self, x: &[S], theta: &[S]) -> Vec<S>;
}

#[derive(Debug, Clone)]
pub struct Rollout<S> {
    /// `x_0 … x_T`.
    pub states: Vec<Vec<S>>,
    /// `z_0 … z_{T-1}`.
    pub outputs: Vec<Vec<S>>,
}

/// Propagate `horizon` steps from `x0`.
pub fn rollout<S: Scalar, D: Dynamics>(
    model: &D,
    x0: &[S],
    inputs: &[Vec<f64>],
    theta: &[S],
    residual: &Residual<'_, S>,
    horizon: usize,
) -> Result<Rollout<S>, ModelError> {
    if inputs.len() < horizon {
        return Err(ModelError::BadDimension(format!(
            "{} inputs for a horizon of {horizon}",
            inputs.len()
        )));
    }
    let mut states = Vec::with_capacity(horizon + 1);
    let mut outputs = Vec::with_capacity(horizon);
    let mut x = x0.to_vec();
    for (k, u) in inputs.iter().take(horizon).enumerate() {
        outputs.push(model.output(&x, theta));
        let next = model.step(&x, u, theta, residual).map_err(|e| e.at_step(k))?;
        states.push(std::mem::replace(&mut x, next));
    }
    states.push(x);
    Ok(Rollout { states, outputs })
}

/// Simulated data: clean and noisy channels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub states: Vec<Vec<f64>>,
    pub outputs: Vec<Vec<f64>>,
    pub noisy_outputs: Vec<Vec<f64>>,
    /// Inputs as a recorder would see them (`u + η^u`).
    pub recorded_inputs: Vec<Vec<f64>>,
}

/// Forward simulation with measurement noise. Pure function of its arguments.
pub fn simulate<D: Dynamics>(
    model: &D,
    x0: &[f64],
    inputs: &[Vec<f64>],
    theta: &[f64],
    residual: &Residual<'_, f64>,
    horizon: usize,
    noise: &NoiseSpec,
) -> Result<Trajectory, ModelError> {
    noise
        .validate()
        .map_err(|e| ModelError::BadDimension(e.to_string()))?;
    let r = rollout(model, x0, inputs, theta, residual, horizon)?;
    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
    let mut noisy_outputs = Vec::with_capacity(horizon);
    let mut recorded_inputs = Vec::with_capacity(horizon);
    for (z, u) in r.outputs.iter().zip(inputs) {
        noisy_outputs.push(perturb(z, &noise.output_std, &mut rng));
        recorded_inputs.push(perturb(u, &noise.input_std, &mut rng));
    }
    Ok(Trajectory {
        states: r.states,
        outputs: r.outputs,
        noisy_outputs,
        recorded_inputs,
    })
}

fn perturb(v: &[f64], std: &[f64], rng: &mut ChaCha8Rng) -> Vec<f64> {
    v.iter()
        .enumerate()
        .map(|(i, &x)| match std.get(i).copied().unwrap_or(0.0) {
            s if s > 0.0 => x + Normal::new(0.0, s).expect("finite std").sample(rng),
            _ => x,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear2nd_first_step() {
        let m = registry_get("linear2nd", &ModelParams::default()).unwrap();
        let th = m.nominal_theta.clone();
        let r = rollout(&m, &[1.0, 0.0], &[vec![0.0]], &th, &Residual::None, 1).unwrap();
        assert_eq!(r.states[1], vec![1.78, 1.0]);
        assert_eq!(r.outputs[0], vec![0.1037]);
    }

    #[test]
    fn zero_noise_single_step_is_output_map() {
        let m = registry_get("lotka_volterra", &ModelParams::default()).unwrap();
        let th = m.nominal_theta.clone();
        let t = simulate(&m, &[2.0, 3.0], &[vec![]], &th, &Residual::Truth, 1, &NoiseSpec::default()).unwrap();
        assert_eq!(t.outputs, vec![vec![2.0, 3.0]]);
        assert_eq!(t.noisy_outputs, t.outputs);
    }

    #[test]
    fn simulate_is_deterministic() {
        let m = registry_get("linear2nd", &ModelParams::default()).unwrap();
        let th = m.nominal_theta.clone();
        let u = vec![vec![1.0]; 104];
        let noise = NoiseSpec {
            output_std: vec![0.1],
            input_std: vec![0.05],
            seed: 7,
        };
        let a = simulate(&m, &[0.0, 0.0], &u, &th, &Residual::None, 104, &noise).unwrap();
        let b = simulate(&m, &[0.0, 0.0], &u, &th, &Residual::None, 104, &noise).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.noisy_outputs, a.outputs);
        assert_eq!(a.outputs.len(), 104);
        assert_eq!(a.states.len(), 105);
    }

    #[test]
    fn zero_compensator_matches_undisturbed_truth() {
        let mut m = registry_get("lotka_volterra", &ModelParams::default()).unwrap();
        m.truth_disturbance = None;
        let th = m.nominal_theta.clone();
        let d = BasisDictionary::standard(2, false);
        let w = vec![0.0; d.n_weights()];
        let inputs = vec![vec![]; 200];
        let truth = rollout(&m, &[2.0, 3.0], &inputs, &th, &Residual::Truth, 200).unwrap();
        let est = rollout(
            &m,
            &[2.0, 3.0],
            &inputs,
            &th,
            &Residual::Compensator {
                dictionary: &d,
                weights: &w,
            },
            200,
        )
        .unwrap();
        assert_eq!(truth.outputs, est.outputs);
    }

    #[test]
    fn domain_error_reports_step() {
        let m = registry_get("cstr", &ModelParams::default()).unwrap();
        let th = m.nominal_theta.clone();
        let mut u = vec![vec![100.0]; 5];
        u[3] = vec![0.0];
        match rollout(&m, &[0.1, 440.0], &u, &th, &Residual::None, 5) {
            Err(ModelError::Domain { step: Some(3), .. }) => {}
            other => panic!("{other:?}"),
        }
    }
}
