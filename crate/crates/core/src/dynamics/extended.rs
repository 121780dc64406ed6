//! Cumulative-state extension used for aggregated observations.
//!
//! The extended state is `[x; c]` with `c_{k+1} = c_k + h(x_k; θ)` and output
//! `z̄_k = α c_k`. Starting a window with `c = 0`, the output after `T_r`
//! steps equals `α Σ_{k<T_r} h(x_k; θ)`.

use serde::{Deserialize, Serialize};

use crate::adiff::Scalar;

use super::{Dynamics, ModelError, ModelSpec, Residual};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlphaMode {
    /// `α = 1`
    Cumulative,
    /// `α = 1 / T_r`
    Averaged,
}

impl AlphaMode {
    pub fn alpha(self, window: usize) -> f64 {
        match self {
            AlphaMode::Cumulative => 1.0,
            AlphaMode::Averaged => 1.0 / window as f64,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExtendedModel {
    pub base: ModelSpec,
    pub alpha: f64,
}

pub fn extend_for_aggregation(model: &ModelSpec, alpha: f64) -> Result<ExtendedModel, ModelError> {
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(ModelError::BadDimension(format!("aggregation gain must be positive, got {alpha}")));
    }
    Ok(ExtendedModel {
        base: model.clone(),
        alpha,
    })
}

impl ExtendedModel {
    /// `[x0; 0]`.
    pub fn initial_state<S: Scalar>(&self, x0: &[S]) -> Vec<S> {
        let mut s = x0.to_vec();
        s.extend((0..self.base.n_z()).map(|_| S::constant(0.0)));
        s
    }
}

impl Dynamics for ExtendedModel {
    fn n_x(&self) -> usize {
        self.base.n_x() + self.base.n_z()
    }
    fn n_u(&self) -> usize {
        self.base.n_u()
    }
    fn n_z(&self) -> usize {
        self.base.n_z()
    }
    fn n_theta(&self) -> usize {
        self.base.n_theta()
    }

    fn step<S: Scalar>(
        &self,
        x: &[S],
        u: &[f64],
        theta: &[S],
        residual: &Residual<'_, S>,
    ) -> Result<Vec<S>, ModelError> {
        let nx = self.base.n_x();
        if x.len() != self.n_x() {
            return Err(ModelError::BadDimension(format!(
                "extended state has {} entries, expected {}",
                x.len(),
                self.n_x()
            )));
        }
        let (state, cum) = x.split_at(nx);
        let mut next = self.base.step(state, u, theta, residual)?;
        let z = self.base.output(state, theta);
        next.extend(cum.iter().zip(z).map(|(&c, zi)| c + zi));
        Ok(next)
    }

    fn output<S: Scalar>(&self, x: &[S], _theta: &[S]) -> Vec<S> {
        x[self.base.n_x()..].iter().map(|&c| c * self.alpha).collect()
    }
}

/// Outputs of a chained windowed rollout.
#[derive(Debug, Clone)]
pub struct WindowRollout<S> {
    /// `z̄^{(i)}_{T_r}`, one per window.
    pub window_outputs: Vec<Vec<S>>,
    /// Per-step base outputs `z_k`, `k < M·T_r`.
    pub base_outputs: Vec<Vec<S>>,
    pub final_state: Vec<S>,
}

/// Roll the extended model over `windows` consecutive windows of length
/// `window`. The base state carries across windows; the cumulative state is
/// reset to zero at every window start.
pub fn rollout_windows<S: Scalar>(
    model: &ExtendedModel,
    x0: &[S],
    inputs: &[Vec<f64>],
    theta: &[S],
    residual: &Residual<'_, S>,
    window: usize,
    windows: usize,
) -> Result<WindowRollout<S>, ModelError> {
    let total = window * windows;
    if inputs.len() < total {
        return Err(ModelError::BadDimension(format!(
            "{} inputs for {} steps",
            inputs.len(),
            total
        )));
    }
    let nx = model.base.n_x();
    let mut base_outputs = Vec::with_capacity(total);
    let mut window_outputs = Vec::with_capacity(windows);
    let mut x = model.initial_state(x0);
    for w in 0..windows {
        for c in x[nx..].iter_mut() {
            *c = S::constant(0.0);
        }
        for j in 0..window {
            let k = w * window + j;
            base_outputs.push(model.base.output(&x[..nx], theta));
            x = model.step(&x, &inputs[k], theta, residual).map_err(|e| e.at_step(k))?;
        }
        window_outputs.push(model.output(&x, theta));
    }
    Ok(WindowRollout {
        window_outputs,
        base_outputs,
        final_state: x[..nx].to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{registry_get, rollout, ModelParams};

    #[test]
    fn single_step_window_returns_first_output() {
        let m = registry_get("lotka_volterra", &ModelParams::default()).unwrap();
        let ext = extend_for_aggregation(&m, 1.0).unwrap();
        let th = m.nominal_theta.clone();
        let r = rollout_windows(&ext, &[2.0, 3.0], &[vec![]], &th, &Residual::None, 1, 1).unwrap();
        assert_eq!(r.window_outputs[0], vec![2.0, 3.0]);
    }

    #[test]
    fn averaged_window_matches_mean_of_outputs() {
        let m = registry_get("lotka_volterra", &ModelParams::default()).unwrap();
        let ext = extend_for_aggregation(&m, AlphaMode::Averaged.alpha(12)).unwrap();
        let th = m.nominal_theta.clone();
        let inputs = vec![vec![]; 24];
        let r = rollout_windows(&ext, &[2.0, 3.0], &inputs, &th, &Residual::Truth, 12, 2).unwrap();
        let base = rollout(&m, &[2.0, 3.0], &inputs, &th, &Residual::Truth, 24).unwrap();
        for w in 0..2 {
            for ch in 0..2 {
                let mean: f64 = base.outputs[w * 12..(w + 1) * 12].iter().map(|z| z[ch]).sum::<f64>() / 12.0;
                let got = r.window_outputs[w][ch];
                assert!((got - mean).abs() <= 1e-12 * mean.abs());
            }
        }
        assert_eq!(r.final_state, base.states[24]);
    }

    #[test]
    fn rejects_nonpositive_gain() {
        let m = registry_get("linear2nd", &ModelParams::default()).unwrap();
        assert!(extend_for_aggregation(&m, 0.0).is_err());
    }
}
