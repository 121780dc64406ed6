//! Multi-step prediction costs for each observation scheme, plus penalties.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adiff::Scalar;
use crate::dynamics::{Dynamics, 
    extend_for_aggregation, rollout, rollout_windows, BasisDictionary, ModelError, ModelSpec, Residual,
};
use crate::observations::{ObservationError, ObservationSet};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CostError {
    #[error("length mismatch: {0}")]
    LengthMismatch(String),
    #[error("observed index {index} outside horizon {horizon}")]
    IndexOutOfRange { index: usize, horizon: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Observation(#[from] ObservationError),
}

fn sq_norm<S: Scalar>(pred: &[S], meas: &[f64]) -> Result<S, CostError> {
    if pred.len() != meas.len() {
        return Err(CostError::LengthMismatch(format!(
            "prediction has {} channels, measurement {}",
            pred.len(),
            meas.len()
        )));
    }
    let mut acc = S::constant(0.0);
    for (&p, &m) in pred.iter().zip(meas) {
        let e = p - m;
        acc = acc + e * e;
    }
    Ok(acc)
}

/// `(1/T) Σ_k ‖z̃_k − ẑ_k‖²`.
pub fn build_uniform<S: Scalar>(pred: &[Vec<S>], meas: &[Vec<f64>]) -> Result<S, CostError> {
    if pred.len() != meas.len() || pred.is_empty() {
        return Err(CostError::LengthMismatch(format!(
            "{} predictions for {} measurements",
            pred.len(),
            meas.len()
        )));
    }
    let mut acc = S::constant(0.0);
    for (p, m) in pred.iter().zip(meas) {
        acc = acc + sq_norm(p, m)?;
    }
    Ok(acc * (1.0 / pred.len() as f64))
}

fn missing_sum<S: Scalar>(pred: &[Vec<S>], meas: &[Vec<f64>], available: &[usize]) -> Result<S, CostError> {
    if meas.len() != available.len() {
        return Err(CostError::LengthMismatch(format!(
            "{} records for {} observed steps",
            meas.len(),
            available.len()
        )));
    }
    let mut acc = S::constant(0.0);
    for (&k, m) in available.iter().zip(meas) {
        let p = pred.get(k).ok_or(CostError::IndexOutOfRange {
            index: k,
            horizon: pred.len(),
        })?;
        acc = acc + sq_norm(p, m)?;
    }
    Ok(acc)
}

/// `(1/T) Σ_{k ∈ κ_N} ‖z̃_k − ẑ_k‖²` with `pred` covering all `T` steps and
/// `meas[j]` the record at step `available[j]`. The normalization is `1/T`, not `1/N`.
pub fn build_missing<S: Scalar>(pred: &[Vec<S>], meas: &[Vec<f64>], available: &[usize]) -> Result<S, CostError> {
    if let Some(&index) = available.iter().find(|&&k| k >= pred.len()) {
        return Err(CostError::IndexOutOfRange {
            index,
            horizon: pred.len(),
        });
    }
    Ok(missing_sum(pred, meas, available)? * (1.0 / pred.len() as f64))
}

/// One run of a multi-run objective.
pub struct RunTerm<'a, S> {
    pub pred: &'a [Vec<S>],
    pub meas: &'a [Vec<f64>],
    pub available: &'a [usize],
}

/// `(1/Σ_i T_i) Σ_i Σ_{k ∈ κ⁽ⁱ⁾} ‖e⁽ⁱ⁾_k‖²`; equals `1/(M T_r)` for equal-length runs.
pub fn build_multirun<S: Scalar>(runs: &[RunTerm<'_, S>]) -> Result<S, CostError> {
    if runs.is_empty() {
        return Err(CostError::LengthMismatch("no runs".into()));
    }
    let mut acc = S::constant(0.0);
    let mut steps = 0usize;
    for r in runs {
        if let Some(&index) = r.available.iter().find(|&&k| k >= r.pred.len()) {
            return Err(CostError::IndexOutOfRange {
                index,
                horizon: r.pred.len(),
            });
        }
        acc = acc + missing_sum(r.pred, r.meas, r.available)?;
        steps += r.pred.len();
    }
    Ok(acc * (1.0 / steps as f64))
}

/// `(1/M) Σ_i ‖Z̃⁽ⁱ⁾ − z̄⁽ⁱ⁾_{T_r}‖²`.
pub fn build_aggregated<S: Scalar>(window_pred: &[Vec<S>], records: &[Vec<f64>]) -> Result<S, CostError> {
    build_uniform(window_pred, records)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Penalties {
    /// Weight of `Σ √(ω² + ε)`.
    pub l1_weight: f64,
    pub l1_eps: f64,
    /// Weight of `Σ exp(−s θ_j)` over `barrier_indices`.
    pub barrier_weight: f64,
    pub barrier_sharpness: f64,
    pub barrier_indices: Vec<usize>,
}

impl Default for Penalties {
    fn default() -> Self {
        Penalties {
            l1_weight: 1e-4,
            l1_eps: 1e-8,
            barrier_weight: 1e-3,
            barrier_sharpness: 50.0,
            barrier_indices: Vec::new(),
        }
    }
}

impl Penalties {
    pub fn none() -> Self {
        Penalties {
            l1_weight: 0.0,
            barrier_weight: 0.0,
            ..Default::default()
        }
    }

    pub fn validate(&self, n_theta: usize) -> Result<(), String> {
        if !(self.l1_weight >= 0.0 && self.barrier_weight >= 0.0) {
            return Err("penalty weights must be >= 0".into());
        }
        if !(self.l1_eps > 0.0 && self.barrier_sharpness > 0.0) {
            return Err("l1_eps and barrier_sharpness must be positive".into());
        }
        if let Some(i) = self.barrier_indices.iter().find(|&&i| i >= n_theta) {
            return Err(format!("barrier index {i} out of range for {n_theta} parameters"));
        }
        Ok(())
    }
}

/// `loss + w₁ Σ √(ω_i² + ε) + w₂ Σ_{j} exp(−s θ_j)`.
pub fn add_penalties<S: Scalar>(loss: S, omega: &[S], theta: &[S], p: &Penalties) -> Result<S, CostError> {
    let mut out = loss;
    if p.l1_weight != 0.0 && !omega.is_empty() {
        let mut acc = S::constant(0.0);
        for &w in omega {
            acc = acc + (w * w + p.l1_eps).try_sqrt().map_err(ModelError::from)?;
        }
        out = out + acc * p.l1_weight;
    }
    if p.barrier_weight != 0.0 && !p.barrier_indices.is_empty() {
        let mut acc = S::constant(0.0);
        for &j in &p.barrier_indices {
            acc = acc + (theta[j] * -p.barrier_sharpness).exp();
        }
        out = out + acc * p.barrier_weight;
    }
    Ok(out)
}

/// Physical decision variables handed to an objective.
#[derive(Debug, Clone)]
pub struct DecisionView<S> {
    pub theta: Vec<S>,
    /// One initial state per run (one in total for single-record schemes).
    pub x0: Vec<Vec<S>>,
    pub omega: Vec<S>,
}

/// A scalar objective of the decision variables.
pub trait Objective: Sync {
    fn evaluate<S: Scalar>(&self, v: &DecisionView<S>) -> Result<S, CostError>;
}

/// The prediction-error objective of a model on an observation set.
#[derive(Debug, Clone)]
pub struct SchemeObjective {
    pub model: ModelSpec,
    pub dictionary: Option<BasisDictionary>,
    pub data: ObservationSet,
    pub penalties: Penalties,
    output_weights: Option<Vec<f64>>,
    weighted_data: Option<ObservationSet>,
}

impl SchemeObjective {
    /// The estimation model never sees the truth disturbance.
    pub fn new(
        model: &ModelSpec,
        dictionary: Option<BasisDictionary>,
        data: ObservationSet,
        penalties: Penalties,
    ) -> Result<Self, CostError> {
        data.validate()?;
        let model = model.estimation_view();
        if let Some(d) = &dictionary {
            d.validate(model.n_u())?;
            if d.n_x != model.n_x() {
                return Err(CostError::LengthMismatch("dictionary state dimension differs from model".into()));
            }
        }
        penalties
            .validate(model.n_theta())
            .map_err(CostError::LengthMismatch)?;
        Ok(SchemeObjective {
            model,
            dictionary,
            data,
            penalties,
            output_weights: None,
            weighted_data: None,
        })
    }

    /// Weight channel `i` of every squared error by `w_i`. Unit weights give
    /// the plain cost.
    pub fn with_output_weights(mut self, weights: Vec<f64>) -> Result<Self, CostError> {
        if weights.len() != self.model.n_z() || weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(CostError::LengthMismatch(format!(
                "need {} positive output weights",
                self.model.n_z()
            )));
        }
        let roots: Vec<f64> = weights.iter().map(|w| w.sqrt()).collect();
        let scale = |rows: &mut Vec<Vec<f64>>| {
            for r in rows.iter_mut() {
                for (v, s) in r.iter_mut().zip(&roots) {
                    *v *= s;
                }
            }
        };
        let mut data = self.data.clone();
        match &mut data {
            ObservationSet::Uniform(t) => scale(&mut t.outputs),
            ObservationSet::Missing(m) => scale(&mut m.outputs),
            ObservationSet::MultiRun { runs } => runs.iter_mut().for_each(|r| scale(&mut r.outputs)),
            ObservationSet::Aggregated(a) => scale(&mut a.records),
        }
        self.output_weights = Some(roots);
        self.weighted_data = Some(data);
        Ok(self)
    }

    fn weigh<S: Scalar>(&self, mut rows: Vec<Vec<S>>) -> Vec<Vec<S>> {
        if let Some(roots) = &self.output_weights {
            for r in rows.iter_mut() {
                for (v, &s) in r.iter_mut().zip(roots) {
                    *v = *v * s;
                }
            }
        }
        rows
    }

    pub fn n_runs(&self) -> usize {
        self.data.n_runs()
    }

    pub fn n_omega(&self) -> usize {
        self.dictionary.as_ref().map_or(0, BasisDictionary::n_weights)
    }

    fn residual<'a, S: Scalar>(&'a self, omega: &'a [S]) -> Residual<'a, S> {
        match &self.dictionary {
            Some(d) => Residual::Compensator {
                dictionary: d,
                weights: omega,
            },
            None => Residual::None,
        }
    }

    /// Prediction loss without penalties.
    pub fn loss<S: Scalar>(&self, v: &DecisionView<S>) -> Result<S, CostError> {
        if v.x0.len() != self.n_runs() {
            return Err(CostError::LengthMismatch(format!(
                "{} initial states for {} runs",
                v.x0.len(),
                self.n_runs()
            )));
        }
        let residual = self.residual(&v.omega);
        match self.weighted_data.as_ref().unwrap_or(&self.data) {
            ObservationSet::Uniform(t) => {
                let r = rollout(&self.model, &v.x0[0], &t.inputs, &v.theta, &residual, t.horizon())?;
                build_uniform(&self.weigh(r.outputs), &t.outputs)
            }
            ObservationSet::Missing(m) => {
                let r = rollout(&self.model, &v.x0[0], &m.inputs, &v.theta, &residual, m.horizon)?;
                build_missing(&self.weigh(r.outputs), &m.outputs, &m.available)
            }
            ObservationSet::MultiRun { runs } => {
                let preds = runs
                    .iter()
                    .zip(&v.x0)
                    .map(|(run, x0)| {
                        rollout(&self.model, x0, &run.inputs, &v.theta, &residual, run.horizon).map(|r| self.weigh(r.outputs))
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                let terms: Vec<RunTerm<'_, S>> = runs
                    .iter()
                    .zip(&preds)
                    .map(|(run, pred)| RunTerm {
                        pred,
                        meas: &run.outputs,
                        available: &run.available,
                    })
                    .collect();
                build_multirun(&terms)
            }
            ObservationSet::Aggregated(a) => {
                let ext = extend_for_aggregation(&self.model, a.alpha())?;
                let r = rollout_windows(&ext, &v.x0[0], &a.inputs, &v.theta, &residual, a.window, a.windows())?;
                build_aggregated(&self.weigh(r.window_outputs), &a.records)
            }
        }
    }
}

impl Objective for SchemeObjective {
    fn evaluate<S: Scalar>(&self, v: &DecisionView<S>) -> Result<S, CostError> {
        let loss = self.loss(v)?;
        add_penalties(loss, &v.omega, &v.theta, &self.penalties)
    }
}
