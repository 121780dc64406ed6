use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{box_stats, missing_bound, BoundReport, BoxStats, MetricSet, SIGMA_XI};
use crate::cost::SchemeObjective;
use crate::dynamics::{rollout, simulate, BasisDictionary, Dynamics, ModelSpec, Residual};
use crate::observations::{
    aggregate, ingest_csv, sample_missing_mask, AggregatedTrace, Dataset, DatasetMeta, MaskedTrace,
    NoiseSpec, ObservationSet,
};
use crate::optimizer::{
    init_ball, init_gaussian_positive, minimize, objective_value, DecisionVector, FitError, FitResult, FreeBlocks, Hyper, Scaling,
};

use super::config::{
    DataConfig, ExperimentConfig, InitStrategy, OutputWeights, ScalingConfig, SchemeConfig, WarmStart, X0Init,
};
use super::signals::{derive_seed, Stream};
use super::HarnessError;

/// Inputs and measurements of one repetition, identification part first.
#[derive(Debug, Clone, PartialEq)]
pub struct RepData {
    pub inputs: Vec<Vec<f64>>,
    /// `None` where the source has no measurement.
    pub measured: Vec<Option<Vec<f64>>>,
    pub true_x0: Option<Vec<f64>>,
    pub identification: usize,
    pub validation: usize,
}

impl RepData {
    /// As a CSV-exportable dataset; steps without a measurement stay blank.
    pub fn to_dataset(&self) -> Dataset {
        let horizon = self.measured.len();
        let available: Vec<usize> = (0..horizon).filter(|&k| self.measured[k].is_some()).collect();
        let n_z = available.first().map_or(0, |&k| self.measured[k].as_ref().unwrap().len());
        let set = ObservationSet::Missing(MaskedTrace {
            horizon,
            inputs: self.inputs.clone(),
            outputs: available.iter().map(|&k| self.measured[k].clone().unwrap()).collect(),
            available,
        });
        Dataset {
            set,
            time: None,
            rows: horizon,
            n_u: self.inputs.first().map_or(0, Vec::len),
            n_z,
        }
    }
}

/// Outcome of one fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepRecord {
    pub config_hash: String,
    pub level: String,
    pub value: f64,
    pub rep: usize,
    pub seed: u64,
    pub theta: Vec<f64>,
    pub x0: Vec<Vec<f64>>,
    pub objective: f64,
    pub iterations: usize,
    pub termination: String,
    pub backtracks: usize,
    pub error_to_nominal: f64,
    /// `‖(θ̂ − θ)/θ‖` over entries with nonzero nominal value.
    pub rel_error_to_nominal: f64,
    /// Distance to the full-data estimate of the same repetition.
    pub error_to_reference: Option<f64>,
    pub x0_error: Option<f64>,
    pub identification: Option<MetricSet>,
    pub validation: Option<MetricSet>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepFailure {
    pub config_hash: String,
    pub level: String,
    pub rep: usize,
    pub seed: u64,
    pub class: String,
    pub message: String,
}

/// Per-level statistics over repetitions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelSummary {
    pub level: String,
    pub value: f64,
    pub n_ok: usize,
    pub n_failed: usize,
    pub error_to_reference: Option<BoxStats>,
    pub error_to_nominal: Option<BoxStats>,
    pub fit_identification: Option<BoxStats>,
    pub rmse_identification: Option<BoxStats>,
    pub fit_validation: Option<BoxStats>,
    pub rmse_validation: Option<BoxStats>,
    /// Missing-data bound at `σ_ξ = 4.2` and the share of runs under it.
    pub bound: Option<f64>,
    pub coverage: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config_hash: String,
    pub records: Vec<RepRecord>,
    pub failures: Vec<RepFailure>,
    pub summary: Vec<LevelSummary>,
    /// Optimizer results aligned with `records`; not serialized.
    #[serde(skip)]
    pub fits: Vec<FitResult>,
}

impl ExperimentReport {
    pub fn records_at(&self, level: &str) -> impl Iterator<Item = &RepRecord> {
        let level = level.to_string();
        self.records.iter().filter(move |r| r.level == level)
    }

    pub fn level(&self, level: &str) -> Option<&LevelSummary> {
        self.summary.iter().find(|s| s.level == level)
    }
}

fn data_error(e: impl ToString) -> HarnessError {
    HarnessError::Data(e.to_string())
}

fn norm(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

fn rel_norm(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .filter(|(_, y)| **y != 0.0)
        .map(|(x, y)| ((x - y) / y).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Data of repetition seed `seed`: simulated afresh or read from the file.
pub fn prepare_data(config: &ExperimentConfig, model: &ModelSpec, seed: u64) -> Result<RepData, HarnessError> {
    match &config.data {
        DataConfig::Simulate {
            x0,
            input,
            identification,
            validation,
            noise,
        } => {
            let horizon = identification + validation;
            let inputs = input.generate(horizon, derive_seed(seed, Stream::Input));
            let noise = NoiseSpec {
                seed: derive_seed(seed, Stream::Noise),
                ..noise.clone()
            };
            let traj = simulate(model, x0, &inputs, &model.nominal_theta, &Residual::Truth, horizon, &noise)
                .map_err(|e| HarnessError::Numeric(format!("simulation failed: {e}")))?;
            Ok(RepData {
                inputs: traj.recorded_inputs,
                measured: traj.noisy_outputs.into_iter().map(Some).collect(),
                true_x0: Some(x0.clone()),
                identification: *identification,
                validation: *validation,
            })
        }
        DataConfig::File {
            path,
            schema,
            identification,
            validation,
        } => {
            let ds = ingest_csv(path, schema).map_err(data_error)?;
            let horizon = identification + validation;
            if ds.rows < horizon {
                return Err(HarnessError::Data(format!(
                    "{} has {} rows, the experiment needs {horizon}",
                    path.display(),
                    ds.rows
                )));
            }
            let mut measured = vec![None; ds.rows];
            match &ds.set {
                ObservationSet::Uniform(t) => {
                    for (k, z) in t.outputs.iter().enumerate() {
                        measured[k] = Some(z.clone());
                    }
                }
                ObservationSet::Missing(m) => {
                    for (&k, z) in m.available.iter().zip(&m.outputs) {
                        measured[k] = Some(z.clone());
                    }
                }
                _ => return Err(HarnessError::Data("unexpected dataset layout".into())),
            }
            measured.truncate(horizon);
            Ok(RepData {
                inputs: ds.inputs()[..horizon].to_vec(),
                measured,
                true_x0: None,
                identification: *identification,
                validation: *validation,
            })
        }
    }
}

const LR_RETRIES: usize = 3;

struct Ctx<'a> {
    config: &'a ExperimentConfig,
    model: &'a ModelSpec,
    dictionary: Option<BasisDictionary>,
    hash: &'a str,
}

impl Ctx<'_> {
    fn scaling(&self) -> Scaling {
        match &self.config.estimation.scaling {
            ScalingConfig::Unit => Scaling {
                theta: vec![1.0; self.model.n_theta()],
                x0: vec![1.0; self.model.n_x()],
                omega: 1.0,
            },
            ScalingConfig::Magnitude { x_ref, omega } => Scaling::by_magnitude(&self.model.nominal_theta, x_ref, *omega),
        }
    }

    fn init_theta(&self, seed: u64) -> Vec<f64> {
        let nominal = &self.model.nominal_theta;
        let s = derive_seed(seed, Stream::Init);
        match &self.config.estimation.init {
            InitStrategy::Nominal => nominal.clone(),
            InitStrategy::Ball { radius } => init_ball(nominal, *radius, s),
            InitStrategy::Gaussian { shift, std, positive } => init_gaussian_positive(nominal, *shift, *std, s, positive),
        }
    }

    fn init_x0(&self, first: Option<&Vec<f64>>) -> Result<Vec<f64>, HarnessError> {
        match &self.config.estimation.x0 {
            X0Init::Fixed { value } => Ok(value.clone()),
            X0Init::FirstMeasurement => first
                .cloned()
                .ok_or_else(|| HarnessError::Data("no measurement to initialize the state from".into())),
        }
    }

    fn free(&self, omega: bool) -> FreeBlocks {
        FreeBlocks {
            theta: true,
            x0: self.config.estimation.estimate_x0,
            omega,
        }
    }

    fn objective(&self, set: ObservationSet, weights: Option<&Vec<f64>>) -> Result<SchemeObjective, HarnessError> {
        let obj = SchemeObjective::new(
            self.model,
            self.dictionary.clone(),
            set,
            self.config.estimation.penalties.clone(),
        )
        .map_err(data_error)?;
        match weights {
            Some(w) => obj.with_output_weights(w.clone()).map_err(data_error),
            None => Ok(obj),
        }
    }

    fn minimize(
        &self,
        obj: &SchemeObjective,
        init: &DecisionVector,
        free: FreeBlocks,
        hyper: &Hyper,
    ) -> Result<FitResult, FitError> {
        // Divergence after the first step is retried with a smaller step size.
        let mut hyper = hyper.clone();
        let mut retries = 0;
        loop {
            match minimize(obj, init, &self.scaling(), free, &hyper) {
                Err(FitError::NonFiniteObjective { iteration } | FitError::Domain { iteration, .. })
                    if iteration > 0 && retries < LR_RETRIES =>
                {
                    retries += 1;
                    hyper.learning_rate /= 4.0;
                }
                other => return other,
            }
        }
    }

    fn omega0(&self) -> Vec<f64> {
        vec![0.0; self.dictionary.as_ref().map_or(0, BasisDictionary::n_weights)]
    }

    /// Prediction of the fitted model over `horizon` steps from `x0`.
    fn predict(&self, fit: &FitResult, x0: &[f64], inputs: &[Vec<f64>], horizon: usize) -> Option<Vec<Vec<f64>>> {
        let view = self.model.estimation_view();
        let residual = match &self.dictionary {
            Some(d) => Residual::Compensator {
                dictionary: d,
                weights: &fit.decision.omega,
            },
            None => Residual::None,
        };
        let r = rollout(&view, x0, inputs, &fit.decision.theta, &residual, horizon).ok()?;
        r.outputs.iter().flatten().all(|v| v.is_finite()).then_some(r.outputs)
    }
}

fn metrics_at(pred: &[Vec<f64>], measured: &[Option<Vec<f64>>], steps: impl Iterator<Item = usize>) -> Option<MetricSet> {
    let (p, m): (Vec<_>, Vec<_>) = steps
        .filter_map(|k| measured[k].as_ref().map(|z| (pred[k].clone(), z.clone())))
        .unzip();
    MetricSet::compute(&p, &m).ok()
}

fn inverse_variance(rows: &[Vec<f64>]) -> Option<Vec<f64>> {
    let n = rows.len() as f64;
    let n_z = rows.first()?.len();
    (0..n_z)
        .map(|i| {
            let mean = rows.iter().map(|r| r[i]).sum::<f64>() / n;
            let var = rows.iter().map(|r| (r[i] - mean).powi(2)).sum::<f64>() / n;
            (var > 0.0).then(|| 1.0 / var)
        })
        .collect()
}

enum Outcome {
    Ok(Box<RepRecord>, Box<FitResult>),
    Failed(RepFailure),
}

fn fit_error(e: FitError) -> HarnessError {
    match e {
        FitError::Cost(c) => HarnessError::Data(c.to_string()),
        FitError::BadInit(m) => HarnessError::Config {
            path: "estimation".into(),
            message: m,
        },
        other => HarnessError::Numeric(other.to_string()),
    }
}

/// Fits of one repetition over every scheme level.
fn run_rep(ctx: &Ctx<'_>, rep: usize) -> Result<Vec<Outcome>, HarnessError> {
    let config = ctx.config;
    let seed = config.base_seed + rep as u64;
    let data = prepare_data(config, ctx.model, seed)?;
    let t_id = data.identification;
    let nominal = &ctx.model.nominal_theta;
    let theta0 = ctx.init_theta(seed);
    let levels = config.levels();
    let fail = |level: &str, e: HarnessError| {
        log::warn!("rep {rep} level {level}: {e}");
        Outcome::Failed(RepFailure {
            config_hash: ctx.hash.to_string(),
            level: level.to_string(),
            rep,
            seed,
            class: e.class().to_string(),
            message: e.to_string(),
        })
    };
    let record = |level: &str, value: f64, fit: &FitResult| RepRecord {
        config_hash: ctx.hash.to_string(),
        level: level.to_string(),
        value,
        rep,
        seed,
        theta: fit.decision.theta.clone(),
        x0: fit.decision.x0.clone(),
        objective: fit.objective,
        iterations: fit.iterations,
        termination: format!("{:?}", fit.termination),
        backtracks: fit.backtracks,
        error_to_nominal: norm(&fit.decision.theta, nominal),
        rel_error_to_nominal: rel_norm(&fit.decision.theta, nominal),
        error_to_reference: None,
        x0_error: None,
        identification: None,
        validation: None,
    };

    let mut out = Vec::with_capacity(levels.len());
    match &config.scheme {
        SchemeConfig::Missing { .. } | SchemeConfig::MultiRun { .. } => {
            let base: Vec<usize> = (0..t_id).filter(|&k| data.measured[k].is_some()).collect();
            let weights = match config.estimation.output_weights {
                OutputWeights::Unit => None,
                OutputWeights::InverseVariance => {
                    let rows: Vec<Vec<f64>> = base.iter().map(|&k| data.measured[k].clone().unwrap()).collect();
                    Some(inverse_variance(&rows).ok_or_else(|| HarnessError::Data("constant output channel".into()))?)
                }
            };
            let mask_seed = derive_seed(seed, Stream::Mask);
            let fit_level = |p: f64| -> Result<(FitResult, Vec<usize>), HarnessError> {
                let drawn = sample_missing_mask(t_id, p, mask_seed).map_err(data_error)?;
                let available: Vec<usize> = drawn.into_iter().filter(|&k| data.measured[k].is_some()).collect();
                if available.is_empty() {
                    return Err(HarnessError::Data("no observed steps remain".into()));
                }
                let fit = match &config.scheme {
                    SchemeConfig::MultiRun { run_length, .. } => {
                        fit_multirun(ctx, &data, &available, *run_length, &theta0, weights.as_ref())?
                    }
                    _ => fit_missing(ctx, &data, &available, &theta0, weights.as_ref())?,
                };
                Ok((fit, available))
            };
            let reference = if matches!(config.scheme, SchemeConfig::Missing { .. }) {
                Some(fit_level(0.0))
            } else {
                None
            };
            for (label, p) in &levels {
                let result = match (&reference, *p == 0.0) {
                    (Some(r), true) => r.clone(),
                    _ => fit_level(*p),
                };
                let (fit, available) = match result {
                    Ok(v) => v,
                    Err(e) => {
                        out.push(fail(label, e));
                        continue;
                    }
                };
                let mut rec = record(label, *p, &fit);
                if let Some(Ok((r, _))) = &reference {
                    rec.error_to_reference = Some(norm(&fit.decision.theta, &r.decision.theta));
                }
                if let Some(x) = &data.true_x0 {
                    rec.x0_error = Some(norm(&fit.decision.x0[0], x));
                }
                if let SchemeConfig::MultiRun { run_length, .. } = &config.scheme {
                    rec.identification = multirun_metrics(ctx, &fit, &data, &available, *run_length);
                } else {
                    let horizon = t_id + data.validation;
                    if let Some(pred) = ctx.predict(&fit, &fit.decision.x0[0], &data.inputs, horizon) {
                        rec.identification = metrics_at(&pred, &data.measured, available.iter().copied());
                        if data.validation > 0 {
                            rec.validation = metrics_at(&pred, &data.measured, t_id..horizon);
                        }
                    }
                }
                out.push(Outcome::Ok(Box::new(rec), Box::new(fit)));
            }
        }
        SchemeConfig::Aggregated { alpha, .. } => {
            let clean: Vec<Vec<f64>> = data
                .measured
                .iter()
                .map(|z| z.clone().ok_or_else(|| HarnessError::Data("aggregation needs every step".into())))
                .collect::<Result<_, _>>()?;
            for (label, w) in &levels {
                let window = *w as usize;
                let windows = t_id / window;
                let n = windows * window;
                let result = aggregate(&clean[..n], &data.inputs[..n], window, windows, *alpha)
                    .map_err(data_error)
                    .and_then(|set| fit_aggregated(ctx, set, &clean[0], &theta0));
                let fit = match result {
                    Ok(f) => f,
                    Err(e) => {
                        out.push(fail(label, e));
                        continue;
                    }
                };
                let mut rec = record(label, *w, &fit);
                if let Some(x) = &data.true_x0 {
                    rec.x0_error = Some(norm(&fit.decision.x0[0], x));
                }
                let horizon = t_id + data.validation;
                if let Some(pred) = ctx.predict(&fit, &fit.decision.x0[0], &data.inputs, horizon) {
                    rec.identification = metrics_at(&pred, &data.measured, 0..n);
                    if data.validation > 0 {
                        rec.validation = metrics_at(&pred, &data.measured, t_id..horizon);
                    }
                }
                out.push(Outcome::Ok(Box::new(rec), Box::new(fit)));
            }
        }
    }
    Ok(out)
}

fn masked_trace(data: &RepData, lo: usize, hi: usize, available: &[usize]) -> MaskedTrace {
    let inside: Vec<usize> = available.iter().copied().filter(|k| (lo..hi).contains(k)).collect();
    MaskedTrace {
        horizon: hi - lo,
        inputs: data.inputs[lo..hi].to_vec(),
        outputs: inside.iter().map(|&k| data.measured[k].clone().unwrap()).collect(),
        available: inside.iter().map(|k| k - lo).collect(),
    }
}

fn fit_missing(
    ctx: &Ctx<'_>,
    data: &RepData,
    available: &[usize],
    theta0: &[f64],
    weights: Option<&Vec<f64>>,
) -> Result<FitResult, HarnessError> {
    let t_id = data.identification;
    let est = &ctx.config.estimation;
    let mut theta = theta0.to_vec();
    let mut omega = ctx.omega0();
    if let Some(WarmStart::Segments { length, hyper }) = &est.warm_start {
        let runs: Vec<MaskedTrace> = (0..t_id)
            .step_by(*length)
            .map(|lo| masked_trace(data, lo, (lo + length).min(t_id), available))
            .filter(|t| !t.available.is_empty())
            .collect();
        let x0: Vec<Vec<f64>> = runs.iter().map(|r| r.outputs[0].clone()).collect();
        let obj = ctx.objective(ObservationSet::MultiRun { runs }, weights)?;
        let init = DecisionVector {
            theta,
            x0,
            omega,
        };
        let stage = ctx.minimize(&obj, &init, ctx.free(true), hyper).map_err(fit_error)?;
        theta = stage.decision.theta;
        omega = stage.decision.omega;
    }
    let trace = masked_trace(data, 0, t_id, available);
    let x0 = ctx.init_x0(trace.outputs.first())?;
    let obj = ctx.objective(ObservationSet::Missing(trace), weights)?;
    let init = DecisionVector {
        theta,
        x0: vec![x0],
        omega,
    };
    ctx.minimize(&obj, &init, ctx.free(true), &est.hyper).map_err(fit_error)
}

fn fit_multirun(
    ctx: &Ctx<'_>,
    data: &RepData,
    available: &[usize],
    run_length: usize,
    theta0: &[f64],
    weights: Option<&Vec<f64>>,
) -> Result<FitResult, HarnessError> {
    let runs: Vec<MaskedTrace> = (0..data.identification)
        .step_by(run_length)
        .map(|lo| masked_trace(data, lo, lo + run_length, available))
        .collect();
    if runs.iter().any(|r| r.available.is_empty()) {
        return Err(HarnessError::Data("a run has no observed steps".into()));
    }
    let x0 = runs
        .iter()
        .map(|r| ctx.init_x0(r.outputs.first()))
        .collect::<Result<Vec<_>, _>>()?;
    let obj = ctx.objective(ObservationSet::MultiRun { runs }, weights)?;
    let init = DecisionVector {
        theta: theta0.to_vec(),
        x0,
        omega: ctx.omega0(),
    };
    ctx.minimize(&obj, &init, ctx.free(true), &ctx.config.estimation.hyper)
        .map_err(fit_error)
}

fn multirun_metrics(
    ctx: &Ctx<'_>,
    fit: &FitResult,
    data: &RepData,
    available: &[usize],
    run_length: usize,
) -> Option<MetricSet> {
    let mut pred = Vec::new();
    for (r, lo) in (0..data.identification).step_by(run_length).enumerate() {
        pred.extend(ctx.predict(fit, &fit.decision.x0[r], &data.inputs[lo..], run_length)?);
    }
    metrics_at(&pred, &data.measured, available.iter().copied())
}

fn fit_aggregated(
    ctx: &Ctx<'_>,
    set: ObservationSet,
    first: &Vec<f64>,
    theta0: &[f64],
) -> Result<FitResult, HarnessError> {
    let ObservationSet::Aggregated(full) = set else {
        unreachable!("aggregate returns an aggregated set")
    };
    let est = &ctx.config.estimation;
    let mut current = DecisionVector {
        theta: theta0.to_vec(),
        x0: vec![ctx.init_x0(Some(first))?],
        omega: ctx.omega0(),
    };
    let windows = full.windows();
    let (mut plan, freeze_until, stage_hyper) = match &est.warm_start {
        Some(WarmStart::Horizon {
            first,
            step,
            freeze_until,
            hyper,
        }) => {
            let mut plan: Vec<usize> = (0..)
                .map(|i| (first + i * step).div_ceil(full.window).max(1))
                .take_while(|&m| m < windows)
                .collect();
            plan.dedup();
            (plan, *freeze_until, hyper)
        }
        _ => (Vec::new(), 0, &est.hyper),
    };
    plan.push(windows);
    // A prefix on which the current estimate already diverges is split in two;
    // a single-window extension restarts from the latest earlier estimate
    // that stays finite on it.
    let mut history: Vec<DecisionVector> = Vec::new();
    let mut done = 0;
    let mut i = 0;
    while i < plan.len() {
        let m = plan[i];
        let last = m == windows;
        let prefix = AggregatedTrace {
            window: full.window,
            alpha_mode: full.alpha_mode,
            inputs: full.inputs[..m * full.window].to_vec(),
            records: full.records[..m].to_vec(),
        };
        let obj = ctx.objective(ObservationSet::Aggregated(prefix), None)?;
        let free = if m * full.window <= freeze_until {
            FreeBlocks {
                theta: true,
                x0: false,
                omega: false,
            }
        } else {
            ctx.free(true)
        };
        let hyper = if last { &est.hyper } else { stage_hyper };
        match ctx.minimize(&obj, &current, free, hyper) {
            Ok(fit) if last => return Ok(fit),
            Ok(fit) => {
                history.push(std::mem::replace(&mut current, fit.decision));
                done = m;
                i += 1;
            }
            Err(FitError::NonFiniteObjective { iteration: 0 } | FitError::Domain { iteration: 0, .. }) if m > done + 1 => {
                plan.insert(i, done + (m - done) / 2);
            }
            Err(e @ (FitError::NonFiniteObjective { iteration: 0 } | FitError::Domain { iteration: 0, .. })) => {
                let fallback = history
                    .iter()
                    .rposition(|d| objective_value(&obj, d).is_ok_and(f64::is_finite));
                match fallback {
                    Some(k) => {
                        current = history[k].clone();
                        history.truncate(k);
                    }
                    None => return Err(fit_error(e)),
                }
            }
            Err(e) => return Err(fit_error(e)),
        }
    }
    unreachable!("the plan ends with the full record")
}

pub(crate) fn summarize(config: &ExperimentConfig, records: &[RepRecord], failures: &[RepFailure]) -> Vec<LevelSummary> {
    let t_id = config.data.identification();
    let missing = matches!(config.scheme, SchemeConfig::Missing { .. });
    config
        .levels()
        .into_iter()
        .map(|(level, value)| {
            let rs: Vec<&RepRecord> = records.iter().filter(|r| r.level == level).collect();
            let stats = |f: &dyn Fn(&RepRecord) -> Option<f64>| {
                let v: Vec<f64> = rs.iter().filter_map(|r| f(r)).collect();
                box_stats(&v)
            };
            let (bound, coverage) = if missing {
                let b = missing_bound(SIGMA_XI, t_id, value);
                let errs: Vec<f64> = rs.iter().filter_map(|r| r.error_to_reference).collect();
                let cov = (!errs.is_empty()).then(|| errs.iter().filter(|&&e| e <= b).count() as f64 / errs.len() as f64);
                (Some(b), cov)
            } else {
                (None, None)
            };
            LevelSummary {
                n_ok: rs.len(),
                n_failed: failures.iter().filter(|f| f.level == level).count(),
                error_to_reference: stats(&|r| r.error_to_reference),
                error_to_nominal: stats(&|r| Some(r.error_to_nominal)),
                fit_identification: stats(&|r| r.identification.as_ref().map(|m| m.fit_global)),
                rmse_identification: stats(&|r| r.identification.as_ref().map(|m| m.rmse_global)),
                fit_validation: stats(&|r| r.validation.as_ref().map(|m| m.fit_global)),
                rmse_validation: stats(&|r| r.validation.as_ref().map(|m| m.rmse_global)),
                bound,
                coverage,
                level,
                value,
            }
        })
        .collect()
}

/// Run every repetition (in parallel), write per-repetition files and
/// summary tables under `config.output_dir`, and return the report.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport, HarnessError> {
    config.validate()?;
    let out_dir = &config.output_dir;
    let report = run_in_memory(config)?;
    write_outputs(config, &report, out_dir)?;
    Ok(report)
}

/// As [`run_experiment`] without touching the filesystem (except to read a data file).
pub fn run_in_memory(config: &ExperimentConfig) -> Result<ExperimentReport, HarnessError> {
    config.validate()?;
    let model = config.model_spec()?;
    let hash = config.hash();
    let ctx = Ctx {
        config,
        model: &model,
        dictionary: config.estimation.dictionary.as_ref().map(|d| d.build(model.n_x())),
        hash: &hash,
    };
    let per_rep: Vec<Result<Vec<Outcome>, HarnessError>> = (0..config.reps)
        .into_par_iter()
        .map(|rep| {
            let out = run_rep(&ctx, rep);
            log::info!("{}: rep {rep} finished", config.name);
            out
        })
        .collect();
    let mut records = Vec::new();
    let mut failures = Vec::new();
    let mut fits = Vec::new();
    for (rep, outcome) in per_rep.into_iter().enumerate() {
        match outcome {
            Ok(list) => {
                for o in list {
                    match o {
                        Outcome::Ok(r, f) => {
                            records.push(*r);
                            fits.push(*f);
                        }
                        Outcome::Failed(f) => failures.push(f),
                    }
                }
            }
            // Data or config problems shared by every repetition abort the batch.
            Err(e @ (HarnessError::Config { .. } | HarnessError::Data(_))) if rep == 0 => return Err(e),
            Err(e) => {
                log::warn!("rep {rep}: {e}");
                failures.push(RepFailure {
                    config_hash: hash.clone(),
                    level: "*".into(),
                    rep,
                    seed: config.base_seed + rep as u64,
                    class: e.class().into(),
                    message: e.to_string(),
                });
            }
        }
    }
    if records.is_empty() {
        let first = failures.first().map(|f| f.message.clone()).unwrap_or_default();
        return Err(HarnessError::Numeric(format!("every fit failed; first error: {first}")));
    }
    let order: Vec<String> = config.levels().into_iter().map(|(l, _)| l).collect();
    let rank = |l: &str| order.iter().position(|o| o == l).unwrap_or(usize::MAX);
    let mut paired: Vec<(RepRecord, FitResult)> = records.into_iter().zip(fits).collect();
    paired.sort_by_key(|(r, _)| (rank(&r.level), r.rep));
    failures.sort_by_key(|f| (rank(&f.level), f.rep));
    let summary = summarize(config, &paired.iter().map(|(r, _)| r.clone()).collect::<Vec<_>>(), &failures);
    let (records, fits): (Vec<RepRecord>, Vec<FitResult>) = paired
        .into_iter()
        .map(|(r, f)| {
            let f = f.with_provenance(r.seed, &hash);
            (r, f)
        })
        .unzip();
    Ok(ExperimentReport {
        config_hash: hash,
        records,
        failures,
        summary,
        fits,
    })
}

fn io_error(path: &Path, e: impl std::fmt::Display) -> HarnessError {
    HarnessError::Io(format!("{}: {e}", path.display()))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), HarnessError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| io_error(path, e))?;
    fs::write(path, text).map_err(|e| io_error(path, e))
}

pub fn rep_dir(root: &Path, level: &str, rep: usize) -> PathBuf {
    root.join(level).join(format!("rep_{rep:04}"))
}

fn write_outputs(config: &ExperimentConfig, report: &ExperimentReport, root: &Path) -> Result<(), HarnessError> {
    fs::create_dir_all(root).map_err(|e| io_error(root, e))?;
    #[derive(Serialize)]
    struct Stamped<'a> {
        config_hash: &'a str,
        config: &'a ExperimentConfig,
    }
    write_json(
        &root.join("config.json"),
        &Stamped {
            config_hash: &report.config_hash,
            config,
        },
    )?;
    for (i, rec) in report.records.iter().enumerate() {
        let dir = rep_dir(root, &rec.level, rec.rep);
        fs::create_dir_all(&dir).map_err(|e| io_error(&dir, e))?;
        write_json(&dir.join("record.json"), rec)?;
        if let Some(fit) = report.fits.get(i) {
            write_json(&dir.join("fit.json"), fit)?;
        }
    }
    for f in &report.failures {
        let dir = rep_dir(root, &f.level.replace('*', "all"), f.rep);
        fs::create_dir_all(&dir).map_err(|e| io_error(&dir, e))?;
        write_json(&dir.join("failure.json"), f)?;
    }
    super::report::write_tables(config, report, root)
}

/// Simulated dataset of repetition `rep` with its metadata sidecar.
pub fn simulate_dataset(config: &ExperimentConfig, rep: usize) -> Result<(RepData, DatasetMeta), HarnessError> {
    config.validate()?;
    if !matches!(config.data, DataConfig::Simulate { .. }) {
        return Err(HarnessError::Config {
            path: "data.source".into(),
            message: "simulate needs a simulated data source".into(),
        });
    }
    let model = config.model_spec()?;
    let seed = config.base_seed + rep as u64;
    let data = prepare_data(config, &model, seed)?;
    let horizon = data.measured.len();
    let meta = DatasetMeta {
        horizon,
        observed: horizon,
        seeds: vec![seed, derive_seed(seed, Stream::Input), derive_seed(seed, Stream::Noise)],
        config_hash: Some(config.hash()),
        ..Default::default()
    };
    Ok((data, meta))
}

/// Bound quantities of the configured scheme, one per level.
pub fn scheme_bounds(config: &ExperimentConfig) -> Result<Vec<(String, BoundReport)>, HarnessError> {
    let t_id = config.data.identification();
    config
        .levels()
        .into_iter()
        .map(|(level, value)| {
            let r = match &config.scheme {
                SchemeConfig::Aggregated { .. } => {
                    let window = value as usize;
                    BoundReport::aggregated((t_id / window) * window, window)
                }
                _ => BoundReport::missing(t_id, value, SIGMA_XI),
            };
            r.map(|r| (level, r)).map_err(|e| HarnessError::Numeric(e.to_string()))
        })
        .collect()
}
