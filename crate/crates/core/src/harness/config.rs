use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cost::Penalties;
use crate::dynamics::{registry_get, AlphaMode, BasisDictionary, ModelParams, ModelSpec};
use crate::observations::{CsvSchema, NoiseSpec};
use crate::optimizer::{Hyper, Method};

use super::signals::InputSignal;
use super::HarnessError;

pub const CONFIG_VERSION: u32 = 1;

/// A complete, self-describing experiment. Two runs of the same config
/// produce bit-identical outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: u32,
    pub name: String,
    pub model: ModelConfig,
    pub data: DataConfig,
    pub scheme: SchemeConfig,
    pub estimation: EstimationConfig,
    pub reps: usize,
    pub base_seed: u64,
    pub output_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub id: String,
    #[serde(default)]
    pub params: ModelParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, tag = "source", rename_all = "snake_case")]
pub enum DataConfig {
    /// Synthetic data from the model with its truth disturbance.
    Simulate {
        x0: Vec<f64>,
        input: InputSignal,
        identification: usize,
        #[serde(default)]
        validation: usize,
        /// Noise levels; the seed is derived per repetition.
        #[serde(default)]
        noise: NoiseSpec,
    },
    /// A user-supplied CSV, identical for every repetition.
    File {
        path: PathBuf,
        schema: CsvSchema,
        identification: usize,
        #[serde(default)]
        validation: usize,
    },
}

impl DataConfig {
    pub fn identification(&self) -> usize {
        match self {
            DataConfig::Simulate { identification, .. } | DataConfig::File { identification, .. } => *identification,
        }
    }

    pub fn validation(&self) -> usize {
        match self {
            DataConfig::Simulate { validation, .. } | DataConfig::File { validation, .. } => *validation,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, tag = "kind", rename_all = "snake_case")]
pub enum SchemeConfig {
    /// One fit per missing fraction; `p_miss = 0` is always fitted as the
    /// reference of the repetition.
    Missing { p_miss: Vec<f64> },
    /// One fit per window length over `floor(T / T_r)` windows.
    Aggregated { windows: Vec<usize>, alpha: AlphaMode },
    /// Consecutive runs of `run_length` steps, each with its own initial state.
    MultiRun { run_length: usize, p_miss: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, tag = "kind", rename_all = "snake_case")]
pub enum InitStrategy {
    Nominal,
    /// Uniform in `θ ± r|θ|`.
    Ball { radius: f64 },
    /// `θ + shift + std·𝒩(0, 1)`; listed entries are redrawn until positive.
    Gaussian {
        shift: f64,
        std: f64,
        #[serde(default)]
        positive: Vec<usize>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, tag = "kind", rename_all = "snake_case")]
pub enum X0Init {
    /// The first available measurement (outputs must be the states).
    FirstMeasurement,
    Fixed { value: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DictionaryConfig {
    pub polynomial: bool,
    #[serde(default)]
    pub offset: Option<Vec<f64>>,
    #[serde(default)]
    pub scale: Option<Vec<f64>>,
    #[serde(default)]
    pub output_scale: Option<Vec<f64>>,
}

impl DictionaryConfig {
    pub fn build(&self, n_x: usize) -> BasisDictionary {
        let mut d = BasisDictionary::standard(n_x, self.polynomial);
        if let (Some(o), Some(s)) = (&self.offset, &self.scale) {
            d = d.with_normalization(o.clone(), s.clone());
        }
        if let Some(s) = &self.output_scale {
            d = d.with_output_scale(s.clone());
        }
        d
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, tag = "kind", rename_all = "snake_case")]
pub enum ScalingConfig {
    Unit,
    /// `θ` by nominal magnitude, `x0` by `x_ref`, `ω` by `omega`.
    Magnitude { x_ref: Vec<f64>, omega: f64 },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputWeights {
    #[default]
    Unit,
    /// `1 / var` of each measured channel of the identification record.
    InverseVariance,
}

/// Short first-stage fit whose `θ` and `ω` seed the final fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, tag = "kind", rename_all = "snake_case")]
pub enum WarmStart {
    /// Multi-run fit over consecutive segments of the identification record,
    /// each segment starting from its first available measurement.
    Segments { length: usize, hyper: Hyper },
    /// Growing prefixes of the aggregated record covering `first`,
    /// `first + step`, … raw steps (rounded up to whole windows). `ω` and
    /// `x0` stay frozen while a prefix spans at most `freeze_until` steps.
    Horizon {
        first: usize,
        step: usize,
        freeze_until: usize,
        hyper: Hyper,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimationConfig {
    pub init: InitStrategy,
    pub x0: X0Init,
    pub estimate_x0: bool,
    #[serde(default)]
    pub dictionary: Option<DictionaryConfig>,
    #[serde(default = "Penalties::none")]
    pub penalties: Penalties,
    #[serde(default)]
    pub output_weights: OutputWeights,
    pub scaling: ScalingConfig,
    #[serde(default)]
    pub hyper: Hyper,
    #[serde(default)]
    pub warm_start: Option<WarmStart>,
}

fn config_error(path: &str, message: impl Into<String>) -> HarnessError {
    HarnessError::Config {
        path: path.to_string(),
        message: message.into(),
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        let config: ExperimentConfig = serde_json::from_str(text).map_err(|e| config_error("$", e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path.as_ref())
            .map_err(|e| config_error("$", format!("{}: {e}", path.as_ref().display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// SHA-256 of the compact JSON serialization, ignoring `output_dir`.
    pub fn hash(&self) -> String {
        let stripped = ExperimentConfig {
            output_dir: PathBuf::new(),
            ..self.clone()
        };
        let canonical = serde_json::to_string(&stripped).expect("config serializes");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }

    pub fn model_spec(&self) -> Result<ModelSpec, HarnessError> {
        registry_get(&self.model.id, &self.model.params).map_err(|e| config_error("model", e.to_string()))
    }

    /// Scheme levels in run order, as `(label, value)`.
    pub fn levels(&self) -> Vec<(String, f64)> {
        match &self.scheme {
            SchemeConfig::Missing { p_miss } | SchemeConfig::MultiRun { p_miss, .. } => {
                p_miss.iter().map(|&p| (format!("p{p:.2}"), p)).collect()
            }
            SchemeConfig::Aggregated { windows, .. } => {
                windows.iter().map(|&w| (format!("tr{w}"), w as f64)).collect()
            }
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.version != CONFIG_VERSION {
            return Err(config_error(
                "version",
                format!("unsupported version {} (expected {CONFIG_VERSION})", self.version),
            ));
        }
        if self.reps == 0 {
            return Err(config_error("reps", "at least one repetition is required"));
        }
        let model = self.model_spec()?;
        let (n_x, n_u, n_z) = {
            use crate::dynamics::Dynamics;
            (model.n_x(), model.n_u(), model.n_z())
        };
        let t_id = self.data.identification();
        if t_id < 2 {
            return Err(config_error("data.identification", "need at least two identification steps"));
        }
        match &self.data {
            DataConfig::Simulate { x0, input, noise, .. } => {
                if x0.len() != n_x {
                    return Err(config_error("data.x0", format!("expected {n_x} entries")));
                }
                input.validate(n_u).map_err(|m| config_error("data.input", m))?;
                noise.validate().map_err(|e| config_error("data.noise", e.to_string()))?;
                if !noise.output_std.is_empty() && noise.output_std.len() != n_z {
                    return Err(config_error("data.noise.output_std", format!("expected {n_z} entries")));
                }
                if !noise.input_std.is_empty() && noise.input_std.len() != n_u {
                    return Err(config_error("data.noise.input_std", format!("expected {n_u} entries")));
                }
            }
            DataConfig::File { schema, .. } => {
                if schema.outputs.len() != n_z || schema.inputs.len() != n_u {
                    return Err(config_error(
                        "data.schema",
                        format!("model expects {n_u} input and {n_z} output columns"),
                    ));
                }
            }
        }
        let levels_path = match &self.scheme {
            SchemeConfig::Missing { p_miss } => {
                check_fractions(p_miss)?;
                "scheme.p_miss"
            }
            SchemeConfig::MultiRun { run_length, p_miss } => {
                check_fractions(p_miss)?;
                if *run_length == 0 || t_id % run_length != 0 {
                    return Err(config_error(
                        "scheme.run_length",
                        "must divide the identification horizon",
                    ));
                }
                "scheme.p_miss"
            }
            SchemeConfig::Aggregated { windows, .. } => {
                if let Some(w) = windows.iter().find(|&&w| w == 0 || w > t_id) {
                    return Err(config_error("scheme.windows", format!("window {w} outside 1..={t_id}")));
                }
                if matches!(self.data, DataConfig::File { .. }) {
                    return Err(config_error("scheme", "aggregated experiments need simulated data"));
                }
                "scheme.windows"
            }
        };
        if self.levels().is_empty() {
            return Err(config_error(levels_path, "at least one level is required"));
        }
        let est = &self.estimation;
        match &est.init {
            InitStrategy::Ball { radius } if !(0.0..1.0).contains(radius) => {
                return Err(config_error("estimation.init.radius", "must lie in [0, 1)"));
            }
            InitStrategy::Gaussian { std, positive, .. } => {
                if !(*std >= 0.0) {
                    return Err(config_error("estimation.init.std", "must be >= 0"));
                }
                if positive.iter().any(|&i| i >= model.nominal_theta.len()) {
                    return Err(config_error("estimation.init.positive", "index out of range"));
                }
            }
            _ => {}
        }
        match &est.x0 {
            X0Init::FirstMeasurement if n_z != n_x => {
                return Err(config_error(
                    "estimation.x0",
                    "first_measurement needs outputs equal to states",
                ));
            }
            X0Init::Fixed { value } if value.len() != n_x => {
                return Err(config_error("estimation.x0.value", format!("expected {n_x} entries")));
            }
            _ => {}
        }
        if let Some(d) = &est.dictionary {
            d.build(n_x)
                .validate(n_u)
                .map_err(|e| config_error("estimation.dictionary", e.to_string()))?;
        }
        est.penalties
            .validate(model.nominal_theta.len())
            .map_err(|m| config_error("estimation.penalties", m))?;
        if let ScalingConfig::Magnitude { x_ref, omega } = &est.scaling {
            if x_ref.len() != n_x || !(*omega > 0.0) {
                return Err(config_error(
                    "estimation.scaling",
                    format!("x_ref needs {n_x} entries and omega must be positive"),
                ));
            }
        }
        est.hyper.validate().map_err(|m| config_error("estimation.hyper", m))?;
        match &est.warm_start {
            Some(WarmStart::Segments { length, hyper }) => {
                hyper
                    .validate()
                    .map_err(|m| config_error("estimation.warm_start.hyper", m))?;
                if *length == 0 || !matches!(self.scheme, SchemeConfig::Missing { .. }) {
                    return Err(config_error(
                        "estimation.warm_start",
                        "segments need a positive length and a missing scheme",
                    ));
                }
                if n_z != n_x {
                    return Err(config_error("estimation.warm_start", "segments need outputs equal to states"));
                }
            }
            Some(WarmStart::Horizon {
                first, step, hyper, ..
            }) => {
                hyper
                    .validate()
                    .map_err(|m| config_error("estimation.warm_start.hyper", m))?;
                if *first == 0 || *step == 0 || !matches!(self.scheme, SchemeConfig::Aggregated { .. }) {
                    return Err(config_error(
                        "estimation.warm_start",
                        "horizon stages need positive first/step and an aggregated scheme",
                    ));
                }
            }
            None => {}
        }
        Ok(())
    }
}

fn check_fractions(p: &[f64]) -> Result<(), HarnessError> {
    match p.iter().find(|v| !(0.0..1.0).contains(*v)) {
        Some(v) => Err(config_error("scheme.p_miss", format!("{v} outside [0, 1)"))),
        None => Ok(()),
    }
}

/// Second-order linear system under missing observations.
pub fn preset_e1() -> ExperimentConfig {
    let mut p_miss = vec![0.0];
    p_miss.extend((1..=19).map(|i| i as f64 / 20.0));
    ExperimentConfig {
        version: CONFIG_VERSION,
        name: "e1_linear_missing".into(),
        model: ModelConfig {
            id: "linear2nd".into(),
            params: ModelParams::default(),
        },
        data: DataConfig::Simulate {
            x0: vec![0.0, 0.0],
            input: InputSignal::Step {
                level: vec![1.0],
                noise_std: vec![0.01],
            },
            identification: 104,
            validation: 0,
            noise: NoiseSpec {
                output_std: vec![0.01],
                input_std: vec![],
                seed: 0,
            },
        },
        scheme: SchemeConfig::Missing { p_miss },
        estimation: EstimationConfig {
            init: InitStrategy::Ball { radius: 0.05 },
            x0: X0Init::Fixed { value: vec![0.0, 0.0] },
            estimate_x0: false,
            dictionary: None,
            penalties: Penalties::none(),
            output_weights: OutputWeights::Unit,
            scaling: ScalingConfig::Magnitude {
                x_ref: vec![1.0, 1.0],
                omega: 1.0,
            },
            hyper: Hyper {
                learning_rate: 1e-2,
                final_lr_fraction: 1e-3,
                max_iters: 6000,
                grad_tol: 0.0,
                stall_window: 0,
                ..Hyper::default()
            },
            warm_start: None,
        },
        reps: 50,
        base_seed: 1,
        output_dir: "results/e1".into(),
    }
}

/// Predator-prey model identified from yearly averages.
pub fn preset_e2() -> ExperimentConfig {
    let stage = Hyper {
        learning_rate: 1e-2,
        final_lr_fraction: 0.1,
        max_iters: 300,
        monotone: true,
        ..Hyper::default()
    };
    ExperimentConfig {
        version: CONFIG_VERSION,
        name: "e2_lotka_volterra_averaged".into(),
        model: ModelConfig {
            id: "lotka_volterra".into(),
            params: ModelParams::default(),
        },
        data: DataConfig::Simulate {
            x0: vec![2.0, 3.0],
            input: InputSignal::None,
            identification: 600,
            validation: 300,
            noise: NoiseSpec::default(),
        },
        scheme: SchemeConfig::Aggregated {
            windows: vec![12, 15, 20, 24, 40, 50],
            alpha: AlphaMode::Averaged,
        },
        estimation: EstimationConfig {
            init: InitStrategy::Gaussian {
                shift: 0.02,
                std: 0.05,
                positive: vec![0, 1, 2, 3],
            },
            x0: X0Init::FirstMeasurement,
            estimate_x0: true,
            dictionary: Some(DictionaryConfig {
                polynomial: false,
                offset: None,
                scale: None,
                output_scale: None,
            }),
            penalties: Penalties {
                barrier_indices: vec![0, 1, 2, 3],
                ..Penalties::default()
            },
            output_weights: OutputWeights::Unit,
            scaling: ScalingConfig::Magnitude {
                x_ref: vec![1.0, 1.0],
                omega: 1.0,
            },
            hyper: Hyper {
                learning_rate: 3e-3,
                final_lr_fraction: 0.1,
                max_iters: 3000,
                monotone: true,
                ..Hyper::default()
            },
            warm_start: Some(WarmStart::Horizon {
                first: 24,
                step: 24,
                freeze_until: 96,
                hyper: stage,
            }),
        },
        reps: 1,
        base_seed: 1,
        output_dir: "results/e2".into(),
    }
}

/// Simulated stirred-tank reactor under missing observations.
pub fn preset_e3() -> ExperimentConfig {
    let stage = Hyper {
        learning_rate: 1e-2,
        final_lr_fraction: 1e-2,
        max_iters: 1000,
        ..Hyper::default()
    };
    ExperimentConfig {
        version: CONFIG_VERSION,
        name: "e3_cstr_missing".into(),
        model: ModelConfig {
            id: "cstr".into(),
            params: ModelParams::default(),
        },
        data: DataConfig::Simulate {
            x0: vec![0.09, 441.0],
            input: InputSignal::PiecewiseConstant {
                low: vec![95.0],
                high: vec![105.0],
                hold: 50,
            },
            identification: 1000,
            validation: 500,
            noise: NoiseSpec {
                output_std: vec![1e-3, 0.1],
                input_std: vec![],
                seed: 0,
            },
        },
        scheme: SchemeConfig::Missing {
            p_miss: vec![0.0, 0.10, 0.20, 0.25, 0.30, 0.40, 0.50, 0.75],
        },
        estimation: EstimationConfig {
            init: InitStrategy::Ball { radius: 0.3 },
            x0: X0Init::FirstMeasurement,
            estimate_x0: true,
            dictionary: Some(DictionaryConfig {
                polynomial: true,
                offset: Some(vec![0.09, 441.0]),
                scale: Some(vec![0.02, 5.0]),
                output_scale: Some(vec![1e-3, 0.1]),
            }),
            penalties: Penalties {
                l1_weight: 1e-4,
                ..Penalties::none()
            },
            output_weights: OutputWeights::InverseVariance,
            scaling: ScalingConfig::Magnitude {
                x_ref: vec![0.01, 1.0],
                omega: 1.0,
            },
            hyper: Hyper {
                method: Method::AdaptiveMoments,
                learning_rate: 1e-3,
                final_lr_fraction: 1e-2,
                max_iters: 1000,
                ..Hyper::default()
            },
            warm_start: Some(WarmStart::Segments { length: 5, hyper: stage }),
        },
        reps: 200,
        base_seed: 1,
        output_dir: "results/e3".into(),
    }
}

pub fn preset(name: &str) -> Option<ExperimentConfig> {
    match name {
        "e1" => Some(preset_e1()),
        "e2" => Some(preset_e2()),
        "e3" => Some(preset_e3()),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate_and_round_trip() {
        for name in ["e1", "e2", "e3"] {
            let c = preset(name).unwrap();
            c.validate().unwrap();
            let back = ExperimentConfig::from_json(&c.to_json()).unwrap();
            assert_eq!(back, c);
            assert_eq!(back.hash(), c.hash());
        }
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let mut v: serde_json::Value = serde_json::from_str(&preset_e1().to_json()).unwrap();
        v["estimation"]["learning_rate"] = serde_json::json!(0.1);
        let err = ExperimentConfig::from_json(&v.to_string()).unwrap_err();
        assert!(err.to_string().contains("learning_rate"), "{err}");
    }

    #[test]
    fn field_paths_in_errors() {
        let mut c = preset_e1();
        c.scheme = SchemeConfig::Missing { p_miss: vec![0.2, 1.0] };
        let err = c.validate().unwrap_err();
        assert!(matches!(err, HarnessError::Config { ref path, .. } if path == "scheme.p_miss"));
        let mut c = preset_e3();
        c.estimation.init = InitStrategy::Ball { radius: 1.5 };
        assert!(matches!(c.validate(), Err(HarnessError::Config { ref path, .. }) if path == "estimation.init.radius"));
    }

    #[test]
    fn hash_tracks_content() {
        let a = preset_e1();
        let mut b = a.clone();
        b.base_seed += 1;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
        let mut c = a.clone();
        c.output_dir = "elsewhere".into();
        assert_eq!(a.hash(), c.hash());
    }
}
