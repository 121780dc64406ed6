//! Experiment configuration, batch execution and result files.

mod config;
mod report;
mod run;
mod signals;

pub use config::{
    preset, preset_e1, preset_e2, preset_e3, DataConfig, DictionaryConfig, EstimationConfig, ExperimentConfig,
    InitStrategy, ModelConfig, OutputWeights, ScalingConfig, SchemeConfig, WarmStart, X0Init, CONFIG_VERSION,
};
pub use report::{load_report, merge_reports, write_tables};
pub use run::{
    prepare_data, rep_dir, run_experiment, run_in_memory, scheme_bounds, simulate_dataset, ExperimentReport,
    LevelSummary, RepData, RepFailure, RepRecord,
};
pub use signals::{derive_seed, InputSignal, Stream};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HarnessError {
    #[error("{path}: {message}")]
    Config { path: String, message: String },
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Numeric(String),
    #[error("{0}")]
    Io(String),
}

impl HarnessError {
    pub fn class(&self) -> &'static str {
        match self {
            HarnessError::Config { .. } => "config",
            HarnessError::Data(_) => "data",
            HarnessError::Numeric(_) => "numeric",
            HarnessError::Io(_) => "io",
        }
    }

    /// Process exit code for this error class.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config { .. } => 2,
            HarnessError::Data(_) | HarnessError::Io(_) => 3,
            HarnessError::Numeric(_) => 4,
        }
    }
}
