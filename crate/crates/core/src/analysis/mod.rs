//! Goodness-of-fit metrics, error-bound quantities and batch statistics.

mod bounds;
mod metrics;
mod stats;

pub use bounds::{
    aggregation_matrices, aggregation_matrix, bound_check_missing, gamma_distance, gamma_full, gamma_missing,
    missing_bound, sigma_max, AggregationReport, BoundRow, GammaDistance, MissingBoundReport, SIGMA_XI,
};
pub use metrics::{fit_percent, rmse, rrse, MetricSet};
pub use stats::{batch_stats, box_stats, BoxStats};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error("length mismatch: {0}")]
    LengthMismatch(String),
    #[error("zero denominator in channel {channel}")]
    DegenerateDenominator { channel: usize },
    #[error("horizon {horizon} is not a multiple of window {window}")]
    NonDivisibleHorizon { horizon: usize, window: usize },
    #[error("invalid mask: {0}")]
    InvalidMask(String),
}

/// Bound quantities for one observation setting, next to the empirical error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BoundReport {
    Missing {
        horizon: usize,
        observed: usize,
        p_miss: f64,
        gamma: GammaDistance,
        sigma_xi: f64,
        bound: f64,
        #[serde(skip_serializing_if = "Option::is_none")]
        empirical_error: Option<f64>,
    },
    Aggregated {
        #[serde(flatten)]
        report: AggregationReport,
        #[serde(skip_serializing_if = "Option::is_none")]
        empirical_error: Option<f64>,
    },
}

impl BoundReport {
    /// Report for `N = round((1 − p)·T)` observed steps.
    pub fn missing(horizon: usize, p_miss: f64, sigma_xi: f64) -> Result<Self, AnalysisError> {
        let observed = crate::observations::observed_count(horizon, p_miss);
        let available: Vec<usize> = (0..observed).collect();
        let gamma = gamma_distance(horizon, &available)?;
        Ok(BoundReport::Missing {
            horizon,
            observed,
            p_miss,
            gamma,
            sigma_xi,
            bound: missing_bound(sigma_xi, horizon, p_miss),
            empirical_error: None,
        })
    }

    pub fn aggregated(horizon: usize, window: usize) -> Result<Self, AnalysisError> {
        Ok(BoundReport::Aggregated {
            report: aggregation_matrices(horizon, window)?,
            empirical_error: None,
        })
    }
}
