use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::observations::validate_mask;

use super::AnalysisError;

/// Reference value of the missing-data sensitivity constant.
pub const SIGMA_XI: f64 = 4.2;

/// `γ_T = (1/T) 1_T`.
pub fn gamma_full(horizon: usize) -> DVector<f64> {
    DVector::from_element(horizon, 1.0 / horizon as f64)
}

/// `γ_N`: `1/T` on observed steps, zero elsewhere.
pub fn gamma_missing(horizon: usize, available: &[usize]) -> DVector<f64> {
    let mut g = DVector::zeros(horizon);
    for &k in available {
        g[k] = 1.0 / horizon as f64;
    }
    g
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaDistance {
    pub constructed: f64,
    /// `√((T − N) / T²)`.
    pub closed_form: f64,
}

pub fn gamma_distance(horizon: usize, available: &[usize]) -> Result<GammaDistance, AnalysisError> {
    validate_mask(available, horizon).map_err(|e| AnalysisError::InvalidMask(e.to_string()))?;
    let constructed = (gamma_full(horizon) - gamma_missing(horizon, available)).norm();
    let t = horizon as f64;
    let closed_form = ((t - available.len() as f64) / (t * t)).sqrt();
    Ok(GammaDistance {
        constructed,
        closed_form,
    })
}

/// `T × T` aggregation matrix whose first `M` rows sum consecutive windows of `T_r` steps.
pub fn aggregation_matrix(horizon: usize, window: usize) -> Result<DMatrix<f64>, AnalysisError> {
    if window == 0 || horizon == 0 || horizon % window != 0 {
        return Err(AnalysisError::NonDivisibleHorizon { horizon, window });
    }
    let m = horizon / window;
    Ok(DMatrix::from_fn(horizon, horizon, |i, j| {
        if i < m && j / window == i {
            1.0
        } else {
            0.0
        }
    }))
}

/// Largest singular value, from the symmetric eigen-decomposition of `A Aᵀ`.
pub fn sigma_max(a: &DMatrix<f64>) -> f64 {
    let gram = a * a.transpose();
    let eig = SymmetricEigen::new(gram);
    eig.eigenvalues.iter().cloned().fold(0.0, f64::max).max(0.0).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregationReport {
    pub horizon: usize,
    pub window: usize,
    pub windows: usize,
    /// `σ_max(Γ_{T_r})`.
    pub sigma_max: f64,
    /// `β_{T_r} = σ_max(I_T − Γ_{T_r})`.
    pub beta: f64,
    pub bracket: (f64, f64),
}

impl AggregationReport {
    pub fn beta_in_bracket(&self) -> bool {
        self.bracket.0 <= self.beta && self.beta <= self.bracket.1
    }
}

pub fn aggregation_matrices(horizon: usize, window: usize) -> Result<AggregationReport, AnalysisError> {
    let gamma = aggregation_matrix(horizon, window)?;
    let diff = DMatrix::identity(horizon, horizon) - &gamma;
    let root = (window as f64).sqrt();
    Ok(AggregationReport {
        horizon,
        window,
        windows: horizon / window,
        sigma_max: sigma_max(&gamma),
        beta: sigma_max(&diff),
        bracket: (root - 1.0, root + 1.0),
    })
}

/// `σ_ξ √p_miss / √T`.
pub fn missing_bound(sigma_xi: f64, horizon: usize, p_miss: f64) -> f64 {
    sigma_xi * p_miss.sqrt() / (horizon as f64).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundRow {
    pub p_miss: f64,
    pub bound: f64,
    pub runs: usize,
    pub covered: usize,
    pub max_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MissingBoundReport {
    pub horizon: usize,
    pub sigma_xi: f64,
    pub rows: Vec<BoundRow>,
    /// Fraction of all runs with error at or below the bound.
    pub coverage: f64,
    /// Smallest `σ_ξ` whose curve covers every run.
    pub fitted_sigma_xi: f64,
}

/// Compare per-run errors `‖θ*_T − θ*_N‖` against the missing-data bound.
pub fn bound_check_missing(
    groups: &[(f64, Vec<f64>)],
    horizon: usize,
    sigma_xi: f64,
) -> MissingBoundReport {
    let mut rows = Vec::with_capacity(groups.len());
    let (mut total, mut covered_all) = (0usize, 0usize);
    let mut fitted: f64 = 0.0;
    for (p, errors) in groups {
        let bound = missing_bound(sigma_xi, horizon, *p);
        let covered = errors.iter().filter(|&&e| e <= bound).count();
        for &e in errors {
            let need = if e == 0.0 {
                0.0
            } else if *p == 0.0 {
                f64::INFINITY
            } else {
                e * (horizon as f64).sqrt() / p.sqrt()
            };
            fitted = fitted.max(need);
        }
        total += errors.len();
        covered_all += covered;
        rows.push(BoundRow {
            p_miss: *p,
            bound,
            runs: errors.len(),
            covered,
            max_error: errors.iter().cloned().fold(0.0, f64::max),
        });
    }
    MissingBoundReport {
        horizon,
        sigma_xi,
        rows,
        coverage: if total == 0 { 1.0 } else { covered_all as f64 / total as f64 },
        fitted_sigma_xi: fitted,
    }
}
