use serde::{Deserialize, Serialize};

use super::AnalysisError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSet {
    pub fit_pct: Vec<f64>,
    pub fit_global: f64,
    pub rmse: Vec<f64>,
    /// Root mean square over every channel and step.
    pub rmse_global: f64,
    pub rrse: f64,
}

fn check(pred: &[Vec<f64>], meas: &[Vec<f64>]) -> Result<usize, AnalysisError> {
    if pred.len() != meas.len() {
        return Err(AnalysisError::LengthMismatch(format!(
            "{} predictions for {} measurements",
            pred.len(),
            meas.len()
        )));
    }
    if pred.len() < 2 {
        return Err(AnalysisError::LengthMismatch("at least two samples are required".into()));
    }
    let n = meas[0].len();
    if pred.iter().chain(meas).any(|r| r.len() != n) {
        return Err(AnalysisError::LengthMismatch("ragged channels".into()));
    }
    Ok(n)
}

fn channel(rows: &[Vec<f64>], i: usize) -> Vec<f64> {
    rows.iter().map(|r| r[i]).collect()
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// `100 (1 − Σ(ẑ − z̃)² / Σ(ẑ − mean z̃)²)` per channel, and the channel mean.
pub fn fit_percent(pred: &[Vec<f64>], meas: &[Vec<f64>]) -> Result<(Vec<f64>, f64), AnalysisError> {
    let n = check(pred, meas)?;
    let per = (0..n)
        .map(|i| {
            let p = channel(pred, i);
            let m = channel(meas, i);
            let mu = mean(&m);
            let num: f64 = p.iter().zip(&m).map(|(a, b)| (a - b).powi(2)).sum();
            let den: f64 = p.iter().map(|a| (a - mu).powi(2)).sum();
            if den == 0.0 {
                return Err(AnalysisError::DegenerateDenominator { channel: i });
            }
            Ok(100.0 * (1.0 - num / den))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let global = mean(&per);
    Ok((per, global))
}

pub fn rmse(pred: &[Vec<f64>], meas: &[Vec<f64>]) -> Result<(Vec<f64>, f64), AnalysisError> {
    let n = check(pred, meas)?;
    let t = pred.len() as f64;
    let sse: Vec<f64> = (0..n)
        .map(|i| pred.iter().zip(meas).map(|(p, m)| (p[i] - m[i]).powi(2)).sum())
        .collect();
    let per = sse.iter().map(|s| (s / t).sqrt()).collect();
    let global = (sse.iter().sum::<f64>() / (t * n as f64)).sqrt();
    Ok((per, global))
}

/// Channel mean of `√(Σ(ẑ − z̃)² / Σ(z̃ − mean z̃)²)` after standardizing both
/// series with the measurement mean and standard deviation.
pub fn rrse(pred: &[Vec<f64>], meas: &[Vec<f64>]) -> Result<f64, AnalysisError> {
    let n = check(pred, meas)?;
    let per = (0..n)
        .map(|i| {
            let m = channel(meas, i);
            let mu = mean(&m);
            let sd = (m.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / m.len() as f64).sqrt();
            if sd == 0.0 {
                return Err(AnalysisError::DegenerateDenominator { channel: i });
            }
            let zm: Vec<f64> = m.iter().map(|v| (v - mu) / sd).collect();
            let zp: Vec<f64> = pred.iter().map(|r| (r[i] - mu) / sd).collect();
            let mz = mean(&zm);
            let num: f64 = zp.iter().zip(&zm).map(|(a, b)| (a - b).powi(2)).sum();
            let den: f64 = zm.iter().map(|b| (b - mz).powi(2)).sum();
            Ok((num / den).sqrt())
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(mean(&per))
}

impl MetricSet {
    pub fn compute(pred: &[Vec<f64>], meas: &[Vec<f64>]) -> Result<Self, AnalysisError> {
        let (fit_pct, fit_global) = fit_percent(pred, meas)?;
        let (rmse, rmse_global) = rmse(pred, meas)?;
        Ok(MetricSet {
            fit_pct,
            fit_global,
            rmse,
            rmse_global,
            rrse: rrse(pred, meas)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn col(v: &[f64]) -> Vec<Vec<f64>> {
        v.iter().map(|&x| vec![x]).collect()
    }

    #[test]
    fn perfect_prediction() {
        let z: Vec<Vec<f64>> = (0..10).map(|k| vec![k as f64, (k * k) as f64]).collect();
        let m = MetricSet::compute(&z, &z).unwrap();
        assert_eq!(m.fit_global, 100.0);
        assert_eq!(m.rmse_global, 0.0);
        assert_eq!(m.rrse, 0.0);
    }

    #[test]
    fn fit_hand_example() {
        let (per, global) = fit_percent(&col(&[1.0, 2.0, 3.0]), &col(&[1.0, 2.0, 4.0])).unwrap();
        let want = 100.0 * (1.0 - 1.0 / (16.0 / 9.0 + 1.0 / 9.0 + 4.0 / 9.0));
        assert!((per[0] - want).abs() < 1e-12);
        assert!((global - 57.142_857_142_857).abs() < 1e-9);
        assert!(matches!(
            fit_percent(&col(&[2.0, 2.0]), &col(&[1.0, 3.0])),
            Err(AnalysisError::DegenerateDenominator { channel: 0 })
        ));
    }

    #[test]
    fn rrse_of_mean_predictor_is_one() {
        let meas = col(&[1.0, 4.0, 2.0, 8.0, 5.0]);
        let mu = 4.0;
        let r = rrse(&col(&[mu; 5]), &meas).unwrap();
        assert!((r - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rrse_affine_invariant() {
        let meas = col(&[1.0, 4.0, 2.0, 8.0, 5.0]);
        let pred = col(&[1.5, 3.0, 2.5, 7.0, 6.0]);
        let f = |v: &Vec<Vec<f64>>| v.iter().map(|r| vec![3.0 * r[0] - 7.0]).collect::<Vec<_>>();
        let a = rrse(&pred, &meas).unwrap();
        let b = rrse(&f(&pred), &f(&meas)).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn rmse_values() {
        let (per, global) = rmse(&[vec![1.0, 0.0], vec![1.0, 0.0]], &[vec![0.0, 0.0], vec![0.0, 2.0]]).unwrap();
        assert_eq!(per, vec![1.0, 2f64.sqrt()]);
        assert!((global - 1.5f64.sqrt()).abs() < 1e-15);
    }
}
