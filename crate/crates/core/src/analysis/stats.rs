use serde::{Deserialize, Serialize};

/// Box-plot summary with Tukey hinges and whiskers at 1.5 × IQR.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxStats {
    pub n: usize,
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub iqr: f64,
    pub whisker_lo: f64,
    pub whisker_hi: f64,
    pub outliers: Vec<f64>,
}

fn median_sorted(v: &[f64]) -> f64 {
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Summary of one group. Non-finite values are dropped; an empty group yields `None`.
pub fn box_stats(values: &[f64]) -> Option<BoxStats> {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    let median = median_sorted(&v);
    // Hinges: medians of the lower and upper halves, each including the
    // median element when n is odd.
    let half = n.div_ceil(2);
    let q1 = median_sorted(&v[..half]);
    let q3 = median_sorted(&v[n - half..]);
    let iqr = q3 - q1;
    let (lo, hi) = (q1 - 1.5 * iqr, q3 + 1.5 * iqr);
    let inside: Vec<f64> = v.iter().copied().filter(|x| (lo..=hi).contains(x)).collect();
    let mean = v.iter().sum::<f64>() / n as f64;
    let std = if n > 1 {
        (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    Some(BoxStats {
        n,
        mean,
        std,
        min: v[0],
        q1,
        median,
        q3,
        max: v[n - 1],
        iqr,
        whisker_lo: inside.first().copied().unwrap_or(q1),
        whisker_hi: inside.last().copied().unwrap_or(q3),
        outliers: v.iter().copied().filter(|x| !(lo..=hi).contains(x)).collect(),
    })
}

/// Summaries for labelled groups, skipping empty ones.
pub fn batch_stats<K: Clone>(groups: &[(K, Vec<f64>)]) -> Vec<(K, BoxStats)> {
    groups
        .iter()
        .filter_map(|(k, v)| box_stats(v).map(|s| (k.clone(), s)))
        .collect()
}
