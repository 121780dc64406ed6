//! Observation schemes, mask and window generators, and CSV ingestion.

use std::collections::HashSet;
use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use crate::dynamics::AlphaMode;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ObservationError {
    #[error("missing fraction must lie in [0, 1), got {0}")]
    BadFraction(f64),
    #[error("no observed steps: the system is not identifiable")]
    EmptyMask,
    #[error("observed index {index} outside horizon {horizon}")]
    IndexOutOfRange { index: usize, horizon: usize },
    #[error("observed indices must be strictly increasing")]
    NotIncreasing,
    #[error("length mismatch: {0}")]
    LengthMismatch(String),
    #[error("line {line}, column {column}: {message}")]
    Parse { line: usize, column: String, message: String },
    #[error("schema error: {0}")]
    Schema(String),
    #[error("time column not increasing at line {line}")]
    NonMonotoneTime { line: usize },
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for ObservationError {
    fn from(e: std::io::Error) -> Self {
        ObservationError::Io(e.to_string())
    }
}

/// Per-channel measurement noise.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    #[serde(default)]
    pub output_std: Vec<f64>,
    #[serde(default)]
    pub input_std: Vec<f64>,
    #[serde(default)]
    pub seed: u64,
}

impl NoiseSpec {
    pub fn validate(&self) -> Result<(), ObservationError> {
        if self
            .output_std
            .iter()
            .chain(&self.input_std)
            .any(|s| !(s.is_finite() && *s >= 0.0))
        {
            return Err(ObservationError::Schema("noise standard deviations must be finite and >= 0".into()));
        }
        Ok(())
    }
}

/// Fully observed record of `T` steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub inputs: Vec<Vec<f64>>,
    pub outputs: Vec<Vec<f64>>,
}

impl Trace {
    pub fn horizon(&self) -> usize {
        self.outputs.len()
    }

    pub fn split(&self, at: usize) -> (Trace, Trace) {
        let at = at.min(self.horizon());
        (
            Trace {
                inputs: self.inputs[..at].to_vec(),
                outputs: self.outputs[..at].to_vec(),
            },
            Trace {
                inputs: self.inputs[at..].to_vec(),
                outputs: self.outputs[at..].to_vec(),
            },
        )
    }

    pub fn masked(&self, available: Vec<usize>) -> Result<MaskedTrace, ObservationError> {
        let outputs = available.iter().map(|&k| self.outputs.get(k).cloned()).collect::<Option<Vec<_>>>();
        let trace = MaskedTrace {
            horizon: self.horizon(),
            inputs: self.inputs.clone(),
            outputs: outputs.unwrap_or_default(),
            available,
        };
        trace.validate()?;
        Ok(trace)
    }

    pub fn full_mask(&self) -> MaskedTrace {
        MaskedTrace {
            horizon: self.horizon(),
            inputs: self.inputs.clone(),
            available: (0..self.horizon()).collect(),
            outputs: self.outputs.clone(),
        }
    }
}

/// Record of `T` steps observed only at `κ_N`; `outputs[j]` is the
/// measurement at step `available[j]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskedTrace {
    pub horizon: usize,
    pub inputs: Vec<Vec<f64>>,
    pub available: Vec<usize>,
    pub outputs: Vec<Vec<f64>>,
}

impl MaskedTrace {
    pub fn validate(&self) -> Result<(), ObservationError> {
        validate_mask(&self.available, self.horizon)?;
        if self.outputs.len() != self.available.len() {
            return Err(ObservationError::LengthMismatch(format!(
                "{} records for {} observed steps",
                self.outputs.len(),
                self.available.len()
            )));
        }
        if self.inputs.len() < self.horizon {
            return Err(ObservationError::LengthMismatch(format!(
                "{} inputs for horizon {}",
                self.inputs.len(),
                self.horizon
            )));
        }
        Ok(())
    }

    pub fn observed(&self) -> usize {
        self.available.len()
    }

    pub fn missing_fraction(&self) -> f64 {
        (self.horizon - self.available.len()) as f64 / self.horizon as f64
    }
}

/// `M` windowed records `Z^(i) = α Σ z_k` over consecutive windows of `T_r` steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregatedTrace {
    pub window: usize,
    pub alpha_mode: AlphaMode,
    pub inputs: Vec<Vec<f64>>,
    pub records: Vec<Vec<f64>>,
}

impl AggregatedTrace {
    pub fn windows(&self) -> usize {
        self.records.len()
    }

    pub fn alpha(&self) -> f64 {
        self.alpha_mode.alpha(self.window)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scheme", rename_all = "snake_case")]
pub enum ObservationSet {
    Uniform(Trace),
    Missing(MaskedTrace),
    MultiRun { runs: Vec<MaskedTrace> },
    Aggregated(AggregatedTrace),
}

impl ObservationSet {
    pub fn n_runs(&self) -> usize {
        match self {
            ObservationSet::MultiRun { runs } => runs.len(),
            _ => 1,
        }
    }

    pub fn validate(&self) -> Result<(), ObservationError> {
        match self {
            ObservationSet::Uniform(t) => {
                if t.outputs.is_empty() {
                    return Err(ObservationError::EmptyMask);
                }
                if t.inputs.len() < t.outputs.len() {
                    return Err(ObservationError::LengthMismatch("fewer inputs than outputs".into()));
                }
                Ok(())
            }
            ObservationSet::Missing(m) => m.validate(),
            ObservationSet::MultiRun { runs } => {
                if runs.is_empty() {
                    return Err(ObservationError::Schema("multi-run set needs at least one run".into()));
                }
                runs.iter().try_for_each(MaskedTrace::validate)
            }
            ObservationSet::Aggregated(a) => {
                if a.window == 0 || a.records.is_empty() {
                    return Err(ObservationError::EmptyMask);
                }
                if a.inputs.len() < a.window * a.records.len() {
                    return Err(ObservationError::LengthMismatch("fewer inputs than aggregated steps".into()));
                }
                Ok(())
            }
        }
    }
}

pub fn validate_mask(available: &[usize], horizon: usize) -> Result<(), ObservationError> {
    if available.is_empty() {
        return Err(ObservationError::EmptyMask);
    }
    if let Some(&index) = available.iter().find(|&&k| k >= horizon) {
        return Err(ObservationError::IndexOutOfRange { index, horizon });
    }
    if available.windows(2).any(|w| w[0] >= w[1]) {
        return Err(ObservationError::NotIncreasing);
    }
    Ok(())
}

/// Number of observed steps kept for a missing fraction.
pub fn observed_count(horizon: usize, p_miss: f64) -> usize {
    ((1.0 - p_miss) * horizon as f64).round_ties_even() as usize
}

/// Draw `κ_N` uniformly without replacement, `N = round((1 − p)·T)`.
///
/// The draw takes a prefix of one seeded permutation, so masks for the same
/// seed are nested: a larger `p_miss` removes a superset of steps.
pub fn sample_missing_mask(horizon: usize, p_miss: f64, seed: u64) -> Result<Vec<usize>, ObservationError> {
    if !(0.0..1.0).contains(&p_miss) {
        return Err(ObservationError::BadFraction(p_miss));
    }
    let n = observed_count(horizon, p_miss);
    if n == 0 {
        return Err(ObservationError::EmptyMask);
    }
    let mut order: Vec<usize> = (0..horizon).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut mask = order[..n].to_vec();
    mask.sort_unstable();
    Ok(mask)
}

/// Window sums (or means) of `outputs`; requires exactly `windows · window` steps.
pub fn aggregate(
    outputs: &[Vec<f64>],
    inputs: &[Vec<f64>],
    window: usize,
    windows: usize,
    mode: AlphaMode,
) -> Result<ObservationSet, ObservationError> {
    if window == 0 || windows == 0 {
        return Err(ObservationError::EmptyMask);
    }
    if outputs.len() != window * windows {
        return Err(ObservationError::LengthMismatch(format!(
            "{} outputs cannot form {windows} windows of {window}",
            outputs.len()
        )));
    }
    let alpha = mode.alpha(window);
    let records = outputs
        .chunks(window)
        .map(|chunk| {
            let mut acc = vec![0.0; chunk[0].len()];
            for z in chunk {
                for (a, v) in acc.iter_mut().zip(z) {
                    *a += *v;
                }
            }
            acc.into_iter().map(|c| c * alpha).collect()
        })
        .collect();
    Ok(ObservationSet::Aggregated(AggregatedTrace {
        window,
        alpha_mode: mode,
        inputs: inputs.to_vec(),
        records,
    }))
}

/// Column mapping for CSV datasets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CsvSchema {
    #[serde(default)]
    pub time: Option<String>,
    #[serde(default)]
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    /// Token treated like a blank cell.
    #[serde(default)]
    pub missing_token: Option<String>,
}

/// A dataset read from CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub set: ObservationSet,
    pub time: Option<Vec<f64>>,
    pub rows: usize,
    pub n_u: usize,
    pub n_z: usize,
}

impl Dataset {
    pub fn inputs(&self) -> &[Vec<f64>] {
        match &self.set {
            ObservationSet::Uniform(t) => &t.inputs,
            ObservationSet::Missing(m) => &m.inputs,
            ObservationSet::Aggregated(a) => &a.inputs,
            ObservationSet::MultiRun { runs } => &runs[0].inputs,
        }
    }

    /// Split into identification (`..at`) and validation (`at..`) parts.
    /// A part that loses all observations is returned as an error.
    pub fn split(&self, at: usize) -> Result<(ObservationSet, ObservationSet), ObservationError> {
        match &self.set {
            ObservationSet::Uniform(t) => {
                let (a, b) = t.split(at);
                Ok((ObservationSet::Uniform(a), ObservationSet::Uniform(b)))
            }
            ObservationSet::Missing(m) => {
                let at = at.min(m.horizon);
                let part = |lo: usize, hi: usize| -> Result<ObservationSet, ObservationError> {
                    let (available, outputs): (Vec<_>, Vec<_>) = m
                        .available
                        .iter()
                        .zip(&m.outputs)
                        .filter(|(k, _)| (lo..hi).contains(*k))
                        .map(|(&k, z)| (k - lo, z.clone()))
                        .unzip();
                    let t = MaskedTrace {
                        horizon: hi - lo,
                        inputs: m.inputs[lo..hi].to_vec(),
                        available,
                        outputs,
                    };
                    t.validate()?;
                    Ok(ObservationSet::Missing(t))
                };
                Ok((part(0, at)?, part(at, m.horizon)?))
            }
            _ => Err(ObservationError::Schema("only uniform and missing datasets can be split".into())),
        }
    }
}

fn is_missing(cell: &str, token: Option<&str>) -> bool {
    let c = cell.trim();
    c.is_empty() || token.is_some_and(|t| c == t)
}

fn parse_cell(cell: &str, line: usize, column: &str) -> Result<f64, ObservationError> {
    cell.trim().parse::<f64>().map_err(|e| ObservationError::Parse {
        line,
        column: column.to_string(),
        message: format!("`{}`: {e}", cell.trim()),
    })
}

pub fn ingest_csv(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<Dataset, ObservationError> {
    let file = std::fs::File::open(path.as_ref())
        .map_err(|e| ObservationError::Io(format!("{}: {e}", path.as_ref().display())))?;
    read_csv(file, schema)
}

/// Parse a dataset. Rows whose output cells are all blank are unobserved; a
/// row with only some output cells blank is rejected.
pub fn read_csv<R: Read>(reader: R, schema: &CsvSchema) -> Result<Dataset, ObservationError> {
    if schema.outputs.is_empty() {
        return Err(ObservationError::Schema("at least one output column is required".into()));
    }
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| ObservationError::Schema(format!("cannot read header: {e}")))?
        .clone();
    let col = |name: &String| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| ObservationError::Schema(format!("column `{name}` not found")))
    };
    let time_col = schema.time.as_ref().map(col).transpose()?;
    let in_cols = schema.inputs.iter().map(col).collect::<Result<Vec<_>, _>>()?;
    let out_cols = schema.outputs.iter().map(col).collect::<Result<Vec<_>, _>>()?;
    let token = schema.missing_token.as_deref();

    let mut time = Vec::new();
    let mut inputs = Vec::new();
    let mut outputs = Vec::new();
    let mut available = Vec::new();
    for (row, record) in rdr.records().enumerate() {
        let line = row + 2;
        let record = record.map_err(|e| ObservationError::Parse {
            line,
            column: String::new(),
            message: e.to_string(),
        })?;
        let cell = |i: usize| record.get(i).unwrap_or("");
        if let (Some(tc), Some(name)) = (time_col, &schema.time) {
            let t = parse_cell(cell(tc), line, name)?;
            if time.last().is_some_and(|&prev: &f64| t <= prev) {
                return Err(ObservationError::NonMonotoneTime { line });
            }
            time.push(t);
        }
        let u = in_cols
            .iter()
            .zip(&schema.inputs)
            .map(|(&c, name)| parse_cell(cell(c), line, name))
            .collect::<Result<Vec<_>, _>>()?;
        inputs.push(u);
        let blanks = out_cols.iter().filter(|&&c| is_missing(cell(c), token)).count();
        if blanks == out_cols.len() {
            continue;
        }
        if blanks > 0 {
            return Err(ObservationError::Schema(format!(
                "line {line}: partially observed output row"
            )));
        }
        let z = out_cols
            .iter()
            .zip(&schema.outputs)
            .map(|(&c, name)| parse_cell(cell(c), line, name))
            .collect::<Result<Vec<_>, _>>()?;
        available.push(row);
        outputs.push(z);
    }
    let rows = inputs.len();
    if available.is_empty() {
        return Err(ObservationError::EmptyMask);
    }
    let set = if available.len() == rows {
        ObservationSet::Uniform(Trace { inputs, outputs })
    } else {
        ObservationSet::Missing(MaskedTrace {
            horizon: rows,
            inputs,
            available,
            outputs,
        })
    };
    Ok(Dataset {
        set,
        time: schema.time.as_ref().map(|_| time),
        rows,
        n_u: schema.inputs.len(),
        n_z: schema.outputs.len(),
    })
}

/// Write a uniform or missing dataset; unobserved rows get blank output cells.
pub fn write_csv<W: Write>(writer: W, dataset: &Dataset, schema: &CsvSchema) -> Result<(), ObservationError> {
    let (inputs, rows): (&[Vec<f64>], Vec<Option<&Vec<f64>>>) = match &dataset.set {
        ObservationSet::Uniform(t) => (&t.inputs, t.outputs.iter().map(Some).collect()),
        ObservationSet::Missing(m) => {
            let mut rows = vec![None; m.horizon];
            for (&k, z) in m.available.iter().zip(&m.outputs) {
                rows[k] = Some(z);
            }
            (&m.inputs, rows)
        }
        _ => return Err(ObservationError::Schema("only uniform and missing datasets export to CSV".into())),
    };
    let io = |e: csv::Error| ObservationError::Io(e.to_string());
    let mut w = csv::Writer::from_writer(writer);
    let header: Vec<&str> = schema
        .time
        .iter()
        .chain(&schema.inputs)
        .chain(&schema.outputs)
        .map(String::as_str)
        .collect();
    w.write_record(&header).map_err(io)?;
    for (k, z) in rows.iter().enumerate() {
        let mut rec: Vec<String> = Vec::with_capacity(header.len());
        if schema.time.is_some() {
            let t = dataset.time.as_ref().map_or(k as f64, |t| t[k]);
            rec.push(format!("{t:?}"));
        }
        rec.extend(inputs[k].iter().map(|v| format!("{v:?}")));
        match z {
            Some(z) => rec.extend(z.iter().map(|v| format!("{v:?}"))),
            None => rec.extend(schema.outputs.iter().map(|_| String::new())),
        }
        w.write_record(&rec).map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

pub fn export_csv(path: impl AsRef<Path>, dataset: &Dataset, schema: &CsvSchema) -> Result<(), ObservationError> {
    let file = std::fs::File::create(path.as_ref())?;
    write_csv(std::io::BufWriter::new(file), dataset, schema)
}

/// Sidecar metadata written next to exported datasets.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub horizon: usize,
    pub observed: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub runs: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub windows: Option<usize>,
    #[serde(default)]
    pub seeds: Vec<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
}

impl DatasetMeta {
    pub fn describe(set: &ObservationSet) -> Self {
        match set {
            ObservationSet::Uniform(t) => DatasetMeta {
                horizon: t.horizon(),
                observed: t.horizon(),
                ..Default::default()
            },
            ObservationSet::Missing(m) => DatasetMeta {
                horizon: m.horizon,
                observed: m.observed(),
                ..Default::default()
            },
            ObservationSet::MultiRun { runs } => DatasetMeta {
                horizon: runs.iter().map(|r| r.horizon).sum(),
                observed: runs.iter().map(|r| r.observed()).sum(),
                runs: Some(runs.len()),
                ..Default::default()
            },
            ObservationSet::Aggregated(a) => DatasetMeta {
                horizon: a.window * a.windows(),
                observed: a.windows(),
                window: Some(a.window),
                windows: Some(a.windows()),
                ..Default::default()
            },
        }
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<(), ObservationError> {
        let text = serde_json::to_string_pretty(self).map_err(|e| ObservationError::Io(e.to_string()))?;
        std::fs::write(path, text)?;
        Ok(())
    }
}

/// Cut a trace into consecutive runs of `len` steps, each observed at the
/// steps of `mask` that fall inside it.
pub fn split_runs(trace: &Trace, mask: &[usize], len: usize) -> Result<Vec<MaskedTrace>, ObservationError> {
    if len == 0 || trace.horizon() % len != 0 {
        return Err(ObservationError::LengthMismatch(format!(
            "horizon {} is not a multiple of run length {len}",
            trace.horizon()
        )));
    }
    let keep: HashSet<usize> = mask.iter().copied().collect();
    (0..trace.horizon() / len)
        .map(|r| {
            let lo = r * len;
            let available: Vec<usize> = (0..len).filter(|j| keep.contains(&(lo + j))).collect();
            let t = MaskedTrace {
                horizon: len,
                inputs: trace.inputs[lo..lo + len].to_vec(),
                outputs: available.iter().map(|&j| trace.outputs[lo + j].clone()).collect(),
                available,
            };
            t.validate()?;
            Ok(t)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mask_sizes() {
        assert_eq!(sample_missing_mask(10, 0.0, 3).unwrap(), (0..10).collect::<Vec<_>>());
        for seed in 0..20 {
            assert_eq!(sample_missing_mask(104, 0.25, seed).unwrap().len(), 78);
            let m = sample_missing_mask(100, 0.75, seed).unwrap();
            assert_eq!(m.len(), 25);
            assert!(validate_mask(&m, 100).is_ok());
        }
        assert_eq!(observed_count(10, 0.25), 8);
        assert_eq!(observed_count(10, 0.35), 6);
        assert!(matches!(sample_missing_mask(10, 1.0, 0), Err(ObservationError::BadFraction(_))));
        assert!(matches!(sample_missing_mask(10, -0.1, 0), Err(ObservationError::BadFraction(_))));
        assert!(matches!(sample_missing_mask(1, 0.6, 0), Err(ObservationError::EmptyMask)));
    }

    #[test]
    fn masks_are_nested_for_a_seed() {
        let a = sample_missing_mask(104, 0.2, 11).unwrap();
        let b = sample_missing_mask(104, 0.6, 11).unwrap();
        assert!(b.iter().all(|k| a.contains(k)));
    }

    #[test]
    fn aggregate_records() {
        let z: Vec<Vec<f64>> = (0..6).map(|k| vec![k as f64]).collect();
        let u = vec![vec![]; 6];
        let ObservationSet::Aggregated(a) = aggregate(&z, &u, 1, 6, AlphaMode::Cumulative).unwrap() else {
            panic!()
        };
        assert_eq!(a.records, z);
        let ObservationSet::Aggregated(a) = aggregate(&z, &u, 3, 2, AlphaMode::Cumulative).unwrap() else {
            panic!()
        };
        assert_eq!(a.records, vec![vec![3.0], vec![12.0]]);
        let c = vec![vec![2.5, -1.0]; 12];
        let ObservationSet::Aggregated(a) = aggregate(&c, &u, 4, 3, AlphaMode::Averaged).unwrap() else {
            panic!()
        };
        assert!(a.records.iter().all(|r| r == &vec![2.5, -1.0]));
        assert!(matches!(
            aggregate(&z, &u, 4, 2, AlphaMode::Cumulative),
            Err(ObservationError::LengthMismatch(_))
        ));
    }

    fn schema() -> CsvSchema {
        CsvSchema {
            time: Some("t".into()),
            inputs: vec!["u".into()],
            outputs: vec!["c".into(), "temp".into()],
            missing_token: Some("NA".into()),
        }
    }

    #[test]
    fn ingest_infers_mask() {
        let mut text = String::from("t,u,c,temp\n");
        for k in 0..10 {
            if k == 3 {
                text.push_str("3,1.0,,\n");
            } else if k == 7 {
                text.push_str("7,1.0,NA,NA\n");
            } else {
                text.push_str(&format!("{k},1.0,{}e-1,4.4e2\n", k));
            }
        }
        let d = read_csv(text.as_bytes(), &schema()).unwrap();
        let ObservationSet::Missing(m) = &d.set else { panic!() };
        assert_eq!(m.available, vec![0, 1, 2, 4, 5, 6, 8, 9]);
        assert_eq!(m.outputs[3], vec![0.4, 440.0]);
        assert_eq!(d.rows, 10);
    }

    #[test]
    fn ingest_errors() {
        let s = schema();
        let partial = "t,u,c,temp\n0,1,0.1,\n";
        assert!(matches!(read_csv(partial.as_bytes(), &s), Err(ObservationError::Schema(_))));
        let bad = "t,u,c,temp\n0,1,0.1,440\n1,x,0.1,440\n";
        match read_csv(bad.as_bytes(), &s) {
            Err(ObservationError::Parse { line, column, .. }) => assert_eq!((line, column.as_str()), (3, "u")),
            other => panic!("{other:?}"),
        }
        let back = "t,u,c,temp\n0,1,0.1,440\n0,1,0.1,440\n";
        assert!(matches!(
            read_csv(back.as_bytes(), &s),
            Err(ObservationError::NonMonotoneTime { line: 3 })
        ));
        let nocol = "t,u,c\n0,1,0.1\n";
        assert!(matches!(read_csv(nocol.as_bytes(), &s), Err(ObservationError::Schema(_))));
    }

    #[test]
    fn split_runs_and_dataset() {
        let t = Trace {
            inputs: vec![vec![0.0]; 8],
            outputs: (0..8).map(|k| vec![k as f64]).collect(),
        };
        let runs = split_runs(&t, &[0, 1, 5, 6, 7], 4).unwrap();
        assert_eq!(runs[1].available, vec![1, 2, 3]);
        assert_eq!(runs[1].outputs[0], vec![5.0]);
        let d = Dataset {
            set: ObservationSet::Missing(t.masked(vec![0, 1, 5, 6, 7]).unwrap()),
            time: None,
            rows: 8,
            n_u: 1,
            n_z: 1,
        };
        let (a, b) = d.split(5).unwrap();
        let (ObservationSet::Missing(a), ObservationSet::Missing(b)) = (a, b) else { panic!() };
        assert_eq!(a.available, vec![0, 1]);
        assert_eq!(b.available, vec![0, 1, 2]);
        assert_eq!(b.outputs[0], vec![5.0]);
    }
}
