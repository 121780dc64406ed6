use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::Deserialize;

use super::config::ExperimentConfig;
use super::run::{summarize, ExperimentReport, RepFailure, RepRecord};
use super::HarnessError;

fn io_error(path: &Path, e: impl std::fmt::Display) -> HarnessError {
    HarnessError::Io(format!("{}: {e}", path.display()))
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6e}")).unwrap_or_default()
}

fn writer(path: &Path) -> Result<csv::Writer<fs::File>, HarnessError> {
    csv::Writer::from_path(path).map_err(|e| io_error(path, e))
}

/// `reps.csv`, `summary.csv`, `failures.csv` and, for missing-data schemes, `bounds.csv`.
pub fn write_tables(config: &ExperimentConfig, report: &ExperimentReport, root: &Path) -> Result<(), HarnessError> {
    let hash = &report.config_hash;
    let path = root.join("reps.csv");
    let mut w = writer(&path)?;
    let n_theta = report.records.first().map_or(0, |r| r.theta.len());
    let mut header: Vec<String> = ["config_hash", "level", "value", "rep", "seed"].map(String::from).to_vec();
    header.extend((0..n_theta).map(|i| format!("theta{i}")));
    header.extend(
        [
            "objective",
            "iterations",
            "termination",
            "backtracks",
            "error_to_nominal",
            "rel_error_to_nominal",
            "error_to_reference",
            "x0_error",
            "fit_id",
            "rmse_id",
            "fit_val",
            "rmse_val",
        ]
        .map(String::from),
    );
    w.write_record(&header).map_err(|e| io_error(&path, e))?;
    for r in &report.records {
        let mut row = vec![hash.clone(), r.level.clone(), r.value.to_string(), r.rep.to_string(), r.seed.to_string()];
        row.extend(r.theta.iter().map(|t| format!("{t:.12e}")));
        row.extend([
            format!("{:.12e}", r.objective),
            r.iterations.to_string(),
            r.termination.clone(),
            r.backtracks.to_string(),
            format!("{:.6e}", r.error_to_nominal),
            format!("{:.6e}", r.rel_error_to_nominal),
            fmt_opt(r.error_to_reference),
            fmt_opt(r.x0_error),
            fmt_opt(r.identification.as_ref().map(|m| m.fit_global)),
            fmt_opt(r.identification.as_ref().map(|m| m.rmse_global)),
            fmt_opt(r.validation.as_ref().map(|m| m.fit_global)),
            fmt_opt(r.validation.as_ref().map(|m| m.rmse_global)),
        ]);
        w.write_record(&row).map_err(|e| io_error(&path, e))?;
    }
    w.flush().map_err(|e| io_error(&path, e))?;

    let path = root.join("summary.csv");
    let mut w = writer(&path)?;
    w.write_record([
        "config_hash",
        "level",
        "value",
        "n_ok",
        "n_failed",
        "measure",
        "n",
        "mean",
        "std",
        "min",
        "q1",
        "median",
        "q3",
        "max",
        "iqr",
    ])
    .map_err(|e| io_error(&path, e))?;
    for s in &report.summary {
        let measures = [
            ("error_to_reference", &s.error_to_reference),
            ("error_to_nominal", &s.error_to_nominal),
            ("fit_id", &s.fit_identification),
            ("rmse_id", &s.rmse_identification),
            ("fit_val", &s.fit_validation),
            ("rmse_val", &s.rmse_validation),
        ];
        for (name, stats) in measures {
            let Some(b) = stats else { continue };
            w.write_record([
                hash.clone(),
                s.level.clone(),
                s.value.to_string(),
                s.n_ok.to_string(),
                s.n_failed.to_string(),
                name.to_string(),
                b.n.to_string(),
                format!("{:.6e}", b.mean),
                format!("{:.6e}", b.std),
                format!("{:.6e}", b.min),
                format!("{:.6e}", b.q1),
                format!("{:.6e}", b.median),
                format!("{:.6e}", b.q3),
                format!("{:.6e}", b.max),
                format!("{:.6e}", b.iqr),
            ])
            .map_err(|e| io_error(&path, e))?;
        }
    }
    w.flush().map_err(|e| io_error(&path, e))?;

    if report.summary.iter().any(|s| s.bound.is_some()) {
        let path = root.join("bounds.csv");
        let mut w = writer(&path)?;
        w.write_record(["config_hash", "level", "p_miss", "horizon", "bound", "runs", "coverage", "max_error"])
            .map_err(|e| io_error(&path, e))?;
        for s in &report.summary {
            let Some(bound) = s.bound else { continue };
            w.write_record([
                hash.clone(),
                s.level.clone(),
                s.value.to_string(),
                config.data.identification().to_string(),
                format!("{bound:.6e}"),
                s.error_to_reference.as_ref().map_or(0, |b| b.n).to_string(),
                fmt_opt(s.coverage),
                fmt_opt(s.error_to_reference.as_ref().map(|b| b.max)),
            ])
            .map_err(|e| io_error(&path, e))?;
        }
        w.flush().map_err(|e| io_error(&path, e))?;
    }

    let path = root.join("failures.csv");
    let mut w = writer(&path)?;
    w.write_record(["config_hash", "level", "rep", "seed", "class", "message"])
        .map_err(|e| io_error(&path, e))?;
    for f in &report.failures {
        w.write_record([hash.clone(), f.level.clone(), f.rep.to_string(), f.seed.to_string(), f.class.clone(), f.message.clone()])
            .map_err(|e| io_error(&path, e))?;
    }
    w.flush().map_err(|e| io_error(&path, e))
}

#[derive(Deserialize)]
struct Stamped {
    config_hash: String,
    config: ExperimentConfig,
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, HarnessError> {
    let text = fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    serde_json::from_str(&text).map_err(|e| HarnessError::Data(format!("{}: {e}", path.display())))
}

/// Config and per-repetition files of one output directory.
pub fn load_report(root: &Path) -> Result<(ExperimentConfig, ExperimentReport), HarnessError> {
    let stamped: Stamped = read_json(&root.join("config.json"))?;
    let mut records = Vec::new();
    let mut failures = Vec::new();
    let mut levels: Vec<String> = stamped.config.levels().into_iter().map(|(l, _)| l).collect();
    levels.push("all".into());
    for level in levels {
        let dir = root.join(&level);
        let Ok(entries) = fs::read_dir(&dir) else { continue };
        let mut reps: Vec<_> = entries.filter_map(Result::ok).map(|e| e.path()).collect();
        reps.sort();
        for rep in reps {
            let record = rep.join("record.json");
            let failure = rep.join("failure.json");
            if record.exists() {
                records.push(read_json::<RepRecord>(&record)?);
            }
            if failure.exists() {
                failures.push(read_json::<RepFailure>(&failure)?);
            }
        }
    }
    let stray = records
        .iter()
        .map(|r| &r.config_hash)
        .chain(failures.iter().map(|f| &f.config_hash))
        .find(|h| **h != stamped.config_hash);
    if let Some(h) = stray {
        return Err(HarnessError::Data(format!(
            "{} holds results of config {h}, expected {}",
            root.display(),
            stamped.config_hash
        )));
    }
    let summary = summarize(&stamped.config, &records, &failures);
    Ok((
        stamped.config,
        ExperimentReport {
            config_hash: stamped.config_hash,
            records,
            failures,
            summary,
            fits: Vec::new(),
        },
    ))
}

/// Combine output directories of the same config. Repetitions present in
/// several directories are kept once; a success beats a failure.
pub fn merge_reports(roots: &[&Path]) -> Result<(ExperimentConfig, ExperimentReport), HarnessError> {
    let (first, rest) = roots
        .split_first()
        .ok_or_else(|| HarnessError::Data("no result directories given".into()))?;
    let (config, base) = load_report(first)?;
    let mut records: BTreeMap<(String, usize), RepRecord> = BTreeMap::new();
    let mut failures: BTreeMap<(String, usize), RepFailure> = BTreeMap::new();
    let mut absorb = |report: ExperimentReport| {
        for r in report.records {
            records.entry((r.level.clone(), r.rep)).or_insert(r);
        }
        for f in report.failures {
            failures.entry((f.level.clone(), f.rep)).or_insert(f);
        }
    };
    let hash = base.config_hash.clone();
    absorb(base);
    for root in rest {
        let (_, report) = load_report(root)?;
        if report.config_hash != hash {
            return Err(HarnessError::Data(format!(
                "{} was produced by config {}, expected {hash}",
                root.display(),
                report.config_hash
            )));
        }
        absorb(report);
    }
    let order: Vec<String> = config.levels().into_iter().map(|(l, _)| l).collect();
    let rank = |l: &str| order.iter().position(|o| o == l).unwrap_or(usize::MAX);
    let mut records: Vec<RepRecord> = records.into_values().collect();
    records.sort_by_key(|r| (rank(&r.level), r.rep));
    let mut failures: Vec<RepFailure> = failures
        .into_values()
        .filter(|f| !records.iter().any(|r| r.level == f.level && r.rep == f.rep))
        .collect();
    failures.sort_by_key(|f| (rank(&f.level), f.rep));
    let summary = summarize(&config, &records, &failures);
    Ok((
        config,
        ExperimentReport {
            config_hash: hash,
            records,
            failures,
            summary,
            fits: Vec::new(),
        },
    ))
}
