use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use nusid::analysis::{BoundReport, SIGMA_XI};
use nusid::harness::{
    merge_reports, preset, run_experiment, scheme_bounds, simulate_dataset, write_tables, ExperimentConfig,
    ExperimentReport, HarnessError,
};
use nusid::observations::{export_csv, ingest_csv, CsvSchema, DatasetMeta};

#[derive(Parser)]
#[command(name = "nusid", version, about = "System identification from non-uniform observations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment config (or a built-in preset: e1, e2, e3).
    Run {
        config: Option<PathBuf>,
        #[arg(long, conflicts_with = "config")]
        preset: Option<String>,
        /// Override the number of repetitions.
        #[arg(long)]
        reps: Option<usize>,
        /// Override the output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write the synthetic dataset of one repetition as CSV plus a JSON sidecar.
    Simulate {
        config: Option<PathBuf>,
        #[arg(long, conflicts_with = "config")]
        preset: Option<String>,
        #[arg(long, default_value_t = 0)]
        rep: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Validate an external CSV dataset and print its summary.
    Ingest {
        path: PathBuf,
        /// Comma-separated input column names.
        #[arg(long, value_delimiter = ',')]
        inputs: Vec<String>,
        /// Comma-separated output column names.
        #[arg(long, value_delimiter = ',', required = true)]
        outputs: Vec<String>,
        #[arg(long)]
        time: Option<String>,
        #[arg(long)]
        missing_token: Option<String>,
    },
    /// Print bound quantities for a missing-data or aggregated setting.
    Bounds {
        #[arg(long = "T")]
        horizon: Option<usize>,
        #[arg(long = "p-miss", conflicts_with = "window")]
        p_miss: Option<f64>,
        #[arg(long = "sigma-xi", default_value_t = SIGMA_XI)]
        sigma_xi: f64,
        #[arg(long = "Tr")]
        window: Option<usize>,
        /// Report every level of a config instead.
        #[arg(long, conflicts_with_all = ["horizon", "p_miss", "window"])]
        config: Option<PathBuf>,
    },
    /// Merge result directories of one config into summary tables.
    Report {
        #[arg(required = true)]
        dirs: Vec<PathBuf>,
        /// Write merged tables here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn config_error(path: &str, message: impl Into<String>) -> HarnessError {
    HarnessError::Config {
        path: path.into(),
        message: message.into(),
    }
}

fn load(config: Option<PathBuf>, preset_name: Option<String>) -> Result<ExperimentConfig, HarnessError> {
    match (config, preset_name) {
        (Some(p), _) => ExperimentConfig::load(p),
        (None, Some(name)) => preset(&name).ok_or_else(|| config_error("preset", format!("unknown preset `{name}`"))),
        (None, None) => Err(config_error("$", "give a config file or --preset")),
    }
}

fn print_summary(report: &ExperimentReport) {
    println!("config {}", report.config_hash);
    println!(
        "{:<8} {:>4} {:>4} {:>12} {:>12} {:>10} {:>10} {:>10} {:>8}",
        "level", "ok", "fail", "err_ref", "err_nom", "fit_id", "fit_val", "bound", "cover"
    );
    let med = |b: &Option<nusid::analysis::BoxStats>| b.as_ref().map_or("-".to_string(), |b| format!("{:.4e}", b.median));
    let pct = |b: &Option<nusid::analysis::BoxStats>| b.as_ref().map_or("-".to_string(), |b| format!("{:.2}", b.median));
    for s in &report.summary {
        println!(
            "{:<8} {:>4} {:>4} {:>12} {:>12} {:>10} {:>10} {:>10} {:>8}",
            s.level,
            s.n_ok,
            s.n_failed,
            med(&s.error_to_reference),
            med(&s.error_to_nominal),
            pct(&s.fit_identification),
            pct(&s.fit_validation),
            s.bound.map_or("-".to_string(), |b| format!("{b:.4}")),
            s.coverage.map_or("-".to_string(), |c| format!("{c:.2}")),
        );
    }
}

fn print_bound(label: &str, r: &BoundReport) {
    match r {
        BoundReport::Missing {
            horizon,
            observed,
            gamma,
            sigma_xi,
            bound,
            ..
        } => println!(
            "{label}T={horizon} N={observed} gamma_distance={:.6} closed_form={:.6} sigma_xi={sigma_xi} bound={bound:.6}",
            gamma.constructed, gamma.closed_form
        ),
        BoundReport::Aggregated { report, .. } => println!(
            "{label}T={} Tr={} M={} sigma_max={:.6} beta={:.6} bracket=[{:.4}, {:.4}]",
            report.horizon,
            report.window,
            report.windows,
            report.sigma_max,
            report.beta,
            report.bracket.0,
            report.bracket.1
        ),
    }
}

fn execute(cli: Cli) -> Result<(), HarnessError> {
    match cli.command {
        Command::Run {
            config,
            preset,
            reps,
            out,
        } => {
            let mut c = load(config, preset)?;
            if let Some(r) = reps {
                c.reps = r;
            }
            if let Some(o) = out {
                c.output_dir = o;
            }
            let report = run_experiment(&c)?;
            print_summary(&report);
            println!("results in {}", c.output_dir.display());
        }
        Command::Simulate {
            config,
            preset,
            rep,
            out,
        } => {
            let c = load(config, preset)?;
            let (data, meta) = simulate_dataset(&c, rep)?;
            let ds = data.to_dataset();
            let schema = CsvSchema {
                time: Some("k".into()),
                inputs: (0..ds.n_u).map(|i| format!("u{i}")).collect(),
                outputs: (0..ds.n_z).map(|i| format!("z{i}")).collect(),
                missing_token: None,
            };
            let data_error = |e: nusid::observations::ObservationError| HarnessError::Io(e.to_string());
            export_csv(&out, &ds, &schema).map_err(data_error)?;
            let sidecar = out.with_extension("meta.json");
            meta.write(&sidecar).map_err(data_error)?;
            println!("wrote {} ({} rows) and {}", out.display(), ds.rows, sidecar.display());
        }
        Command::Ingest {
            path,
            inputs,
            outputs,
            time,
            missing_token,
        } => {
            let schema = CsvSchema {
                time,
                inputs,
                outputs,
                missing_token,
            };
            let ds = ingest_csv(&path, &schema).map_err(|e| HarnessError::Data(e.to_string()))?;
            let meta = DatasetMeta::describe(&ds.set);
            println!(
                "{}: {} rows, {} inputs, {} outputs, {} observed",
                path.display(),
                ds.rows,
                ds.n_u,
                ds.n_z,
                meta.observed
            );
            println!("{}", serde_json::to_string_pretty(&meta).expect("meta serializes"));
        }
        Command::Bounds {
            horizon,
            p_miss,
            sigma_xi,
            window,
            config,
        } => {
            if let Some(path) = config {
                let c = ExperimentConfig::load(path)?;
                for (level, r) in scheme_bounds(&c)? {
                    print_bound(&format!("{level}: "), &r);
                }
                return Ok(());
            }
            let horizon = horizon.ok_or_else(|| config_error("--T", "horizon is required"))?;
            let numeric = |e: nusid::analysis::AnalysisError| HarnessError::Numeric(e.to_string());
            let r = match (p_miss, window) {
                (Some(p), None) => {
                    if !(0.0..1.0).contains(&p) {
                        return Err(config_error("--p-miss", "must lie in [0, 1)"));
                    }
                    BoundReport::missing(horizon, p, sigma_xi).map_err(numeric)?
                }
                (None, Some(w)) => {
                    if w == 0 || horizon % w != 0 {
                        return Err(config_error("--Tr", format!("must be a positive divisor of T = {horizon}")));
                    }
                    BoundReport::aggregated(horizon, w).map_err(numeric)?
                }
                _ => return Err(config_error("--p-miss", "give exactly one of --p-miss or --Tr")),
            };
            print_bound("", &r);
        }
        Command::Report { dirs, out } => {
            let roots: Vec<&Path> = dirs.iter().map(PathBuf::as_path).collect();
            let (config, report) = merge_reports(&roots)?;
            print_summary(&report);
            if let Some(o) = out {
                std::fs::create_dir_all(&o).map_err(|e| HarnessError::Io(format!("{}: {e}", o.display())))?;
                write_tables(&config, &report, &o)?;
                println!("tables in {}", o.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.class());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
