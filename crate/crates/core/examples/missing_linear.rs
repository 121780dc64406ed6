//! Missing-data experiment on linear2nd: parameter shift against the fully
//! observed fit as observations are removed, next to the theoretical curve.

use nusid::harness::{preset, run_in_memory, SchemeConfig};

fn main() {
    let mut config = preset("e1").unwrap();
    config.reps = 5;
    config.scheme = SchemeConfig::Missing {
        p_miss: vec![0.0, 0.1, 0.3, 0.5, 0.7, 0.9],
    };
    let report = run_in_memory(&config).unwrap();
    println!("{:<7} {:>4} {:>12} {:>10} {:>9}", "level", "ok", "median err", "bound", "coverage");
    for s in &report.summary {
        println!(
            "{:<7} {:>4} {:>12.4e} {:>10.4} {:>9.2}",
            s.level,
            s.n_ok,
            s.error_to_reference.as_ref().map_or(f64::NAN, |b| b.median),
            s.bound.unwrap_or(f64::NAN),
            s.coverage.unwrap_or(f64::NAN)
        );
    }
}
