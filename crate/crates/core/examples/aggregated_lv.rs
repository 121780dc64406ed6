//! Lotka-Volterra identified from window averages, with a learned correction
//! for the unmodeled disturbance.

use nusid::harness::{preset, run_in_memory, SchemeConfig};
use nusid::dynamics::AlphaMode;

fn main() {
    let mut config = preset("e2").unwrap();
    config.scheme = SchemeConfig::Aggregated {
        windows: vec![12, 50],
        alpha: AlphaMode::Averaged,
    };
    let report = run_in_memory(&config).unwrap();
    for r in &report.records {
        let id = r.identification.as_ref().unwrap();
        println!(
            "{}: theta {:.4?} error {:.4} fit {:.1}% rmse {:.3} ({} iterations)",
            r.level, r.theta, r.error_to_nominal, id.fit_global, id.rmse_global, r.iterations
        );
    }
    for f in &report.failures {
        println!("{} failed: {}", f.level, f.message);
    }
}
