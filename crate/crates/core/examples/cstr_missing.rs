//! CSTR with missing measurements: validation fit per missing fraction.

use nusid::harness::{preset, run_in_memory, SchemeConfig};

fn main() {
    let mut config = preset("e3").unwrap();
    config.reps = 3;
    config.scheme = SchemeConfig::Missing {
        p_miss: vec![0.0, 0.5],
    };
    let report = run_in_memory(&config).unwrap();
    for r in &report.records {
        let val = r.validation.as_ref().unwrap();
        println!(
            "{} rep {}: validation fit {:.2}% per channel {:.2?}, rrse {:.3}",
            r.level, r.rep, val.fit_global, val.fit_pct, val.rrse
        );
    }
}
