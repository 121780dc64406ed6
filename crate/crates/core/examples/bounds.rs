//! Closed-form quantities behind the missing-data and aggregation bounds.

use nusid::analysis::{aggregation_matrices, gamma_distance, missing_bound, SIGMA_XI};
use nusid::observations::sample_missing_mask;

fn main() {
    let t = 104;
    println!("missing data, T = {t}, sigma_xi = {SIGMA_XI}");
    println!("{:>6} {:>4} {:>12} {:>12} {:>8}", "p_miss", "N", "|g_T - g_N|", "sqrt(p/T)", "bound");
    for p in [0.05, 0.25, 0.5, 0.75, 0.95] {
        let mask = sample_missing_mask(t, p, 3).unwrap();
        let g = gamma_distance(t, &mask).unwrap();
        println!(
            "{p:>6.2} {:>4} {:>12.6} {:>12.6} {:>8.4}",
            mask.len(),
            g.constructed,
            g.closed_form,
            missing_bound(SIGMA_XI, t, p)
        );
    }

    println!("\naggregation, T = 600");
    println!("{:>4} {:>10} {:>10} {:>18}", "Tr", "sigma_max", "beta", "sqrt(Tr) -/+ 1");
    for tr in [1, 2, 12, 24, 50] {
        let r = aggregation_matrices(600, tr).unwrap();
        println!(
            "{tr:>4} {:>10.6} {:>10.6} [{:>7.4}, {:>7.4}]",
            r.sigma_max, r.beta, r.bracket.0, r.bracket.1
        );
    }
}
