use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Each entry uniform in `[θ_i − r|θ_i|, θ_i + r|θ_i|]`.
pub fn init_ball(nominal: &[f64], radius_fraction: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    nominal
        .iter()
        .map(|&t| {
            let r = radius_fraction * t.abs();
            if r == 0.0 {
                t
            } else {
                t + rng.gen_range(-r..=r)
            }
        })
        .collect()
}

/// `θ + shift + std · 𝒩(0, 1)`, drawn independently per entry.
pub fn init_gaussian(nominal: &[f64], shift: f64, std: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    nominal
        .iter()
        .map(|&t| {
            let n: f64 = rng.sample(StandardNormal);
            t + shift + std * n
        })
        .collect()
}

/// As [`init_gaussian`], redrawing entries listed in `positive` until they are > 0.
pub fn init_gaussian_positive(nominal: &[f64], shift: f64, std: f64, seed: u64, positive: &[usize]) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    nominal
        .iter()
        .enumerate()
        .map(|(i, &t)| loop {
            let n: f64 = rng.sample(StandardNormal);
            let v = t + shift + std * n;
            if v > 0.0 || !positive.contains(&i) || t + shift <= 0.0 {
                break v;
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn degenerate_draws_return_nominal() {
        let th = [7.2e10, 1.44e13, 7e5];
        assert_eq!(init_ball(&th, 0.0, 1), th.to_vec());
        assert_eq!(init_gaussian(&th, 0.0, 0.0, 1), th.to_vec());
    }

    #[test]
    fn ball_stays_inside_radius() {
        let th = [7.2e10, 1.44e13, 7e5];
        for seed in 0..500 {
            let d = init_ball(&th, 0.3, seed);
            for (a, b) in d.iter().zip(&th) {
                assert!((a - b).abs() <= 0.3 * b.abs());
            }
        }
    }

    #[test]
    fn gaussian_mean() {
        let th = [0.13];
        let n = 10_000;
        let mean: f64 = (0..n).map(|s| init_gaussian(&th, 0.02, 0.05, s)[0]).sum::<f64>() / n as f64;
        assert!((mean - 0.15).abs() <= 3.0 * 0.05 / 100.0);
    }

    #[test]
    fn positive_redraw() {
        let th = [0.02; 4];
        for seed in 0..200 {
            assert!(init_gaussian_positive(&th, 0.02, 0.05, seed, &[0, 1, 2, 3]).iter().all(|&v| v > 0.0));
        }
    }
}
