use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// Independent random streams of one repetition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Input = 1,
    Noise = 2,
    Init = 3,
    Mask = 4,
}

/// Seed of `stream` for repetition seed `seed` (splitmix64 finalizer).
pub fn derive_seed(seed: u64, stream: Stream) -> u64 {
    let mut z = seed
        .wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add((stream as u64).wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Excitation signals for simulated experiments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, tag = "kind", rename_all = "snake_case")]
pub enum InputSignal {
    /// Autonomous model; every step gets an empty input vector.
    None,
    Constant { value: Vec<f64> },
    /// `level + noise_std · 𝒩(0, 1)` at every step.
    Step { level: Vec<f64>, noise_std: Vec<f64> },
    /// Uniform draws in `[low, high]`, each held for `hold` steps.
    PiecewiseConstant { low: Vec<f64>, high: Vec<f64>, hold: usize },
}

impl InputSignal {
    pub fn validate(&self, n_u: usize) -> Result<(), String> {
        let check = |v: &[f64], what: &str| {
            if v.len() == n_u {
                Ok(())
            } else {
                Err(format!("{what} needs {n_u} entries"))
            }
        };
        match self {
            InputSignal::None if n_u == 0 => Ok(()),
            InputSignal::None => Err(format!("model has {n_u} inputs")),
            InputSignal::Constant { value } => check(value, "value"),
            InputSignal::Step { level, noise_std } => {
                check(level, "level")?;
                check(noise_std, "noise_std")?;
                if noise_std.iter().any(|s| !(*s >= 0.0)) {
                    return Err("noise_std must be >= 0".into());
                }
                Ok(())
            }
            InputSignal::PiecewiseConstant { low, high, hold } => {
                check(low, "low")?;
                check(high, "high")?;
                if *hold == 0 {
                    return Err("hold must be positive".into());
                }
                if low.iter().zip(high).any(|(l, h)| !(l <= h)) {
                    return Err("low must not exceed high".into());
                }
                Ok(())
            }
        }
    }

    pub fn generate(&self, horizon: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        match self {
            InputSignal::None => vec![vec![]; horizon],
            InputSignal::Constant { value } => vec![value.clone(); horizon],
            InputSignal::Step { level, noise_std } => (0..horizon)
                .map(|_| {
                    level
                        .iter()
                        .zip(noise_std)
                        .map(|(l, s)| {
                            let n: f64 = rng.sample(StandardNormal);
                            l + s * n
                        })
                        .collect()
                })
                .collect(),
            InputSignal::PiecewiseConstant { low, high, hold } => {
                let mut current = low.clone();
                (0..horizon)
                    .map(|k| {
                        if k % hold == 0 {
                            current = low.iter().zip(high).map(|(&l, &h)| if l == h { l } else { rng.gen_range(l..h) }).collect();
                        }
                        current.clone()
                    })
                    .collect()
            }
        }
    }
}
