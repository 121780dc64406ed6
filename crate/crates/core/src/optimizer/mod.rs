//! First-order minimization over `(θ, x0 per run, ω)`.

mod decision;
mod init;

pub use decision::{DecisionVector, FreeBlocks, Layout, Scaling};
pub use init::{init_ball, init_gaussian, init_gaussian_positive};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adiff::{Scalar, Tape, Var};
use crate::cost::{CostError, DecisionView, Objective};
use crate::dynamics::ModelError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FitError {
    #[error("iteration {iteration}: {source}")]
    Domain { iteration: usize, source: ModelError },
    #[error("iteration {iteration}: objective is not finite")]
    NonFiniteObjective { iteration: usize },
    #[error(transparent)]
    Cost(CostError),
    #[error("bad initial point: {0}")]
    BadInit(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    GdMomentum,
    AdaptiveMoments,
}

/// Learning-rate multipliers per decision block.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BlockRates {
    pub theta: f64,
    pub x0: f64,
    pub omega: f64,
}

impl Default for BlockRates {
    fn default() -> Self {
        BlockRates {
            theta: 1.0,
            x0: 1.0,
            omega: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Hyper {
    pub method: Method,
    pub learning_rate: f64,
    /// Learning rate decays geometrically to `learning_rate · final_lr_fraction`.
    pub final_lr_fraction: f64,
    pub max_iters: usize,
    pub grad_tol: f64,
    pub stall_window: usize,
    pub stall_tol: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub momentum: f64,
    pub max_backtracks: usize,
    /// Treat an objective increase like a failed trial point and halve the step.
    pub monotone: bool,
    pub block_rates: BlockRates,
}

impl Default for Hyper {
    fn default() -> Self {
        Hyper {
            method: Method::AdaptiveMoments,
            learning_rate: 1e-2,
            final_lr_fraction: 1.0,
            max_iters: 5000,
            grad_tol: 1e-7,
            stall_window: 200,
            stall_tol: 1e-10,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            momentum: 0.9,
            max_backtracks: 10,
            monotone: false,
            block_rates: BlockRates::default(),
        }
    }
}

impl Hyper {
    pub fn validate(&self) -> Result<(), String> {
        let positive = [self.learning_rate, self.eps, self.final_lr_fraction];
        if positive.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err("learning_rate, final_lr_fraction and eps must be positive".into());
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || !(0.0..1.0).contains(&self.momentum)
        {
            return Err("beta1, beta2 and momentum must lie in [0, 1)".into());
        }
        let r = self.block_rates;
        if [r.theta, r.x0, r.omega].iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err("block rates must be >= 0".into());
        }
        if self.grad_tol < 0.0 || self.stall_tol < 0.0 {
            return Err("tolerances must be >= 0".into());
        }
        Ok(())
    }

    fn lr_at(&self, iteration: usize) -> f64 {
        if self.final_lr_fraction == 1.0 || self.max_iters <= 1 {
            return self.learning_rate;
        }
        let t = (iteration - 1) as f64 / (self.max_iters - 1) as f64;
        self.learning_rate * self.final_lr_fraction.powf(t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    MaxIterations,
    GradientTolerance,
    Stall,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub decision: DecisionVector,
    pub objective: f64,
    pub trace: Vec<f64>,
    pub iterations: usize,
    pub termination: Termination,
    pub backtracks: usize,
    pub hyper: Hyper,
    pub seed: u64,
    pub config_hash: String,
}

impl FitResult {
    pub fn with_provenance(mut self, seed: u64, config_hash: &str) -> Self {
        self.seed = seed;
        self.config_hash = config_hash.to_string();
        self
    }
}

/// Split a flat physical vector into objective blocks.
pub fn view<S: Copy>(layout: Layout, flat: &[S]) -> DecisionView<S> {
    DecisionView {
        theta: flat[layout.theta()].to_vec(),
        x0: (0..layout.n_runs).map(|r| flat[layout.x0(r)].to_vec()).collect(),
        omega: flat[layout.omega()].to_vec(),
    }
}

/// Objective value at a decision vector, in plain arithmetic.
pub fn objective_value<O: Objective>(objective: &O, dv: &DecisionVector) -> Result<f64, CostError> {
    objective.evaluate(&view(dv.layout(), &dv.flatten()))
}

/// Objective value and gradient with respect to the flat physical decision vector.
pub fn value_and_gradient<O: Objective>(objective: &O, dv: &DecisionVector) -> Result<(f64, Vec<f64>), CostError> {
    let layout = dv.layout();
    let free = vec![true; layout.len()];
    let scale = vec![1.0; layout.len()];
    let mut cap = 0;
    evaluate_taped(objective, layout, &dv.flatten(), &scale, &free, &mut cap)
}

fn evaluate_taped<O: Objective>(
    objective: &O,
    layout: Layout,
    z: &[f64],
    scale: &[f64],
    free: &[bool],
    capacity: &mut usize,
) -> Result<(f64, Vec<f64>), CostError> {
    let tape = Tape::with_capacity(*capacity);
    let leaves: Vec<Var<'_>> = z
        .iter()
        .zip(free)
        .map(|(&v, &f)| if f { tape.var(v) } else { Var::constant(v) })
        .collect();
    let phys: Vec<Var<'_>> = leaves
        .iter()
        .zip(scale)
        .map(|(&v, &s)| if s == 1.0 { v } else { v * s })
        .collect();
    let root = objective.evaluate(&view(layout, &phys))?;
    *capacity = (*capacity).max(tape.len());
    let grad = tape
        .gradient(root, &leaves)
        .map_err(|e| CostError::Model(ModelError::from(e)))?;
    Ok((root.value(), grad))
}

/// Minimize `objective` from `init`. `scaling` maps optimizer coordinates to
/// physical values; entries not in `free` stay at their initial values.
pub fn minimize<O: Objective>(
    objective: &O,
    init: &DecisionVector,
    scaling: &Scaling,
    free: FreeBlocks,
    hyper: &Hyper,
) -> Result<FitResult, FitError> {
    hyper.validate().map_err(FitError::BadInit)?;
    let layout = init.layout();
    let scale = scaling.flat(layout);
    if scale.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
        return Err(FitError::BadInit("scales must be positive".into()));
    }
    let mask = free.mask(layout);
    let rates: Vec<f64> = {
        let r = hyper.block_rates;
        let mut v = vec![r.theta; layout.n_theta];
        v.extend(std::iter::repeat(r.x0).take(layout.n_x * layout.n_runs));
        v.extend(std::iter::repeat(r.omega).take(layout.n_omega));
        v
    };
    let mut z: Vec<f64> = init.flatten().iter().zip(&scale).map(|(v, s)| v / s).collect();
    let mut cap = 0usize;

    let classify = |e: CostError, iteration: usize| match e {
        CostError::Model(m @ ModelError::Domain { .. }) => FitError::Domain { iteration, source: m },
        other => FitError::Cost(other),
    };
    let (mut f, mut g) = evaluate_taped(objective, layout, &z, &scale, &mask, &mut cap).map_err(|e| classify(e, 0))?;
    if !f.is_finite() || g.iter().any(|v| !v.is_finite()) {
        return Err(FitError::NonFiniteObjective { iteration: 0 });
    }

    let n = z.len();
    let mut m1 = vec![0.0; n];
    let mut m2 = vec![0.0; n];
    let mut trace = vec![f];
    let mut backtracks = 0usize;
    let mut termination = Termination::MaxIterations;
    let mut iterations = 0usize;
    let mut restarted = false;
    let mut moment_age = 0i32;

    for it in 1..=hyper.max_iters {
        moment_age += 1;
        let gnorm = g.iter().zip(&mask).filter(|(_, &f)| f).map(|(v, _)| v * v).sum::<f64>().sqrt();
        if gnorm <= hyper.grad_tol {
            termination = Termination::GradientTolerance;
            break;
        }
        let lr = hyper.lr_at(it);
        let mut step = vec![0.0; n];
        match hyper.method {
            Method::AdaptiveMoments => {
                let c1 = 1.0 - hyper.beta1.powi(moment_age);
                let c2 = 1.0 - hyper.beta2.powi(moment_age);
                for i in 0..n {
                    if !mask[i] {
                        continue;
                    }
                    m1[i] = hyper.beta1 * m1[i] + (1.0 - hyper.beta1) * g[i];
                    m2[i] = hyper.beta2 * m2[i] + (1.0 - hyper.beta2) * g[i] * g[i];
                    step[i] = lr * rates[i] * (m1[i] / c1) / ((m2[i] / c2).sqrt() + hyper.eps);
                }
            }
            Method::GdMomentum => {
                for i in 0..n {
                    if !mask[i] {
                        continue;
                    }
                    m1[i] = hyper.momentum * m1[i] + g[i];
                    step[i] = lr * rates[i] * m1[i];
                }
            }
        }

        let mut alpha = 1.0;
        let mut tries = 0usize;
        let accepted = loop {
            let cand: Vec<f64> = z.iter().zip(&step).map(|(zi, si)| zi - alpha * si).collect();
            let failure = match evaluate_taped(objective, layout, &cand, &scale, &mask, &mut cap) {
                Ok((fc, gc)) if fc.is_finite() && gc.iter().all(|v| v.is_finite()) => {
                    if !hyper.monotone || fc <= f {
                        break Some((cand, fc, gc));
                    }
                    None
                }
                Ok(_) => Some(FitError::NonFiniteObjective { iteration: it }),
                Err(e) => match classify(e, it) {
                    d @ FitError::Domain { .. } => Some(d),
                    other => return Err(other),
                },
            };
            tries += 1;
            if tries > hyper.max_backtracks {
                match failure {
                    Some(err) => return Err(err),
                    None => break None,
                }
            }
            alpha *= 0.5;
        };
        let Some((cand, fc, gc)) = accepted else {
            // No decrease along the momentum direction: restart the moments once.
            backtracks += tries;
            if restarted {
                termination = Termination::Stall;
                break;
            }
            restarted = true;
            m1.iter_mut().for_each(|v| *v = 0.0);
            m2.iter_mut().for_each(|v| *v = 0.0);
            moment_age = 0;
            continue;
        };
        restarted = false;
        backtracks += tries;
        z = cand;
        f = fc;
        g = gc;
        trace.push(f);
        iterations = it;

        let w = hyper.stall_window;
        if w > 0 && trace.len() > w {
            let past = trace[trace.len() - 1 - w];
            if past - f <= hyper.stall_tol * past.abs() {
                termination = Termination::Stall;
                break;
            }
        }
    }

    let phys: Vec<f64> = z.iter().zip(&scale).map(|(v, s)| v * s).collect();
    let decision = DecisionVector::unflatten(layout, &phys).expect("layout preserved");
    Ok(FitResult {
        decision,
        objective: f,
        trace,
        iterations,
        termination,
        backtracks,
        hyper: hyper.clone(),
        seed: 0,
        config_hash: String::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Bowl(Vec<f64>);

    impl Objective for Bowl {
        fn evaluate<S: Scalar>(&self, v: &DecisionView<S>) -> Result<S, CostError> {
            let mut acc = S::constant(0.0);
            for (&t, &c) in v.theta.iter().zip(&self.0) {
                let e = t - c;
                acc = acc + e * e;
            }
            Ok(acc)
        }
    }

    struct Log;

    impl Objective for Log {
        fn evaluate<S: Scalar>(&self, v: &DecisionView<S>) -> Result<S, CostError> {
            let l = v.theta[0].try_ln().map_err(ModelError::from)?;
            Ok((l - 1.0) * (l - 1.0))
        }
    }

    fn start(theta: Vec<f64>) -> DecisionVector {
        DecisionVector {
            theta,
            x0: vec![],
            omega: vec![],
        }
    }

    #[test]
    fn bowl_converges() {
        let target = vec![1.5, -2.0, 0.25];
        for method in [Method::AdaptiveMoments, Method::GdMomentum] {
            let hyper = Hyper {
                method,
                learning_rate: 0.05,
                max_iters: 20_000,
                grad_tol: 1e-9,
                final_lr_fraction: 1e-3,
                ..Default::default()
            };
            let init = start(vec![0.0, 0.0, 0.0]);
            let r = minimize(&Bowl(target.clone()), &init, &Scaling::unit(init.layout()), FreeBlocks::default(), &hyper)
                .unwrap();
            for (a, b) in r.decision.theta.iter().zip(&target) {
                assert!((a - b).abs() < 1e-6, "{method:?}: {a} vs {b}");
            }
            assert_eq!(*r.trace.last().unwrap(), r.objective);
        }
    }

    #[test]
    fn frozen_blocks_do_not_move() {
        let init = DecisionVector {
            theta: vec![0.0],
            x0: vec![vec![3.0]],
            omega: vec![],
        };
        let r = minimize(
            &Bowl(vec![1.0]),
            &init,
            &Scaling::unit(init.layout()),
            FreeBlocks {
                theta: false,
                ..Default::default()
            },
            &Hyper::default(),
        )
        .unwrap();
        assert_eq!(r.decision, init);
        assert_eq!(r.termination, Termination::GradientTolerance);
    }

    #[test]
    fn domain_violations_backtrack() {
        let hyper = Hyper {
            method: Method::GdMomentum,
            learning_rate: 100.0,
            momentum: 0.0,
            max_iters: 50,
            ..Default::default()
        };
        let init = start(vec![5.0]);
        let r = minimize(&Log, &init, &Scaling::unit(init.layout()), FreeBlocks::default(), &hyper).unwrap();
        assert!(r.backtracks > 0);
        assert!(r.decision.theta[0] > 0.0);

        let bad = start(vec![-1.0]);
        assert!(matches!(
            minimize(&Log, &bad, &Scaling::unit(bad.layout()), FreeBlocks::default(), &hyper),
            Err(FitError::Domain { iteration: 0, .. })
        ));
    }

    #[test]
    fn monotone_never_increases() {
        let hyper = Hyper {
            method: Method::GdMomentum,
            learning_rate: 1.5,
            momentum: 0.0,
            max_iters: 200,
            monotone: true,
            ..Default::default()
        };
        let init = start(vec![4.0]);
        let r = minimize(&Bowl(vec![1.0]), &init, &Scaling::unit(init.layout()), FreeBlocks::default(), &hyper).unwrap();
        assert!(r.trace.windows(2).all(|w| w[1] <= w[0]));
        assert!(r.backtracks > 0);
        assert!((r.decision.theta[0] - 1.0).abs() < 1e-6);

        let plain = Hyper {
            monotone: false,
            max_iters: 20,
            ..hyper
        };
        let r = minimize(&Bowl(vec![1.0]), &init, &Scaling::unit(init.layout()), FreeBlocks::default(), &plain).unwrap();
        assert!(r.objective > 9.0);
    }

    #[test]
    fn deterministic() {
        let init = start(vec![0.3, 0.1, 9.0]);
        let run = || {
            minimize(&Bowl(vec![1.0, 2.0, 3.0]), &init, &Scaling::unit(init.layout()), FreeBlocks::default(), &Hyper::default())
                .unwrap()
        };
        assert_eq!(run(), run());
    }
}
