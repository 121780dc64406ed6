use std::ops::Range;

use serde::{Deserialize, Serialize};

/// Block sizes of a flattened decision vector `[θ, x0⁽¹⁾, …, x0⁽ᴹ⁾, ω]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Layout {
    pub n_theta: usize,
    pub n_x: usize,
    pub n_runs: usize,
    pub n_omega: usize,
}

impl Layout {
    pub fn len(&self) -> usize {
        self.n_theta + self.n_x * self.n_runs + self.n_omega
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn theta(&self) -> Range<usize> {
        0..self.n_theta
    }

    pub fn x0(&self, run: usize) -> Range<usize> {
        let lo = self.n_theta + run * self.n_x;
        lo..lo + self.n_x
    }

    pub fn omega(&self) -> Range<usize> {
        let lo = self.n_theta + self.n_x * self.n_runs;
        lo..lo + self.n_omega
    }
}

/// Parameters, per-run initial states and compensator weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionVector {
    pub theta: Vec<f64>,
    pub x0: Vec<Vec<f64>>,
    pub omega: Vec<f64>,
}

impl DecisionVector {
    pub fn layout(&self) -> Layout {
        Layout {
            n_theta: self.theta.len(),
            n_x: self.x0.first().map_or(0, Vec::len),
            n_runs: self.x0.len(),
            n_omega: self.omega.len(),
        }
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.layout().len());
        out.extend_from_slice(&self.theta);
        for x in &self.x0 {
            out.extend_from_slice(x);
        }
        out.extend_from_slice(&self.omega);
        out
    }

    pub fn unflatten(layout: Layout, flat: &[f64]) -> Option<Self> {
        if flat.len() != layout.len() {
            return None;
        }
        Some(DecisionVector {
            theta: flat[layout.theta()].to_vec(),
            x0: (0..layout.n_runs).map(|r| flat[layout.x0(r)].to_vec()).collect(),
            omega: flat[layout.omega()].to_vec(),
        })
    }
}

/// Per-entry scale: the optimizer works on `z = value / scale`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaling {
    pub theta: Vec<f64>,
    pub x0: Vec<f64>,
    pub omega: f64,
}

impl Scaling {
    pub fn unit(layout: Layout) -> Self {
        Scaling {
            theta: vec![1.0; layout.n_theta],
            x0: vec![1.0; layout.n_x],
            omega: 1.0,
        }
    }

    /// `θ` scaled by nominal magnitude and `x0` by a reference state; zeros map to 1.
    pub fn by_magnitude(nominal_theta: &[f64], x_ref: &[f64], omega: f64) -> Self {
        let mag = |v: &f64| if *v == 0.0 { 1.0 } else { v.abs() };
        Scaling {
            theta: nominal_theta.iter().map(mag).collect(),
            x0: x_ref.iter().map(mag).collect(),
            omega,
        }
    }

    pub fn flat(&self, layout: Layout) -> Vec<f64> {
        let mut out = self.theta.clone();
        for _ in 0..layout.n_runs {
            out.extend_from_slice(&self.x0);
        }
        out.extend(std::iter::repeat(self.omega).take(layout.n_omega));
        out
    }
}

/// Which entries the optimizer may move.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FreeBlocks {
    pub theta: bool,
    pub x0: bool,
    pub omega: bool,
}

impl Default for FreeBlocks {
    fn default() -> Self {
        FreeBlocks {
            theta: true,
            x0: true,
            omega: true,
        }
    }
}

impl FreeBlocks {
    pub fn mask(&self, layout: Layout) -> Vec<bool> {
        let mut m = vec![self.theta; layout.n_theta];
        m.extend(std::iter::repeat(self.x0).take(layout.n_x * layout.n_runs));
        m.extend(std::iter::repeat(self.omega).take(layout.n_omega));
        m
    }
}
