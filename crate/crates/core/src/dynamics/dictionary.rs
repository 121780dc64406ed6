//! Black-box compensator: a weighted sum of basis functions of `(x, u)`.

use serde::{Deserialize, Serialize};

use crate::adiff::Scalar;

use super::ModelError;

/// A single basis function evaluated on the normalized state `(x - offset) / scale`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Basis {
    Sigmoid(usize),
    Softplus(usize),
    Tanh(usize),
    Sin(usize),
    Cos(usize),
    Linear(usize),
    Square(usize),
    Cross(usize, usize),
    /// Raw input channel.
    Input(usize),
}

/// Ordered dictionary of basis functions.
///
/// The compensator output is `δ_i = output_scale_i · Σ_j ω[i, j] φ_j(x, u)`
/// with `ω` stored row-major (`n_x × terms.len()`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BasisDictionary {
    pub n_x: usize,
    pub terms: Vec<Basis>,
    pub offset: Vec<f64>,
    pub scale: Vec<f64>,
    pub output_scale: Vec<f64>,
}

impl BasisDictionary {
    /// `{sigmoid, softplus, tanh, sin, cos}` of every state, plus
    /// `{x_i, x_i², x_i x_j}` when `polynomial` is set. Identity normalization.
    pub fn standard(n_x: usize, polynomial: bool) -> Self {
        let mut terms = Vec::new();
        for i in 0..n_x {
            terms.extend([
                Basis::Sigmoid(i),
                Basis::Softplus(i),
                Basis::Tanh(i),
                Basis::Sin(i),
                Basis::Cos(i),
            ]);
        }
        if polynomial {
            for i in 0..n_x {
                terms.push(Basis::Linear(i));
                terms.push(Basis::Square(i));
            }
            for i in 0..n_x {
                for j in i + 1..n_x {
                    terms.push(Basis::Cross(i, j));
                }
            }
        }
        BasisDictionary {
            n_x,
            terms,
            offset: vec![0.0; n_x],
            scale: vec![1.0; n_x],
            output_scale: vec![1.0; n_x],
        }
    }

    pub fn with_normalization(mut self, offset: Vec<f64>, scale: Vec<f64>) -> Self {
        self.offset = offset;
        self.scale = scale;
        self
    }

    pub fn with_output_scale(mut self, output_scale: Vec<f64>) -> Self {
        self.output_scale = output_scale;
        self
    }

    pub fn n_terms(&self) -> usize {
        self.terms.len()
    }

    /// Length of the flattened weight matrix.
    pub fn n_weights(&self) -> usize {
        self.n_x * self.terms.len()
    }

    pub fn validate(&self, n_u: usize) -> Result<(), ModelError> {
        let bad = |m: String| Err(ModelError::BadDimension(m));
        if self.offset.len() != self.n_x || self.scale.len() != self.n_x || self.output_scale.len() != self.n_x {
            return bad("dictionary normalization vectors must have n_x entries".into());
        }
        if self.scale.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return bad("dictionary scales must be positive".into());
        }
        for t in &self.terms {
            let ok = match *t {
                Basis::Sigmoid(i)
                | Basis::Softplus(i)
                | Basis::Tanh(i)
                | Basis::Sin(i)
                | Basis::Cos(i)
                | Basis::Linear(i)
                | Basis::Square(i) => i < self.n_x,
                Basis::Cross(i, j) => i < self.n_x && j < self.n_x,
                Basis::Input(j) => j < n_u,
            };
            if !ok {
                return bad(format!("basis term {t:?} out of range"));
            }
        }
        Ok(())
    }

    /// Basis vector `φ(x, u)`.
    pub fn features<S: Scalar>(&self, x: &[S], u: &[f64]) -> Vec<S> {
        let z: Vec<S> = x
            .iter()
            .zip(self.offset.iter().zip(&self.scale))
            .map(|(&xi, (&o, &s))| if o == 0.0 && s == 1.0 { xi } else { (xi - o) * (1.0 / s) })
            .collect();
        self.terms
            .iter()
            .map(|t| match *t {
                Basis::Sigmoid(i) => z[i].sigmoid(),
                Basis::Softplus(i) => z[i].softplus(),
                Basis::Tanh(i) => z[i].tanh(),
                Basis::Sin(i) => z[i].sin(),
                Basis::Cos(i) => z[i].cos(),
                Basis::Linear(i) => z[i],
                Basis::Square(i) => z[i] * z[i],
                Basis::Cross(i, j) => z[i] * z[j],
                Basis::Input(j) => S::constant(u[j]),
            })
            .collect()
    }

    /// Compensator output `δ(x, u; ω)`.
    pub fn eval<S: Scalar>(&self, x: &[S], u: &[f64], weights: &[S]) -> Result<Vec<S>, ModelError> {
        if weights.len() != self.n_weights() || x.len() != self.n_x {
            return Err(ModelError::BadDimension(format!(
                "dictionary expects {} weights and {} states, got {} and {}",
                self.n_weights(),
                self.n_x,
                weights.len(),
                x.len()
            )));
        }
        let phi = self.features(x, u);
        let m = phi.len();
        Ok((0..self.n_x)
            .map(|i| {
                let row = &weights[i * m..(i + 1) * m];
                let mut acc: Option<S> = None;
                for (&w, &f) in row.iter().zip(&phi) {
                    if w.value() == 0.0 && !w.is_recorded() {
                        continue;
                    }
                    let term = w * f;
                    acc = Some(match acc {
                        Some(a) => a + term,
                        None => term,
                    });
                }
                match acc {
                    Some(a) => a * self.output_scale[i],
                    None => S::constant(0.0),
                }
            })
            .collect())
    }
}
