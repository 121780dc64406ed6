//! Model registry: linear companion-form benchmark, CSTR, Lotka-Volterra and
//! user-composed polynomial models.

use serde::{Deserialize, Serialize};

use crate::adiff::Scalar;

use super::{Dynamics, ModelError, Residual};

/// Physical constants of the stirred-tank reactor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CstrConstants {
    /// Process flow rate [l/min].
    pub q: f64,
    /// Reactor volume [l].
    pub volume: f64,
    /// Activation energy over gas constant [K].
    pub e_over_r: f64,
    /// Sampling time [min].
    pub dt: f64,
    /// Feed concentration [mol/l].
    pub c0: f64,
    /// Feed temperature [K].
    pub t0: f64,
    /// Inlet coolant temperature [K].
    pub tc0: f64,
    pub rho: f64,
    pub cp: f64,
    pub rho_c: f64,
    pub cp_c: f64,
    /// Reaction rate constant [1/min].
    pub k0: f64,
    /// Heat of reaction [cal/mol].
    pub delta_h: f64,
    /// Heat transfer term [cal/min/K].
    pub h_a: f64,
}

impl Default for CstrConstants {
    fn default() -> Self {
        CstrConstants {
            q: 100.0,
            volume: 100.0,
            e_over_r: 1e4,
            dt: 0.1,
            c0: 1.0,
            t0: 350.0,
            tc0: 350.0,
            rho: 1e3,
            cp: 1.0,
            rho_c: 1e3,
            cp_c: 1.0,
            k0: 7.2e10,
            delta_h: -2e5,
            h_a: 7e5,
        }
    }
}

impl CstrConstants {
    /// `[k0, (−ΔH)·k0/(ρ·Cp), hA]`, all positive for an exothermic reaction.
    pub fn nominal_theta(&self) -> Vec<f64> {
        vec![
            self.k0,
            -self.delta_h * self.k0 / (self.rho * self.cp),
            self.h_a,
        ]
    }
}

/// One monomial `coeff · θ[theta] · Π x[i]^p · Π u[j]^q`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolyTerm {
    pub coeff: f64,
    #[serde(default)]
    pub theta: Option<usize>,
    /// `(state index, power)` pairs.
    #[serde(default)]
    pub states: Vec<(usize, u32)>,
    /// `(input index, power)` pairs.
    #[serde(default)]
    pub inputs: Vec<(usize, u32)>,
}

impl PolyTerm {
    pub fn eval<S: Scalar>(&self, x: &[S], u: &[f64], theta: &[S]) -> S {
        let mut c = self.coeff;
        for &(j, p) in &self.inputs {
            c *= u[j].powi(p as i32);
        }
        let mut acc: Option<S> = self.theta.map(|j| theta[j] * c);
        for &(i, p) in &self.states {
            let f = if p == 1 { x[i] } else { x[i].powi(p as i32) };
            acc = Some(match acc {
                Some(a) => a * f,
                None => f * c,
            });
        }
        acc.unwrap_or_else(|| S::constant(c))
    }

    fn check(&self, n_x: usize, n_u: usize, n_theta: usize) -> Result<(), ModelError> {
        let bad = |what: &str| Err(ModelError::BadDimension(what.to_string()));
        if self.theta.is_some_and(|j| j >= n_theta) {
            return bad("polynomial term references a parameter out of range");
        }
        if self.states.iter().any(|&(i, _)| i >= n_x) {
            return bad("polynomial term references a state out of range");
        }
        if self.inputs.iter().any(|&(j, _)| j >= n_u) {
            return bad("polynomial term references an input out of range");
        }
        Ok(())
    }
}

fn eval_rows<S: Scalar>(rows: &[Vec<PolyTerm>], x: &[S], u: &[f64], theta: &[S]) -> Vec<S> {
    rows.iter()
        .map(|terms| {
            let vals: Vec<S> = terms.iter().map(|t| t.eval(x, u, theta)).collect();
            crate::adiff::sum(&vals)
        })
        .collect()
}

/// Polynomial dynamics declared as coefficient tables.
///
/// `state[i]` lists the terms of `x_{k+1}[i]` (the identity part included);
/// `output[j]` lists the terms of `z_k[j]` and may not reference inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolynomialModel {
    pub n_x: usize,
    pub n_u: usize,
    pub n_theta: usize,
    pub state: Vec<Vec<PolyTerm>>,
    pub output: Vec<Vec<PolyTerm>>,
}

impl PolynomialModel {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.state.len() != self.n_x {
            return Err(ModelError::BadDimension(format!(
                "polynomial model declares n_x = {} but {} state rows",
                self.n_x,
                self.state.len()
            )));
        }
        if self.output.is_empty() {
            return Err(ModelError::BadDimension("polynomial model has no outputs".into()));
        }
        for t in self.state.iter().flatten() {
            t.check(self.n_x, self.n_u, self.n_theta)?;
        }
        for t in self.output.iter().flatten() {
            t.check(self.n_x, 0, self.n_theta)?;
        }
        Ok(())
    }
}

/// Unmodeled dynamics of the data-generating system, as polynomial terms in
/// `(x, u)` added to the state update. Never visible to the estimator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Disturbance {
    pub terms: Vec<Vec<PolyTerm>>,
}

impl Disturbance {
    /// Intraspecific competition of the predator-prey benchmark:
    /// `Δ1 = μ·1e-4·x1²`, `Δ2 = -μ·5e-4·x2²`.
    pub fn lotka_volterra(mu: f64) -> Self {
        let sq = |i: usize, c: f64| PolyTerm {
            coeff: c,
            theta: None,
            states: vec![(i, 2)],
            inputs: vec![],
        };
        Disturbance {
            terms: vec![vec![sq(0, mu * 1e-4)], vec![sq(1, -mu * 5e-4)]],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum ModelKind {
    /// Second-order system in companion form, `θ = [b1, b2, a1, a2]` of
    /// `(b1 z + b2)/(z² + a1 z + a2)`.
    Linear2nd,
    Cstr(CstrConstants),
    LotkaVolterra,
    Polynomial(PolynomialModel),
}

/// Parametric dynamics `f`, output map `h` and optional truth disturbance `Δ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub nominal_theta: Vec<f64>,
    pub truth_disturbance: Option<Disturbance>,
}

/// Overrides accepted by [`registry_get`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelParams {
    pub theta: Option<Vec<f64>>,
    pub cstr: Option<CstrConstants>,
    /// Size of the predator-prey disturbance.
    pub mu: Option<f64>,
    pub polynomial: Option<PolynomialModel>,
    pub disturbance: Option<Disturbance>,
}

pub const LINEAR2ND_THETA: [f64; 4] = [0.1037, -0.08657, -1.78, 0.9];
pub const LOTKA_VOLTERRA_THETA: [f64; 4] = [0.13, 0.02, 0.12, 0.02];

/// Look up a model by id with its nominal constants as defaults.
pub fn registry_get(name: &str, params: &ModelParams) -> Result<ModelSpec, ModelError> {
    let (kind, nominal, disturbance) = match name {
        "linear2nd" => (ModelKind::Linear2nd, LINEAR2ND_THETA.to_vec(), None),
        "cstr" => {
            let c = params.cstr.unwrap_or_default();
            (ModelKind::Cstr(c), c.nominal_theta(), None)
        }
        "lotka_volterra" => (
            ModelKind::LotkaVolterra,
            LOTKA_VOLTERRA_THETA.to_vec(),
            Some(Disturbance::lotka_volterra(params.mu.unwrap_or(10.0))),
        ),
        "polynomial" => {
            let p = params.polynomial.clone().ok_or_else(|| {
                ModelError::BadDimension("polynomial model requires coefficient tables".into())
            })?;
            p.validate()?;
            let nominal = params.theta.clone().ok_or_else(|| {
                ModelError::BadDimension("polynomial model requires nominal theta".into())
            })?;
            (ModelKind::Polynomial(p), nominal, None)
        }
        other => return Err(ModelError::UnknownModel(other.to_string())),
    };
    let spec = ModelSpec {
        kind,
        nominal_theta: params.theta.clone().unwrap_or(nominal),
        truth_disturbance: params.disturbance.clone().or(disturbance),
    };
    if spec.nominal_theta.len() != spec.n_theta() {
        return Err(ModelError::BadDimension(format!(
            "model {name} expects {} parameters, got {}",
            spec.n_theta(),
            spec.nominal_theta.len()
        )));
    }
    if let Some(d) = &spec.truth_disturbance {
        if d.terms.len() != spec.n_x() {
            return Err(ModelError::BadDimension("disturbance rows must match n_x".into()));
        }
        for t in d.terms.iter().flatten() {
            t.check(spec.n_x(), spec.n_u(), 0)?;
        }
    }
    Ok(spec)
}

impl ModelSpec {
    pub fn name(&self) -> &'static str {
        match self.kind {
            ModelKind::Linear2nd => "linear2nd",
            ModelKind::Cstr(_) => "cstr",
            ModelKind::LotkaVolterra => "lotka_volterra",
            ModelKind::Polynomial(_) => "polynomial",
        }
    }

    /// Without the truth disturbance: the structure the estimator is allowed to see.
    pub fn estimation_view(&self) -> ModelSpec {
        ModelSpec {
            truth_disturbance: None,
            ..self.clone()
        }
    }

    /// Physics part `f(x, u; θ)` of the state update.
    pub fn physics<S: Scalar>(&self, x: &[S], u: &[f64], theta: &[S]) -> Result<Vec<S>, ModelError> {
        match &self.kind {
            ModelKind::Linear2nd => {
                let (a1, a2) = (theta[2], theta[3]);
                Ok(vec![-(a1 * x[0]) - a2 * x[1] + u[0], x[0]])
            }
            ModelKind::LotkaVolterra => {
                let (x1, x2) = (x[0], x[1]);
                let inter = x1 * x2;
                Ok(vec![
                    x1 + theta[0] * x1 - theta[1] * inter,
                    x2 - theta[2] * x2 + theta[3] * inter,
                ])
            }
            ModelKind::Cstr(c) => cstr_step(c, x, u[0], theta),
            ModelKind::Polynomial(p) => Ok(eval_rows(&p.state, x, u, theta)),
        }
    }

    fn check_dims<S>(&self, x: &[S], u: &[f64], theta: &[S]) -> Result<(), ModelError> {
        if x.len() != self.n_x() || u.len() < self.n_u() || theta.len() != self.n_theta() {
            return Err(ModelError::BadDimension(format!(
                "{}: got x[{}], u[{}], θ[{}]; expected x[{}], u[{}], θ[{}]",
                self.name(),
                x.len(),
                u.len(),
                theta.len(),
                self.n_x(),
                self.n_u(),
                self.n_theta()
            )));
        }
        Ok(())
    }
}

fn cstr_step<S: Scalar>(c: &CstrConstants, x: &[S], qc: f64, theta: &[S]) -> Result<Vec<S>, ModelError> {
    let (conc, temp) = (x[0], x[1]);
    if temp.value() <= 0.0 || temp.value().is_nan() {
        return Err(ModelError::domain("cstr temperature", temp.value()));
    }
    let (k0, heat, h_a) = (theta[0], theta[1], theta[2]);
    let flow = c.q / c.volume;
    let arrhenius = S::constant(-c.e_over_r).try_div(temp)?.exp();
    let reaction = conc * arrhenius;
    let conc_next = conc + ((S::constant(c.c0) - conc) * flow - k0 * reaction) * c.dt;

    let coolant_gain = c.rho_c * c.cp_c / (c.rho * c.cp * c.volume);
    let exponent = -(h_a.try_div_const(qc * c.rho * c.cp)?);
    let exchange = (S::constant(1.0) - exponent.exp()) * (qc * coolant_gain);
    let temp_next = temp
        + ((S::constant(c.t0) - temp) * flow + heat * reaction
            + exchange * (S::constant(c.tc0) - temp))
            * c.dt;
    Ok(vec![conc_next, temp_next])
}

impl Dynamics for ModelSpec {
    fn n_x(&self) -> usize {
        match &self.kind {
            ModelKind::Linear2nd | ModelKind::Cstr(_) | ModelKind::LotkaVolterra => 2,
            ModelKind::Polynomial(p) => p.n_x,
        }
    }

    fn n_u(&self) -> usize {
        match &self.kind {
            ModelKind::Linear2nd | ModelKind::Cstr(_) => 1,
            ModelKind::LotkaVolterra => 0,
            ModelKind::Polynomial(p) => p.n_u,
        }
    }

    fn n_z(&self) -> usize {
        match &self.kind {
            ModelKind::Linear2nd => 1,
            ModelKind::Cstr(_) | ModelKind::LotkaVolterra => 2,
            ModelKind::Polynomial(p) => p.output.len(),
        }
    }

    fn n_theta(&self) -> usize {
        match &self.kind {
            ModelKind::Linear2nd | ModelKind::LotkaVolterra => 4,
            ModelKind::Cstr(_) => 3,
            ModelKind::Polynomial(p) => p.n_theta,
        }
    }

    fn step<S: Scalar>(
        &self,
        x: &[S],
        u: &[f64],
        theta: &[S],
        residual: &Residual<'_, S>,
    ) -> Result<Vec<S>, ModelError> {
        self.check_dims(x, u, theta)?;
        let mut next = self.physics(x, u, theta)?;
        match residual {
            Residual::None => {}
            Residual::Truth => {
                if let Some(d) = &self.truth_disturbance {
                    for (n, delta) in next.iter_mut().zip(eval_rows(&d.terms, x, u, theta)) {
                        *n = *n + delta;
                    }
                }
            }
            Residual::Compensator { dictionary, weights } => {
                for (n, delta) in next.iter_mut().zip(dictionary.eval(x, u, weights)?) {
                    *n = *n + delta;
                }
            }
        }
        Ok(next)
    }

    fn output<S: Scalar>(&self, x: &[S], theta: &[S]) -> Vec<S> {
        match &self.kind {
            ModelKind::Linear2nd => vec![theta[0] * x[0] + theta[1] * x[1]],
            ModelKind::Cstr(_) | ModelKind::LotkaVolterra => x.to_vec(),
            ModelKind::Polynomial(p) => eval_rows(&p.output, x, &[], theta),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn linear2nd_companion_form() {
        let m = registry_get("linear2nd", &ModelParams::default()).unwrap();
        let th = m.nominal_theta.clone();
        assert_eq!(th, vec![0.1037, -0.08657, -1.78, 0.9]);
        // Columns of A from unit states, B from a unit input.
        let e1 = m.physics(&[1.0, 0.0], &[0.0], &th).unwrap();
        let e2 = m.physics(&[0.0, 1.0], &[0.0], &th).unwrap();
        let b = m.physics(&[0.0, 0.0], &[1.0], &th).unwrap();
        assert_eq!(e1, vec![1.78, 1.0]);
        assert_eq!(e2, vec![-0.9, 0.0]);
        assert_eq!(b, vec![1.0, 0.0]);
        assert_eq!(m.output(&[1.0, 0.0], &th), vec![0.1037]);
        assert_eq!(m.output(&[0.0, 1.0], &th), vec![-0.08657]);
    }

    #[test]
    fn cstr_defaults() {
        let m = registry_get("cstr", &ModelParams::default()).unwrap();
        let ModelKind::Cstr(c) = m.kind else { panic!() };
        assert_eq!((c.q, c.volume, c.e_over_r, c.dt, c.c0, c.t0, c.tc0), (100.0, 100.0, 1e4, 0.1, 1.0, 350.0, 350.0));
        assert_eq!(m.nominal_theta, vec![7.2e10, 1.44e13, 7e5]);
    }

    #[test]
    fn cstr_concentration_update() {
        let m = registry_get("cstr", &ModelParams::default()).unwrap();
        let next = m.step(&[0.1, 440.0], &[100.0], &m.nominal_theta, &Residual::None).unwrap();
        // 0.0929482519... from a 50-digit evaluation of the same update.
        assert!(close(next[0], 0.092_948_251_913, 1e-10), "{}", next[0]);
        assert!(close(next[0], 0.093, 0.001));
        // Exothermic reaction heats the reactor at this operating point.
        assert!(next[1] > 440.0);
    }

    #[test]
    fn cstr_domain() {
        let m = registry_get("cstr", &ModelParams::default()).unwrap();
        let th = m.nominal_theta.clone();
        assert!(matches!(m.step(&[0.1, 0.0], &[100.0], &th, &Residual::None), Err(ModelError::Domain { .. })));
        assert!(matches!(m.step(&[0.1, 440.0], &[0.0], &th, &Residual::None), Err(ModelError::Domain { .. })));
    }

    #[test]
    fn lotka_volterra_truth_step() {
        let m = registry_get("lotka_volterra", &ModelParams::default()).unwrap();
        assert_eq!(m.nominal_theta, vec![0.13, 0.02, 0.12, 0.02]);
        let next = m.step(&[2.0, 3.0], &[], &m.nominal_theta, &Residual::Truth).unwrap();
        assert!(close(next[0], 2.144, 1e-12), "{next:?}");
        assert!(close(next[1], 2.715, 1e-12), "{next:?}");
        let plain = m.step(&[2.0, 3.0], &[], &m.nominal_theta, &Residual::None).unwrap();
        assert!(close(plain[0], 2.14, 1e-12) && close(plain[1], 2.76, 1e-12));
    }

    #[test]
    fn registry_errors() {
        assert!(matches!(registry_get("pendulum", &ModelParams::default()), Err(ModelError::UnknownModel(_))));
        let bad = ModelParams {
            theta: Some(vec![1.0]),
            ..Default::default()
        };
        assert!(matches!(registry_get("linear2nd", &bad), Err(ModelError::BadDimension(_))));
        assert!(matches!(registry_get("polynomial", &ModelParams::default()), Err(ModelError::BadDimension(_))));
    }

    #[test]
    fn composed_polynomial_model() {
        // x' = θ0 x + u, z = 2 x²
        let poly = PolynomialModel {
            n_x: 1,
            n_u: 1,
            n_theta: 1,
            state: vec![vec![
                PolyTerm { coeff: 1.0, theta: Some(0), states: vec![(0, 1)], inputs: vec![] },
                PolyTerm { coeff: 1.0, theta: None, states: vec![], inputs: vec![(0, 1)] },
            ]],
            output: vec![vec![PolyTerm { coeff: 2.0, theta: None, states: vec![(0, 2)], inputs: vec![] }]],
        };
        let params = ModelParams {
            theta: Some(vec![0.5]),
            polynomial: Some(poly.clone()),
            ..Default::default()
        };
        let m = registry_get("polynomial", &params).unwrap();
        assert_eq!(m.step(&[2.0], &[3.0], &[0.5], &Residual::None).unwrap(), vec![4.0]);
        assert_eq!(m.output(&[3.0], &[0.5]), vec![18.0]);

        let mut broken = poly;
        broken.state[0][0].states = vec![(4, 1)];
        let params = ModelParams {
            theta: Some(vec![0.5]),
            polynomial: Some(broken),
            ..Default::default()
        };
        assert!(matches!(registry_get("polynomial", &params), Err(ModelError::BadDimension(_))));
    }
}
