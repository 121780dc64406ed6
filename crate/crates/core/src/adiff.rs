//! Tape-based reverse-mode automatic differentiation.
//!
//! Every arithmetic operation on a [`Var`] appends one node to its [`Tape`],
//! storing the opcode, operand indices and the local partial derivatives.
//! A single reverse sweep then yields the derivative of a scalar root with
//! respect to every leaf.
//!
//! Model code is written once against the [`Scalar`] trait and runs either on
//! plain `f64` (simulation, finite differences) or on taped [`Var`]s
//! (gradients). Both paths share the same elementary kernels, so forward
//! values agree bit-for-bit.
//!
//! ```
//! use nusid::adiff::{Scalar, Tape};
//!
//! let tape = Tape::new();
//! let x = tape.var(3.0);
//! let y = x * x;
//! let grad = tape.gradient(y, &[x]).unwrap();
//! assert_eq!(y.value(), 9.0);
//! assert_eq!(grad, vec![6.0]);
//! ```

use std::cell::RefCell;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AdError {
    #[error("domain error in {op}: argument {value}")]
    Domain { op: &'static str, value: f64 },
    #[error("variables belong to different tapes")]
    TapeMismatch,
}

/// Elementary operation recorded on a tape.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Op {
    Leaf,
    Add,
    Sub,
    Mul,
    Div,
    Pow,
    Neg,
    AddConst,
    /// `k - a`
    SubFromConst,
    MulConst,
    /// `a / k`
    DivByConst,
    /// `k / a`
    ConstDiv,
    PowConst,
    Powi,
    Exp,
    Ln,
    Sqrt,
    Sin,
    Cos,
    Tanh,
    Sigmoid,
    Softplus,
}

const NO_NODE: u32 = u32::MAX;

#[derive(Debug, Clone, Copy)]
struct Node {
    op: Op,
    a: u32,
    b: u32,
    k: f64,
    da: f64,
    db: f64,
    value: f64,
}

/// Numerically stable logistic function.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^x)` without overflow for large `|x|`.
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

// Forward value of a unary/binary op. The single source of truth for both the
// f64 path and the taped path.
fn forward(op: Op, a: f64, b: f64, k: f64) -> f64 {
    match op {
        Op::Leaf => a,
        Op::Add => a + b,
        Op::Sub => a - b,
        Op::Mul => a * b,
        Op::Div => a / b,
        Op::Pow => a.powf(b),
        Op::Neg => -a,
        Op::AddConst => a + k,
        Op::SubFromConst => k - a,
        Op::MulConst => a * k,
        Op::DivByConst => a / k,
        Op::ConstDiv => k / a,
        Op::PowConst => a.powf(k),
        Op::Powi => a.powi(k as i32),
        Op::Exp => a.exp(),
        Op::Ln => a.ln(),
        Op::Sqrt => a.sqrt(),
        Op::Sin => a.sin(),
        Op::Cos => a.cos(),
        Op::Tanh => a.tanh(),
        Op::Sigmoid => sigmoid(a),
        Op::Softplus => softplus(a),
    }
}

// Local partials (d/da, d/db) given operands and the already computed value.
fn partials(op: Op, a: f64, b: f64, k: f64, v: f64) -> (f64, f64) {
    match op {
        Op::Leaf => (0.0, 0.0),
        Op::Add => (1.0, 1.0),
        Op::Sub => (1.0, -1.0),
        Op::Mul => (b, a),
        Op::Div => (1.0 / b, -a / (b * b)),
        Op::Pow => (b * a.powf(b - 1.0), v * a.ln()),
        Op::Neg => (-1.0, 0.0),
        Op::AddConst => (1.0, 0.0),
        Op::SubFromConst => (-1.0, 0.0),
        Op::MulConst => (k, 0.0),
        Op::DivByConst => (1.0 / k, 0.0),
        Op::ConstDiv => (-k / (a * a), 0.0),
        Op::PowConst => (k * a.powf(k - 1.0), 0.0),
        Op::Powi => {
            let n = k as i32;
            if n == 0 {
                (0.0, 0.0)
            } else {
                (k * a.powi(n - 1), 0.0)
            }
        }
        Op::Exp => (v, 0.0),
        Op::Ln => (1.0 / a, 0.0),
        Op::Sqrt => (0.5 / v, 0.0),
        Op::Sin => (a.cos(), 0.0),
        Op::Cos => (-a.sin(), 0.0),
        Op::Tanh => (1.0 - v * v, 0.0),
        Op::Sigmoid => (v * (1.0 - v), 0.0),
        Op::Softplus => (sigmoid(a), 0.0),
    }
}

fn check_domain(op: Op, a: f64, b: f64, k: f64) -> Result<(), AdError> {
    let bad = |name, value| Err(AdError::Domain { op: name, value });
    match op {
        Op::Ln if a <= 0.0 || a.is_nan() => bad("ln", a),
        Op::Sqrt if a <= 0.0 || a.is_nan() => bad("sqrt", a),
        Op::Div if b == 0.0 => bad("div", b),
        Op::DivByConst if k == 0.0 => bad("div", k),
        Op::ConstDiv if a == 0.0 => bad("div", a),
        Op::Pow if a <= 0.0 => bad("pow", a),
        Op::PowConst if a <= 0.0 && !(k.fract() == 0.0 && k >= 0.0) => bad("pow", a),
        _ => Ok(()),
    }
}

/// Append-only record of elementary operations.
///
/// Nodes are stored in evaluation order, so every operand index precedes the
/// node that uses it.
#[derive(Default)]
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
}

impl fmt::Debug for Tape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Tape").field("len", &self.len()).finish()
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity(n: usize) -> Self {
        Tape {
            nodes: RefCell::new(Vec::with_capacity(n)),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// New independent variable (a leaf).
    pub fn var(&self, value: f64) -> Var<'_> {
        let index = self.push(Node {
            op: Op::Leaf,
            a: NO_NODE,
            b: NO_NODE,
            k: 0.0,
            da: 0.0,
            db: 0.0,
            value,
        });
        Var {
            tape: Some(self),
            index,
            value,
        }
    }

    /// Constant bound to this tape. Constants are never recorded and carry no adjoint.
    pub fn lift(&self, value: f64) -> Var<'_> {
        Var {
            tape: Some(self),
            index: NO_NODE,
            value,
        }
    }

    fn push(&self, node: Node) -> u32 {
        let mut nodes = self.nodes.borrow_mut();
        let i = nodes.len();
        assert!(i < NO_NODE as usize, "tape overflow");
        nodes.push(node);
        i as u32
    }

    fn owns(&self, v: &Var<'_>) -> bool {
        v.tape.is_some_and(|t| std::ptr::eq(t, self))
    }

    /// Reverse sweep from `root`; adjoints of every recorded node.
    pub fn backward(&self, root: Var<'_>) -> Result<Gradients<'_>, AdError> {
        if root.tape.is_some() && !self.owns(&root) {
            return Err(AdError::TapeMismatch);
        }
        let nodes = self.nodes.borrow();
        let mut adjoint = vec![0.0; nodes.len()];
        if root.index != NO_NODE {
            let r = root.index as usize;
            adjoint[r] = 1.0;
            for i in (0..=r).rev() {
                let g = adjoint[i];
                if g == 0.0 {
                    continue;
                }
                let n = &nodes[i];
                if n.a != NO_NODE {
                    adjoint[n.a as usize] += g * n.da;
                }
                if n.b != NO_NODE {
                    adjoint[n.b as usize] += g * n.db;
                }
            }
        }
        Ok(Gradients {
            tape: self,
            adjoint,
        })
    }

    /// Derivatives of `root` with respect to each entry of `wrt`.
    ///
    /// Constants in `wrt` get a zero derivative; variables from another tape
    /// are rejected.
    pub fn gradient(&self, root: Var<'_>, wrt: &[Var<'_>]) -> Result<Vec<f64>, AdError> {
        if wrt.iter().any(|v| v.tape.is_some() && !self.owns(v)) {
            return Err(AdError::TapeMismatch);
        }
        let grads = self.backward(root)?;
        Ok(wrt.iter().map(|v| grads.get(v).unwrap_or(0.0)).collect())
    }

    /// Stored forward value of every node.
    pub fn values(&self) -> Vec<f64> {
        self.nodes.borrow().iter().map(|n| n.value).collect()
    }

    /// Recompute every node value from the leaves using the recorded opcodes.
    pub fn replay(&self) -> Vec<f64> {
        let nodes = self.nodes.borrow();
        let mut out: Vec<f64> = Vec::with_capacity(nodes.len());
        for n in nodes.iter() {
            let v = match n.op {
                Op::Leaf => n.value,
                op => {
                    let a = out[n.a as usize];
                    let b = if n.b == NO_NODE { 0.0 } else { out[n.b as usize] };
                    forward(op, a, b, n.k)
                }
            };
            out.push(v);
        }
        out
    }

    /// Opcodes in recording order.
    pub fn ops(&self) -> Vec<Op> {
        self.nodes.borrow().iter().map(|n| n.op).collect()
    }

    /// True when every operand index precedes the node that uses it.
    pub fn is_topologically_ordered(&self) -> bool {
        self.nodes.borrow().iter().enumerate().all(|(i, n)| {
            (n.a == NO_NODE || (n.a as usize) < i) && (n.b == NO_NODE || (n.b as usize) < i)
        })
    }

    /// Drop every node, keeping the allocation.
    pub fn clear(&mut self) {
        self.nodes.get_mut().clear();
    }
}

/// Result of a reverse sweep.
pub struct Gradients<'t> {
    tape: &'t Tape,
    adjoint: Vec<f64>,
}

impl Gradients<'_> {
    /// Adjoint of `v`; `None` for constants and variables of other tapes.
    pub fn get(&self, v: &Var<'_>) -> Option<f64> {
        if v.index == NO_NODE || !self.tape.owns(v) {
            return None;
        }
        Some(self.adjoint[v.index as usize])
    }
}

/// Scalar handle into a [`Tape`], or a free-standing constant.
#[derive(Clone, Copy)]
pub struct Var<'t> {
    tape: Option<&'t Tape>,
    index: u32,
    value: f64,
}

impl fmt::Debug for Var<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.index == NO_NODE {
            write!(f, "Var(const {})", self.value)
        } else {
            write!(f, "Var(#{} = {})", self.index, self.value)
        }
    }
}

impl<'t> Var<'t> {
    pub fn constant(value: f64) -> Self {
        Var {
            tape: None,
            index: NO_NODE,
            value,
        }
    }

    pub fn is_constant(&self) -> bool {
        self.index == NO_NODE
    }

    pub fn index(&self) -> Option<usize> {
        (self.index != NO_NODE).then_some(self.index as usize)
    }

    fn unary(self, op: Op, k: f64) -> Result<Self, AdError> {
        check_domain(op, self.value, 0.0, k)?;
        let value = forward(op, self.value, 0.0, k);
        if self.index == NO_NODE {
            return Ok(Var { value, ..self });
        }
        let (da, _) = partials(op, self.value, 0.0, k, value);
        let tape = self.tape.expect("recorded var without tape");
        let index = tape.push(Node {
            op,
            a: self.index,
            b: NO_NODE,
            k,
            da,
            db: 0.0,
            value,
        });
        Ok(Var {
            tape: Some(tape),
            index,
            value,
        })
    }

    // A constant operand collapses the op to its single-operand form.
    fn binary(self, rhs: Self, op: Op) -> Result<Self, AdError> {
        let tape = match (self.tape, rhs.tape) {
            (Some(a), Some(b)) if !std::ptr::eq(a, b) => panic!("{}", AdError::TapeMismatch),
            (Some(a), _) => Some(a),
            (None, b) => b,
        };
        match (self.index == NO_NODE, rhs.index == NO_NODE) {
            (false, false) => {
                check_domain(op, self.value, rhs.value, 0.0)?;
                let value = forward(op, self.value, rhs.value, 0.0);
                let (da, db) = partials(op, self.value, rhs.value, 0.0, value);
                let tape = tape.expect("recorded var without tape");
                let index = tape.push(Node {
                    op,
                    a: self.index,
                    b: rhs.index,
                    k: 0.0,
                    da,
                    db,
                    value,
                });
                Ok(Var {
                    tape: Some(tape),
                    index,
                    value,
                })
            }
            (false, true) => {
                let cop = match op {
                    Op::Add => Op::AddConst,
                    Op::Sub => return self.unary(Op::AddConst, -rhs.value),
                    Op::Mul => Op::MulConst,
                    Op::Div => Op::DivByConst,
                    Op::Pow => Op::PowConst,
                    _ => unreachable!(),
                };
                self.unary(cop, rhs.value)
            }
            (true, false) => match op {
                Op::Add => rhs.unary(Op::AddConst, self.value),
                Op::Sub => rhs.unary(Op::SubFromConst, self.value),
                Op::Mul => rhs.unary(Op::MulConst, self.value),
                Op::Div => rhs.unary(Op::ConstDiv, self.value),
                Op::Pow => {
                    // k^b = exp(b ln k)
                    if self.value <= 0.0 {
                        return Err(AdError::Domain {
                            op: "pow",
                            value: self.value,
                        });
                    }
                    rhs.unary(Op::MulConst, self.value.ln())?.unary(Op::Exp, 0.0)
                }
                _ => unreachable!(),
            },
            (true, true) => {
                check_domain(op, self.value, rhs.value, 0.0)?;
                Ok(Var {
                    tape,
                    index: NO_NODE,
                    value: forward(op, self.value, rhs.value, 0.0),
                })
            }
        }
    }
}

impl<'t> Add for Var<'t> {
    type Output = Var<'t>;
    fn add(self, rhs: Self) -> Self {
        self.binary(rhs, Op::Add).expect("add is total")
    }
}

impl<'t> Sub for Var<'t> {
    type Output = Var<'t>;
    fn sub(self, rhs: Self) -> Self {
        self.binary(rhs, Op::Sub).expect("sub is total")
    }
}

impl<'t> Mul for Var<'t> {
    type Output = Var<'t>;
    fn mul(self, rhs: Self) -> Self {
        self.binary(rhs, Op::Mul).expect("mul is total")
    }
}

impl<'t> Neg for Var<'t> {
    type Output = Var<'t>;
    fn neg(self) -> Self {
        self.unary(Op::Neg, 0.0).expect("neg is total")
    }
}

impl<'t> Add<f64> for Var<'t> {
    type Output = Var<'t>;
    fn add(self, rhs: f64) -> Self {
        self.unary(Op::AddConst, rhs).expect("add is total")
    }
}

impl<'t> Sub<f64> for Var<'t> {
    type Output = Var<'t>;
    fn sub(self, rhs: f64) -> Self {
        self.unary(Op::AddConst, -rhs).expect("sub is total")
    }
}

impl<'t> Mul<f64> for Var<'t> {
    type Output = Var<'t>;
    fn mul(self, rhs: f64) -> Self {
        self.unary(Op::MulConst, rhs).expect("mul is total")
    }
}

impl<'t> Add<Var<'t>> for f64 {
    type Output = Var<'t>;
    fn add(self, rhs: Var<'t>) -> Var<'t> {
        rhs + self
    }
}

impl<'t> Sub<Var<'t>> for f64 {
    type Output = Var<'t>;
    fn sub(self, rhs: Var<'t>) -> Var<'t> {
        rhs.unary(Op::SubFromConst, self).expect("sub is total")
    }
}

impl<'t> Mul<Var<'t>> for f64 {
    type Output = Var<'t>;
    fn mul(self, rhs: Var<'t>) -> Var<'t> {
        rhs * self
    }
}

/// Differentiable scalar field: implemented by `f64` and by [`Var`].
///
/// Partial operations (`ln`, `sqrt`, division, real powers) are fallible and
/// report a [`AdError::Domain`] instead of producing NaN or infinity.
pub trait Scalar:
    Copy
    + fmt::Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
    + Add<f64, Output = Self>
    + Sub<f64, Output = Self>
    + Mul<f64, Output = Self>
{
    fn constant(c: f64) -> Self;
    fn value(&self) -> f64;

    fn try_div(self, rhs: Self) -> Result<Self, AdError>;
    fn try_div_const(self, rhs: f64) -> Result<Self, AdError>;
    fn try_ln(self) -> Result<Self, AdError>;
    fn try_sqrt(self) -> Result<Self, AdError>;
    fn try_pow(self, exponent: Self) -> Result<Self, AdError>;
    fn try_powf(self, exponent: f64) -> Result<Self, AdError>;

    fn powi(self, n: i32) -> Self;
    fn exp(self) -> Self;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn tanh(self) -> Self;
    fn sigmoid(self) -> Self;
    fn softplus(self) -> Self;

    fn square(self) -> Self {
        self * self
    }

    /// True for values that live on a tape and receive an adjoint.
    fn is_recorded(&self) -> bool {
        false
    }
}

impl Scalar for f64 {
    fn constant(c: f64) -> Self {
        c
    }
    fn value(&self) -> f64 {
        *self
    }
    fn try_div(self, rhs: Self) -> Result<Self, AdError> {
        check_domain(Op::Div, self, rhs, 0.0)?;
        Ok(forward(Op::Div, self, rhs, 0.0))
    }
    fn try_div_const(self, rhs: f64) -> Result<Self, AdError> {
        check_domain(Op::DivByConst, self, 0.0, rhs)?;
        Ok(forward(Op::DivByConst, self, 0.0, rhs))
    }
    fn try_ln(self) -> Result<Self, AdError> {
        check_domain(Op::Ln, self, 0.0, 0.0)?;
        Ok(forward(Op::Ln, self, 0.0, 0.0))
    }
    fn try_sqrt(self) -> Result<Self, AdError> {
        check_domain(Op::Sqrt, self, 0.0, 0.0)?;
        Ok(forward(Op::Sqrt, self, 0.0, 0.0))
    }
    fn try_pow(self, exponent: Self) -> Result<Self, AdError> {
        check_domain(Op::Pow, self, exponent, 0.0)?;
        Ok(forward(Op::Pow, self, exponent, 0.0))
    }
    fn try_powf(self, exponent: f64) -> Result<Self, AdError> {
        check_domain(Op::PowConst, self, 0.0, exponent)?;
        Ok(forward(Op::PowConst, self, 0.0, exponent))
    }
    fn powi(self, n: i32) -> Self {
        forward(Op::Powi, self, 0.0, n as f64)
    }
    fn exp(self) -> Self {
        forward(Op::Exp, self, 0.0, 0.0)
    }
    fn sin(self) -> Self {
        forward(Op::Sin, self, 0.0, 0.0)
    }
    fn cos(self) -> Self {
        forward(Op::Cos, self, 0.0, 0.0)
    }
    fn tanh(self) -> Self {
        forward(Op::Tanh, self, 0.0, 0.0)
    }
    fn sigmoid(self) -> Self {
        forward(Op::Sigmoid, self, 0.0, 0.0)
    }
    fn softplus(self) -> Self {
        forward(Op::Softplus, self, 0.0, 0.0)
    }
}

impl Scalar for Var<'_> {
    fn constant(c: f64) -> Self {
        Var::constant(c)
    }
    fn is_recorded(&self) -> bool {
        self.index != NO_NODE
    }
    fn value(&self) -> f64 {
        self.value
    }
    fn try_div(self, rhs: Self) -> Result<Self, AdError> {
        self.binary(rhs, Op::Div)
    }
    fn try_div_const(self, rhs: f64) -> Result<Self, AdError> {
        self.unary(Op::DivByConst, rhs)
    }
    fn try_ln(self) -> Result<Self, AdError> {
        self.unary(Op::Ln, 0.0)
    }
    fn try_sqrt(self) -> Result<Self, AdError> {
        self.unary(Op::Sqrt, 0.0)
    }
    fn try_pow(self, exponent: Self) -> Result<Self, AdError> {
        self.binary(exponent, Op::Pow)
    }
    fn try_powf(self, exponent: f64) -> Result<Self, AdError> {
        self.unary(Op::PowConst, exponent)
    }
    fn powi(self, n: i32) -> Self {
        self.unary(Op::Powi, n as f64).expect("powi is total")
    }
    fn exp(self) -> Self {
        self.unary(Op::Exp, 0.0).expect("exp is total")
    }
    fn sin(self) -> Self {
        self.unary(Op::Sin, 0.0).expect("sin is total")
    }
    fn cos(self) -> Self {
        self.unary(Op::Cos, 0.0).expect("cos is total")
    }
    fn tanh(self) -> Self {
        self.unary(Op::Tanh, 0.0).expect("tanh is total")
    }
    fn sigmoid(self) -> Self {
        self.unary(Op::Sigmoid, 0.0).expect("sigmoid is total")
    }
    fn softplus(self) -> Self {
        self.unary(Op::Softplus, 0.0).expect("softplus is total")
    }
}

/// Sum of a slice of scalars (zero for an empty slice).
pub fn sum<S: Scalar>(xs: &[S]) -> S {
    let mut it = xs.iter().copied();
    match it.next() {
        Some(first) => it.fold(first, |acc, x| acc + x),
        None => S::constant(0.0),
    }
}

/// Central finite-difference gradient of `f` at `x` with step `h`.
pub fn central_difference<F>(f: F, x: &[f64], h: f64) -> Vec<f64>
where
    F: Fn(&[f64]) -> f64,
{
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            let xi = probe[i];
            probe[i] = xi + h;
            let up = f(&probe);
            probe[i] = xi - h;
            let down = f(&probe);
            probe[i] = xi;
            (up - down) / (2.0 * h)
        })
        .collect()
}
