//! Gradient of a small expression on the reverse-mode tape, checked against
//! the hand-derived derivative.

use nusid::adiff::{Scalar, Tape};

fn f<S: Scalar>(x: S, y: S) -> S {
    (x * y).sin() + x.exp() * y.square() - x.tanh()
}

fn main() {
    let tape = Tape::new();
    let (x, y) = (tape.var(0.7), tape.var(-1.3));
    let out = f(x, y);
    let g = tape.gradient(out, &[x, y]).unwrap();

    let (xv, yv) = (0.7f64, -1.3f64);
    let dx = yv * (xv * yv).cos() + xv.exp() * yv * yv - (1.0 - xv.tanh().powi(2));
    let dy = xv * (xv * yv).cos() + 2.0 * xv.exp() * yv;

    println!("f = {:.12} (plain f64: {:.12})", out.value(), f(xv, yv));
    println!("tape nodes: {}", tape.len());
    println!("df/dx tape {:+.12}  analytic {:+.12}", g[0], dx);
    println!("df/dy tape {:+.12}  analytic {:+.12}", g[1], dy);

    let bad = tape.var(-1.0).try_ln();
    println!("ln(-1): {}", bad.unwrap_err());
}
