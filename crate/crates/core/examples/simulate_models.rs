//! Simulate the three built-in models and print the first few outputs.

use nusid::dynamics::{registry_get, simulate, Dynamics, ModelParams, Residual};
use nusid::observations::NoiseSpec;

fn main() {
    let cases: [(&str, Vec<f64>, Vec<f64>); 3] = [
        ("linear2nd", vec![0.0, 0.0], vec![1.0]),
        ("cstr", vec![0.09, 441.0], vec![100.0]),
        ("lotka_volterra", vec![2.0, 3.0], vec![]),
    ];
    for (name, x0, u) in cases {
        let m = registry_get(name, &ModelParams::default()).unwrap();
        let horizon = 200;
        let inputs = vec![u; horizon];
        let noise = NoiseSpec {
            output_std: vec![0.01; m.n_z()],
            input_std: vec![],
            seed: 1,
        };
        let t = simulate(&m, &x0, &inputs, &m.nominal_theta, &Residual::Truth, horizon, &noise).unwrap();
        println!("{name}: n_x={} n_u={} n_z={} theta={:?}", m.n_x(), m.n_u(), m.n_z(), m.nominal_theta);
        for k in [0, 1, 2, 50, 199] {
            println!("  k={k:<3} z={:?} noisy={:?}", t.outputs[k], t.noisy_outputs[k]);
        }
    }
}
