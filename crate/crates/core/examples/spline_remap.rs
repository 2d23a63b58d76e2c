//! Remapping raw noise through control-point curves, linear and monotone cubic.

use planetgen::spline::{Interpolation, SplineCurve};

pub fn run_example() -> (f64, f64) {
    let curve = SplineCurve::new(vec![[0.0, 0.0], [0.1, 0.4], [0.3, 0.5], [1.0, 1.0]]);
    let cubic = curve.clone().with_interpolation(Interpolation::MonotoneCubic);
    println!("   t   linear   cubic");
    for i in 0..=10 {
        let t = i as f64 / 10.0;
        println!("{t:4.1}  {:7.4}  {:7.4}", curve.evaluate(t).unwrap(), cubic.evaluate(t).unwrap());
    }

    let broken = SplineCurve::new(vec![[0.0, 0.0], [0.5, 0.2], [0.3, 0.9], [1.0, 1.0]]);
    println!("broken curve: {}", broken.validate().unwrap_err());
    println!("out of domain: {}", curve.evaluate(1.5).unwrap_err());
    (curve.evaluate(0.2).unwrap(), cubic.evaluate(0.2).unwrap())
}

#[allow(dead_code)]
fn main() {
    run_example();
}
