//! The FBM generator: heights scaled by a base factor and clamped to the ocean.

use glam::DVec3;
use planetgen::noise::NoiseSeed;
use planetgen::terrain::{simple_height, Biome, SimplePlanetParams};

pub fn run_example() -> [usize; 6] {
    let params = SimplePlanetParams::default();
    let seed = NoiseSeed(7);
    let mut histogram = [0usize; 6];
    let mut highest = 0.0f64;
    let n = 20_000;
    for i in 0..n {
        // Fibonacci sphere
        let z = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
        let phi = i as f64 * std::f64::consts::PI * (3.0 - 5f64.sqrt());
        let r = (1.0 - z * z).sqrt();
        let dir = DVec3::new(r * phi.cos(), r * phi.sin(), z);
        let s = simple_height(dir, &params, seed).unwrap();
        histogram[s.biome.id() as usize] += 1;
        highest = highest.max(s.displacement);
    }
    println!("ocean level {} m, base factor {} m", params.ocean_level_m, params.base_factor_m);
    println!("highest point {highest:.0} m");
    for b in Biome::ALL {
        println!("{:>10} {:5.1}%", b.name(), 100.0 * histogram[b.id() as usize] as f64 / n as f64);
    }
    histogram
}

#[allow(dead_code)]
fn main() {
    run_example();
}
