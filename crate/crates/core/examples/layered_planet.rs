//! The layered generator: continentalness, erosion, peaks and valleys, and
//! temperature, each remapped by its own curve.

use glam::DVec3;
use planetgen::noise::NoiseSeed;
use planetgen::terrain::{layered_height, layered_layers, LayeredPlanetParams};

pub fn run_example() -> f64 {
    let params = LayeredPlanetParams::default();
    let seed = NoiseSeed(2024);
    println!("     C      E     PV      T   height  biome");
    let mut worst = 0.0f64;
    for i in 0..12 {
        let a = i as f64 * 0.52;
        let dir = DVec3::new(a.cos(), a.sin(), 0.3 * (a * 1.7).sin()).normalize();
        let l = layered_layers(dir, &params, seed).unwrap();
        let s = layered_height(dir, &params, seed).unwrap();
        println!(
            "{:6.3} {:6.3} {:6.3} {:6.3} {:8.0}  {}",
            l.continentalness,
            l.erosion,
            l.peaks_valleys,
            l.temperature,
            s.displacement,
            s.biome.name()
        );
        let recomposed = (l.height_factor() * params.amplitude_m).max(params.ocean_level_m);
        worst = worst.max((recomposed - s.displacement).abs());
    }
    println!("largest recomposition difference: {worst}");
    worst
}

#[allow(dead_code)]
fn main() {
    run_example();
}
