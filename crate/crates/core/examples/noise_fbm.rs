//! Gradient noise and fractal sums: how octaves, persistence, lacunarity and
//! exponentiation reshape the same field.

use glam::DVec3;
use planetgen::noise::{fbm, fbm_dir, perlin3, FbmParams, NoiseSeed, SamplingMode};

pub fn run_example() -> Vec<f64> {
    let seed = NoiseSeed(42);
    println!("perlin3 at a lattice point: {}", perlin3(DVec3::new(3.0, -7.0, 12.0), seed).unwrap());
    println!("perlin3 at (0.5, 0.5, 0.5), seed 1: {}", perlin3(DVec3::splat(0.5), NoiseSeed(1)).unwrap());

    let variants = [
        ("one octave", FbmParams { octaves: 1, ..FbmParams::default() }),
        ("default", FbmParams::default()),
        ("rough", FbmParams { persistence: 0.8, ..FbmParams::default() }),
        ("squared", FbmParams { exponentiation: 2.0, ..FbmParams::default() }),
        ("wide gaps", FbmParams { lacunarity: 3.0, ..FbmParams::default() }),
    ];
    let mut means = Vec::new();
    for (name, params) in variants {
        let values: Vec<f64> = (0..2000)
            .map(|i| {
                let t = i as f64 * 0.013;
                fbm(DVec3::new(t.sin() * 3.0, t.cos() * 3.0, t * 0.1), &params, seed).unwrap()
            })
            .collect();
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        let roughness = values.windows(2).map(|w| (w[1] - w[0]).abs()).sum::<f64>() / values.len() as f64;
        println!("{name:>10}: mean {mean:.3}, mean step {roughness:.4}");
        means.push(mean);
    }

    let dir = DVec3::new(1.0, 2.0, 2.0).normalize();
    for mode in [SamplingMode::Sphere3d, SamplingMode::LonLat2d] {
        let v = fbm_dir(dir, mode, &FbmParams::default(), seed).unwrap();
        println!("{mode:?} sample at {dir:.3}: {v:.4}");
    }
    means
}

#[allow(dead_code)]
fn main() {
    run_example();
}
