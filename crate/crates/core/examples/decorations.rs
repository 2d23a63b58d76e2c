//! Trees on a high-detail tile, cloud spawners around the planet, and the
//! sun and moon over one lunar month.

use planetgen::config::{Planet, PlanetConfig};
use planetgen::lod::QuadNode;
use planetgen::terrain::LayeredPlanetParams;

pub fn run_example() -> usize {
    let planet = Planet::new(PlanetConfig::layered(9, LayeredPlanetParams::default())).unwrap();
    let threshold = planet.tree_threshold();
    let n = 1u32 << threshold;
    // walk a diagonal of each face and report the first wooded tiles
    let mut total = 0;
    let mut shown = 0;
    'scan: for face in 0..6 {
        for k in 1..64 {
            let node = QuadNode::new(face, threshold, n / 64 * k, n / 64 * k).unwrap();
            let trees = planet.trees(&node).unwrap();
            if trees.is_empty() {
                continue;
            }
            let palms = trees.iter().filter(|t| t.kind == planetgen::scene::InstanceKind::TreePalm).count();
            println!("{node}: {} trees ({palms} palms)", trees.len());
            total += trees.len();
            shown += 1;
            if shown == 6 {
                break 'scan;
            }
        }
    }
    let above = QuadNode::new(0, threshold - 1, 0, 0).unwrap();
    println!("{above} is below the tree threshold: {} trees", planet.trees(&above).unwrap().len());

    let clouds = planet.clouds();
    println!("{} cloud spawners, first: {}", clouds.len(), serde_json::to_string(&clouds[0]).unwrap());

    let period = planet.config().decoration.orbit.moon_period_s;
    for i in 0..=4 {
        let e = planet.ephemeris(period * i as f64 / 4.0).unwrap();
        println!("t={:6.0}s sun {:.3} moon phase {:.3}", e.time, e.sun_direction, e.moon_phase);
    }
    total
}

#[allow(dead_code)]
fn main() {
    run_example();
}
