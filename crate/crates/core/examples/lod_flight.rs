//! A camera dives from orbit to the surface; the quadtree refines around it
//! and stays restricted.

use glam::DVec3;
use planetgen::lod::{CameraState, LodConfig, QuadTree};

pub fn run_example() -> usize {
    let config = LodConfig {
        base_radius_m: 1_000_000.0,
        max_depth: 12,
        ..LodConfig::default()
    };
    let mut tree = QuadTree::new(config).unwrap();
    let dir = DVec3::new(0.2, 0.9, 0.4).normalize();
    println!(" altitude m  leaves  depth  +added  -removed  stitched");
    for step in 0..=12 {
        let altitude = 8e6 * 0.4f64.powi(step);
        let update = tree.update(&CameraState::at(dir * (config.base_radius_m + altitude))).unwrap();
        let stitched = update.stitch_masks.values().filter(|&&m| m != 0).count();
        println!(
            "{altitude:11.0}  {:6}  {:5}  {:6}  {:8}  {stitched:8}",
            tree.leaves().len(),
            tree.max_leaf_depth(),
            update.added.len(),
            update.removed.len()
        );
        assert!(tree.is_restricted());
    }
    let cam = CameraState::at(dir * (config.base_radius_m + 10.0));
    tree.update(&cam).unwrap();
    println!("static camera, second update empty: {}", tree.update(&cam).unwrap().is_empty());
    tree.leaves().len()
}

#[allow(dead_code)]
fn main() {
    run_example();
}
