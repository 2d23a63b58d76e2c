//! A fine tile next to a coarser one: with its stitch bit set, the odd edge
//! vertices snap onto the coarse edge and the crack closes.

use planetgen::config::{Planet, PlanetConfig};
use planetgen::lod::{Edge, QuadNode};
use planetgen::terrain::SimplePlanetParams;
use planetgen::verify::{crack_gap, same_depth_seam_mismatches};

pub fn run_example() -> (f64, f64) {
    let planet = Planet::new(PlanetConfig::simple(11, SimplePlanetParams::default())).unwrap();

    let a = QuadNode::new(0, 2, 3, 1).unwrap();
    let (b, back) = a.neighbor_with_edge(Edge::East);
    let ga = planet.build_geometry(a, 0).unwrap();
    let gb = planet.build_geometry(b, 0).unwrap();
    println!("{a} east neighbor is {b} (its {back:?} edge), unmatched vertices: {}",
        same_depth_seam_mismatches(&ga, Edge::East, &gb, back));

    let coarse = QuadNode::new(4, 1, 1, 1).unwrap();
    let (n, back) = coarse.neighbor_with_edge(Edge::North);
    let fine = n.edge_children(back)[1];
    let c = planet.build_geometry(coarse, 0).unwrap();
    let loose = crack_gap(&planet.build_geometry(fine, 0).unwrap(), back, &c, Edge::North);
    let tight = crack_gap(&planet.build_geometry(fine, back.bit()).unwrap(), back, &c, Edge::North);
    println!("{fine} against coarser {coarse}:");
    println!("  unstitched gap {loose:.3e} (relative)");
    println!("  stitched gap   {tight:.3e}");
    (loose, tight)
}

#[allow(dead_code)]
fn main() {
    run_example();
}
