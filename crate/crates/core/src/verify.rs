//! Invariant sweeps over a planet: ocean clamp, height formula identity,
//! tile seams and quadtree restriction, each on seeded random probes.

use std::collections::BTreeSet;
use std::fmt;

use glam::DVec3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::Planet;
use crate::lod::{CameraState, Edge, QuadNode};
use crate::mesh::TileGeometry;
use crate::noise::fbm_dir;
use crate::terrain::{Biome, Generator};

/// Relative tolerance for a fine edge vertex against the coarse polyline.
pub const CRACK_TOLERANCE: f64 = 1e-9;

const MAX_REPORTED: usize = 5;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckReport {
    pub name: &'static str,
    pub probes: usize,
    pub violations: Vec<String>,
    /// Total violations, including those not kept in `violations`.
    pub violation_count: usize,
}

impl CheckReport {
    fn new(name: &'static str) -> Self {
        CheckReport {
            name,
            probes: 0,
            violations: Vec::new(),
            violation_count: 0,
        }
    }

    fn fail(&mut self, msg: impl FnOnce() -> String) {
        self.violation_count += 1;
        if self.violations.len() < MAX_REPORTED {
            self.violations.push(msg());
        }
    }

    pub fn passed(&self) -> bool {
        self.violation_count == 0
    }
}

impl fmt::Display for CheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = if self.passed() { "PASS" } else { "FAIL" };
        write!(f, "{verdict} {} ({} probes", self.name, self.probes)?;
        if !self.passed() {
            write!(f, ", {} violations", self.violation_count)?;
        }
        write!(f, ")")?;
        for v in &self.violations {
            write!(f, "\n    {v}")?;
        }
        Ok(())
    }
}

/// Uniformly distributed unit vector.
pub fn random_unit(rng: &mut impl Rng) -> DVec3 {
    let z: f64 = rng.gen_range(-1.0..=1.0);
    let phi = rng.gen_range(0.0..std::f64::consts::TAU);
    let r = (1.0 - z * z).max(0.0).sqrt();
    DVec3::new(r * phi.cos(), r * phi.sin(), z).normalize()
}

/// Displacement never below the ocean level, and ocean exactly at it.
pub fn check_ocean_clamp(planet: &Planet, samples: usize, rng: &mut impl Rng) -> CheckReport {
    let mut report = CheckReport::new("ocean_clamp");
    let ocean = planet.generator().ocean_level();
    for _ in 0..samples {
        let dir = random_unit(rng);
        report.probes += 1;
        match planet.generator().sample(dir, planet.config().seed) {
            Ok(s) => {
                if s.displacement < ocean {
                    report.fail(|| format!("{dir:?}: displacement {} < ocean {ocean}", s.displacement));
                }
                if (s.biome == Biome::Ocean) != (s.displacement == ocean) && s.biome != Biome::Lava {
                    report.fail(|| format!("{dir:?}: biome {:?} at displacement {}", s.biome, s.displacement));
                }
            }
            Err(e) => report.fail(|| format!("{dir:?}: {e}")),
        }
    }
    report
}

/// Displacement equals the generator formula recomputed from public pieces.
pub fn check_formula_identity(planet: &Planet, samples: usize, rng: &mut impl Rng) -> CheckReport {
    let mut report = CheckReport::new("formula_identity");
    let seed = planet.config().seed;
    for _ in 0..samples {
        let dir = random_unit(rng);
        report.probes += 1;
        let sample = match planet.generator().sample(dir, seed) {
            Ok(s) => s,
            Err(e) => {
                report.fail(|| format!("{dir:?}: {e}"));
                continue;
            }
        };
        let expected = match planet.generator() {
            Generator::Simple(p) => fbm_dir(dir, p.sampling, &p.fbm, seed)
                .map(|raw| (raw * p.base_factor_m).max(p.ocean_level_m))
                .ok(),
            Generator::Layered(p) => sample.layers.map(|l| {
                ((l.continentalness + l.peaks_valleys) * (1.0 - l.erosion) * p.amplitude_m).max(p.ocean_level_m)
            }),
        };
        if expected != Some(sample.displacement) {
            report.fail(|| format!("{dir:?}: displacement {} != recomputed {expected:?}", sample.displacement));
        }
    }
    report
}

fn edge_positions(tile: &TileGeometry, edge: Edge) -> Vec<DVec3> {
    tile.edge_vertices(edge).into_iter().map(|i| tile.positions[i]).collect()
}

/// Shared edge of two same-depth neighbors: every vertex of `a`'s edge has a
/// bit-identical partner on `b`'s matching edge. Returns the mismatch count.
pub fn same_depth_seam_mismatches(a: &TileGeometry, edge: Edge, b: &TileGeometry, back: Edge) -> usize {
    let theirs = edge_positions(b, back);
    edge_positions(a, edge)
        .into_iter()
        .filter(|p| !theirs.iter().any(|q| q.to_array() == p.to_array()))
        .count()
}

fn point_segment_distance(p: DVec3, a: DVec3, b: DVec3) -> f64 {
    let ab = b - a;
    let t = ((p - a).dot(ab) / ab.length_squared()).clamp(0.0, 1.0);
    (p - (a + ab * t)).length()
}

/// Largest relative distance from a fine edge vertex to the coarse edge polyline.
pub fn crack_gap(fine: &TileGeometry, edge: Edge, coarse: &TileGeometry, back: Edge) -> f64 {
    let poly = edge_positions(coarse, back);
    edge_positions(fine, edge)
        .into_iter()
        .map(|p| {
            let d = poly
                .windows(2)
                .map(|w| point_segment_distance(p, w[0], w[1]))
                .fold(f64::INFINITY, f64::min);
            d / p.length()
        })
        .fold(0.0, f64::max)
}

fn random_node(rng: &mut impl Rng, max_depth: u8) -> QuadNode {
    let depth = rng.gen_range(0..=max_depth);
    let n = 1u32 << depth;
    QuadNode {
        face: rng.gen_range(0..6),
        depth,
        x: rng.gen_range(0..n),
        y: rng.gen_range(0..n),
    }
}

/// Same-depth seams are bit-identical; stitched one-level seams close.
pub fn check_seams(planet: &Planet, pairs: usize, rng: &mut impl Rng) -> CheckReport {
    let mut report = CheckReport::new("seam_continuity");
    for _ in 0..pairs {
        let node = random_node(rng, 3);
        let edge = Edge::ALL[rng.gen_range(0..4)];
        let (other, back) = node.neighbor_with_edge(edge);
        report.probes += 1;
        let built = planet.build_geometry(node, 0).and_then(|a| Ok((a, planet.build_geometry(other, 0)?)));
        match built {
            Ok((a, b)) => {
                let bad = same_depth_seam_mismatches(&a, edge, &b, back);
                if bad > 0 {
                    report.fail(|| format!("{node} {edge:?} / {other}: {bad} unmatched edge vertices"));
                }
            }
            Err(e) => report.fail(|| format!("{node}: {e}")),
        }

        let fine = node.children()[rng.gen_range(0..4)];
        let (n, back) = fine.neighbor_with_edge(edge);
        let coarse = n.parent().expect("child has a parent");
        if fine.parent() == Some(coarse) || !node.edge_children(edge).contains(&fine) {
            continue;
        }
        report.probes += 1;
        let built = planet
            .build_geometry(fine, edge.bit())
            .and_then(|f| Ok((f, planet.build_geometry(coarse, 0)?)));
        match built {
            Ok((f, c)) => {
                let gap = crack_gap(&f, edge, &c, back);
                if gap > CRACK_TOLERANCE {
                    report.fail(|| format!("{fine} {edge:?} / {coarse}: gap {gap:e}"));
                }
            }
            Err(e) => report.fail(|| format!("{fine}: {e}")),
        }
    }
    report
}

/// Leaf covering `node`'s region, or `None` when the region is subdivided.
fn covering_leaf(leaves: &BTreeSet<QuadNode>, node: QuadNode) -> Option<QuadNode> {
    let mut cur = Some(node);
    while let Some(n) = cur {
        if leaves.contains(&n) {
            return Some(n);
        }
        cur = n.parent();
    }
    None
}

/// Edge-adjacent leaf pairs whose depths differ by more than one.
pub fn restriction_violations(leaves: &BTreeSet<QuadNode>) -> Vec<(QuadNode, Edge)> {
    let mut bad = Vec::new();
    for leaf in leaves {
        for edge in Edge::ALL {
            let (n, back) = leaf.neighbor_with_edge(edge);
            match covering_leaf(leaves, n) {
                Some(c) if c.depth + 1 < leaf.depth => bad.push((*leaf, edge)),
                Some(_) => {}
                None => {
                    if n.edge_children(back).iter().any(|c| !leaves.contains(c)) {
                        bad.push((*leaf, edge));
                    }
                }
            }
        }
    }
    bad
}

/// Random descending flights keep the tree restricted and settle when the
/// camera stops.
pub fn check_restricted_tree(planet: &Planet, flights: usize, steps: usize, rng: &mut impl Rng) -> CheckReport {
    let mut report = CheckReport::new("restricted_quadtree");
    let radius = planet.base_radius();
    for flight in 0..flights {
        let mut tree = planet.quad_tree();
        let start = random_unit(rng) * radius * rng.gen_range(1.5..8.0);
        let end = random_unit(rng) * radius * (1.0 + rng.gen_range(1e-4..0.05));
        let mut camera = CameraState::at(start);
        for step in 0..steps {
            let t = (step + 1) as f64 / steps as f64;
            camera = CameraState::at(start.lerp(end, t));
            report.probes += 1;
            if let Err(e) = tree.update(&camera) {
                report.fail(|| format!("flight {flight} step {step}: {e}"));
                break;
            }
            let bad = restriction_violations(tree.leaves());
            if let Some((leaf, edge)) = bad.first() {
                report.fail(|| format!("flight {flight} step {step}: {leaf} {edge:?} and {} more", bad.len() - 1));
            }
        }
        match tree.update(&camera) {
            Ok(u) if u.is_empty() => {}
            Ok(u) => report.fail(|| {
                format!("flight {flight}: static camera still changed {} + {} nodes", u.added.len(), u.removed.len())
            }),
            Err(e) => report.fail(|| e.to_string()),
        }
    }
    report
}

/// Runs every sweep with roughly `samples` probes in total. The random
/// stream depends only on the planet seed.
pub fn run_all(planet: &Planet, samples: usize) -> Vec<CheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(planet.config().seed.0 ^ 0x5EED_CAFE);
    let pairs = (samples / 200).clamp(4, 64);
    let flights = (samples / 2000).clamp(2, 10);
    vec![
        check_ocean_clamp(planet, samples, &mut rng),
        check_formula_identity(planet, samples, &mut rng),
        check_seams(planet, pairs, &mut rng),
        check_restricted_tree(planet, flights, 60, &mut rng),
    ]
}
