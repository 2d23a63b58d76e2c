//! Quadsphere addressing and the camera-driven restricted quadtree.
//!
//! Cube faces use these frames (normal, u axis, v axis); every frame is
//! right-handed, `u × v = normal`:
//!
//! | face | normal | u  | v  |
//! |------|--------|----|----|
//! | 0    | +X     | +Y | +Z |
//! | 1    | -X     | +Z | +Y |
//! | 2    | +Y     | +Z | +X |
//! | 3    | -Y     | +X | +Z |
//! | 4    | +Z     | +X | +Y |
//! | 5    | -Z     | +Y | +X |
//!
//! Node edges are named by the direction they face in the node's own frame:
//! east is `+u`, west `-u`, north `+v`, south `-v`.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use glam::{DVec3, I64Vec3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const MAX_SUPPORTED_DEPTH: u8 = 30;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LodError {
    #[error("face {0} out of range 0..6")]
    BadFace(u8),
    #[error("face coordinates ({0}, {1}) outside [0, 1]")]
    UvOutOfRange(f64, f64),
    #[error("direction {0:?} is zero, non-finite or not unit length")]
    BadDirection([f64; 3]),
    #[error("invalid camera: {0}")]
    InvalidCamera(String),
    #[error("invalid lod configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid quadtree: {0}")]
    InvalidTree(String),
    #[error("malformed node address {0:?}")]
    BadAddress(String),
}

/// (axis, sign) of a face's normal, u axis and v axis.
type Frame = [(usize, i64); 3];

const FACE_FRAMES: [Frame; 6] = [
    [(0, 1), (1, 1), (2, 1)],
    [(0, -1), (2, 1), (1, 1)],
    [(1, 1), (2, 1), (0, 1)],
    [(1, -1), (0, 1), (2, 1)],
    [(2, 1), (0, 1), (1, 1)],
    [(2, -1), (1, 1), (0, 1)],
];

fn axis_vec((axis, sign): (usize, i64)) -> I64Vec3 {
    let mut v = I64Vec3::ZERO;
    v[axis] = sign;
    v
}

fn face_of_normal(n: I64Vec3) -> u8 {
    let axis = (0..3).find(|&k| n[k] != 0).expect("axis vector");
    (2 * axis + usize::from(n[axis] < 0)) as u8
}

/// Point on the cube surface of `face` at frame coordinates `a, b` in [-1, 1].
/// Built component-wise so that the same cube point reached from two faces is
/// bit-identical.
pub fn face_cube_point(face: u8, a: f64, b: f64) -> DVec3 {
    let [(nk, ns), (uk, us), (vk, vs)] = FACE_FRAMES[face as usize];
    let mut c = DVec3::ZERO;
    c[nk] = ns as f64;
    c[uk] = if us > 0 { a } else { -a };
    c[vk] = if vs > 0 { b } else { -b };
    c
}

/// Unit direction for frame coordinates `a, b` in [-1, 1].
pub fn cube_to_sphere(face: u8, a: f64, b: f64) -> DVec3 {
    face_cube_point(face, a, b).normalize()
}

/// Unit direction of the lattice point `(gi, gj)` on a face split into
/// `cells` cells per side. Exact integer numerators keep shared points
/// identical between neighboring tiles.
pub fn face_lattice_dir(face: u8, cells: u64, gi: u64, gj: u64) -> DVec3 {
    let n = cells as f64;
    let a = (2.0 * gi as f64 - n) / n;
    let b = (2.0 * gj as f64 - n) / n;
    cube_to_sphere(face, a, b)
}

pub fn face_uv_to_sphere(face: u8, u: f64, v: f64) -> Result<DVec3, LodError> {
    if face >= 6 {
        return Err(LodError::BadFace(face));
    }
    if !((0.0..=1.0).contains(&u) && (0.0..=1.0).contains(&v)) {
        return Err(LodError::UvOutOfRange(u, v));
    }
    Ok(cube_to_sphere(face, 2.0 * u - 1.0, 2.0 * v - 1.0))
}

/// Inverse of [`face_uv_to_sphere`]. The face is the one of the dominant
/// component; ties go to the lowest face id.
pub fn sphere_to_face_uv(p: DVec3) -> Result<(u8, f64, f64), LodError> {
    let len = p.length();
    if !(p.is_finite() && (len - 1.0).abs() <= 1e-9) {
        return Err(LodError::BadDirection(p.to_array()));
    }
    let abs = p.abs();
    let axis = if abs.x >= abs.y && abs.x >= abs.z {
        0
    } else if abs.y >= abs.z {
        1
    } else {
        2
    };
    let face = (2 * axis + usize::from(p[axis] < 0.0)) as u8;
    let [_, (uk, us), (vk, vs)] = FACE_FRAMES[face as usize];
    let c = p / abs[axis];
    let a = c[uk] * us as f64;
    let b = c[vk] * vs as f64;
    Ok((
        face,
        ((a + 1.0) * 0.5).clamp(0.0, 1.0),
        ((b + 1.0) * 0.5).clamp(0.0, 1.0),
    ))
}

/// Solid angle of the cube-face rectangle `[a0, a1] x [b0, b1]` seen from the center.
pub fn cube_rect_solid_angle(a0: f64, a1: f64, b0: f64, b1: f64) -> f64 {
    let f = |a: f64, b: f64| (a * b / (1.0 + a * a + b * b).sqrt()).atan();
    f(a1, b1) - f(a0, b1) - f(a1, b0) + f(a0, b0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Edge {
    North,
    East,
    South,
    West,
}

impl Edge {
    pub const ALL: [Edge; 4] = [Edge::North, Edge::East, Edge::South, Edge::West];

    /// Bit of this edge in a stitch mask.
    pub fn bit(self) -> u8 {
        match self {
            Edge::North => 1,
            Edge::East => 2,
            Edge::South => 4,
            Edge::West => 8,
        }
    }

    pub fn opposite(self) -> Edge {
        match self {
            Edge::North => Edge::South,
            Edge::East => Edge::West,
            Edge::South => Edge::North,
            Edge::West => Edge::East,
        }
    }

    fn direction(self, face: u8) -> I64Vec3 {
        let [_, u, v] = FACE_FRAMES[face as usize];
        match self {
            Edge::East => axis_vec(u),
            Edge::West => -axis_vec(u),
            Edge::North => axis_vec(v),
            Edge::South => -axis_vec(v),
        }
    }

    fn from_direction(face: u8, d: I64Vec3) -> Edge {
        Edge::ALL
            .into_iter()
            .find(|e| e.direction(face) == d)
            .expect("direction lies in the face plane")
    }
}

/// Address of one quadtree cell: cube face, depth and integer grid position.
///
/// Serializes as its address string `f{face}/d{depth}/{x}/{y}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct QuadNode {
    pub face: u8,
    pub depth: u8,
    pub x: u32,
    pub y: u32,
}

impl QuadNode {
    pub fn root(face: u8) -> QuadNode {
        QuadNode {
            face,
            depth: 0,
            x: 0,
            y: 0,
        }
    }

    pub fn roots() -> [QuadNode; 6] {
        [0, 1, 2, 3, 4, 5].map(QuadNode::root)
    }

    pub fn new(face: u8, depth: u8, x: u32, y: u32) -> Result<QuadNode, LodError> {
        let node = QuadNode { face, depth, x, y };
        if node.is_valid() {
            Ok(node)
        } else {
            Err(LodError::BadAddress(format!("{face}/{depth}/{x}/{y}")))
        }
    }

    pub fn is_valid(&self) -> bool {
        self.face < 6
            && self.depth <= MAX_SUPPORTED_DEPTH
            && (self.x as u64) < self.cells()
            && (self.y as u64) < self.cells()
    }

    /// Cells per face side at this depth.
    pub fn cells(&self) -> u64 {
        1u64 << self.depth
    }

    /// Children ordered (0,0), (1,0), (0,1), (1,1) in local (x, y).
    pub fn children(&self) -> [QuadNode; 4] {
        let (x, y, depth) = (self.x * 2, self.y * 2, self.depth + 1);
        [(0, 0), (1, 0), (0, 1), (1, 1)].map(|(dx, dy)| QuadNode {
            face: self.face,
            depth,
            x: x + dx,
            y: y + dy,
        })
    }

    pub fn parent(&self) -> Option<QuadNode> {
        (self.depth > 0).then(|| QuadNode {
            face: self.face,
            depth: self.depth - 1,
            x: self.x / 2,
            y: self.y / 2,
        })
    }

    pub fn ancestor_at(&self, depth: u8) -> Option<QuadNode> {
        (depth <= self.depth).then(|| {
            let shift = self.depth - depth;
            QuadNode {
                face: self.face,
                depth,
                x: self.x >> shift,
                y: self.y >> shift,
            }
        })
    }

    /// Arc length of one side on the unit sphere, measured along a face axis.
    pub fn angular_size(&self) -> f64 {
        std::f64::consts::FRAC_PI_2 / self.cells() as f64
    }

    /// `(u0, v0, u1, v1)` in face coordinates.
    pub fn uv_bounds(&self) -> (f64, f64, f64, f64) {
        let n = self.cells() as f64;
        (
            self.x as f64 / n,
            self.y as f64 / n,
            (self.x + 1) as f64 / n,
            (self.y + 1) as f64 / n,
        )
    }

    pub fn center_dir(&self) -> DVec3 {
        let n = self.cells();
        face_lattice_dir(self.face, 2 * n, 2 * self.x as u64 + 1, 2 * self.y as u64 + 1)
    }

    pub fn corner_dirs(&self) -> [DVec3; 4] {
        let n = self.cells();
        let (x, y) = (self.x as u64, self.y as u64);
        [(0, 0), (1, 0), (1, 1), (0, 1)].map(|(dx, dy)| face_lattice_dir(self.face, n, x + dx, y + dy))
    }

    pub fn solid_angle(&self) -> f64 {
        let (u0, v0, u1, v1) = self.uv_bounds();
        cube_rect_solid_angle(2.0 * u0 - 1.0, 2.0 * u1 - 1.0, 2.0 * v0 - 1.0, 2.0 * v1 - 1.0)
    }

    /// Sphere enclosing the node's patch for every radius in
    /// `[radius, radius + relief]`.
    pub fn bounding_sphere(&self, radius: f64, relief: f64) -> (DVec3, f64) {
        let center = self.center_dir() * (radius + 0.5 * relief);
        let mut r: f64 = 0.5 * relief;
        for corner in self.corner_dirs() {
            for h in [radius, radius + relief] {
                r = r.max((corner * h - center).length());
            }
        }
        (center, r)
    }

    fn cell_center(&self) -> I64Vec3 {
        let n = self.cells() as i64;
        let [nf, u, v] = FACE_FRAMES[self.face as usize];
        axis_vec(nf) * n
            + axis_vec(u) * (2 * self.x as i64 + 1 - n)
            + axis_vec(v) * (2 * self.y as i64 + 1 - n)
    }

    fn from_cell_center(face: u8, depth: u8, c: I64Vec3) -> QuadNode {
        let n = 1i64 << depth;
        let [_, u, v] = FACE_FRAMES[face as usize];
        QuadNode {
            face,
            depth,
            x: ((c.dot(axis_vec(u)) + n - 1) / 2) as u32,
            y: ((c.dot(axis_vec(v)) + n - 1) / 2) as u32,
        }
    }

    /// Same-depth neighbor across `edge`, and the neighbor's edge that faces back.
    pub fn neighbor_with_edge(&self, edge: Edge) -> (QuadNode, Edge) {
        let n = self.cells() as i64;
        let (x, y) = (self.x as i64, self.y as i64);
        let inside = match edge {
            Edge::East => x + 1 < n,
            Edge::West => x > 0,
            Edge::North => y + 1 < n,
            Edge::South => y > 0,
        };
        if inside {
            let (dx, dy) = match edge {
                Edge::East => (1, 0),
                Edge::West => (-1, 0),
                Edge::North => (0, 1),
                Edge::South => (0, -1),
            };
            let node = QuadNode {
                x: (x + dx) as u32,
                y: (y + dy) as u32,
                ..*self
            };
            return (node, edge.opposite());
        }
        // Fold over the cube edge: the neighbor cell center is one step along
        // the travel direction and one step down from our face plane.
        let travel = edge.direction(self.face);
        let normal = axis_vec(FACE_FRAMES[self.face as usize][0]);
        let center = self.cell_center() + travel - normal;
        let face = face_of_normal(travel);
        let node = QuadNode::from_cell_center(face, self.depth, center);
        (node, Edge::from_direction(face, normal))
    }

    pub fn neighbor(&self, edge: Edge) -> QuadNode {
        self.neighbor_with_edge(edge).0
    }

    /// The two children of this node that touch `edge`.
    pub fn edge_children(&self, edge: Edge) -> [QuadNode; 2] {
        let [c00, c10, c01, c11] = self.children();
        match edge {
            Edge::North => [c01, c11],
            Edge::East => [c10, c11],
            Edge::South => [c00, c10],
            Edge::West => [c00, c01],
        }
    }
}

impl fmt::Display for QuadNode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "f{}/d{}/{}/{}", self.face, self.depth, self.x, self.y)
    }
}

impl From<QuadNode> for String {
    fn from(node: QuadNode) -> String {
        node.to_string()
    }
}

impl TryFrom<String> for QuadNode {
    type Error = LodError;

    fn try_from(s: String) -> Result<QuadNode, LodError> {
        s.parse()
    }
}

impl FromStr for QuadNode {
    type Err = LodError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || LodError::BadAddress(s.to_string());
        let mut parts = s.split('/');
        let mut field = |prefix: &str| -> Result<u32, LodError> {
            let part = parts.next().ok_or_else(bad)?;
            part.strip_prefix(prefix)
                .ok_or_else(bad)?
                .parse::<u32>()
                .map_err(|_| bad())
        };
        let face = field("f")?;
        let depth = field("d")?;
        let x = field("")?;
        let y = field("")?;
        if parts.next().is_some() || face > 255 || depth > 255 {
            return Err(bad());
        }
        QuadNode::new(face as u8, depth as u8, x, y).map_err(|_| bad())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraState {
    /// Planet-centered position in meters.
    pub position: DVec3,
    pub look_direction: DVec3,
}

impl CameraState {
    pub fn at(position: DVec3) -> CameraState {
        CameraState {
            position,
            look_direction: -position.normalize_or_zero(),
        }
    }

    pub fn validate(&self) -> Result<(), LodError> {
        if !self.position.is_finite() {
            return Err(LodError::InvalidCamera("position must be finite".into()));
        }
        if self.position.length_squared() == 0.0 {
            return Err(LodError::InvalidCamera("position must be nonzero".into()));
        }
        if !self.look_direction.is_finite() {
            return Err(LodError::InvalidCamera("look direction must be finite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LodConfig {
    pub base_radius_m: f64,
    /// Largest displacement above the base radius; sizes the bounding spheres.
    pub max_relief_m: f64,
    pub split_factor: f64,
    pub hysteresis: f64,
    pub max_depth: u8,
}

impl Default for LodConfig {
    fn default() -> Self {
        LodConfig {
            base_radius_m: 6_371_000.0,
            max_relief_m: 16_000.0,
            split_factor: 1.5,
            hysteresis: 1.2,
            max_depth: 14,
        }
    }
}

impl LodConfig {
    pub fn validate(&self) -> Result<(), LodError> {
        let fail = |m: &str| Err(LodError::InvalidConfig(m.to_string()));
        if !(self.base_radius_m.is_finite() && self.base_radius_m > 0.0) {
            return fail("base_radius > 0");
        }
        if !(self.max_relief_m.is_finite() && self.max_relief_m >= 0.0) {
            return fail("max_relief ≥ 0");
        }
        if !(self.split_factor.is_finite() && self.split_factor > 0.0) {
            return fail("split_factor > 0");
        }
        if !(self.hysteresis.is_finite() && self.hysteresis > 1.0) {
            return fail("hysteresis > 1");
        }
        if self.max_depth > MAX_SUPPORTED_DEPTH {
            return fail("max_depth ≤ 30");
        }
        Ok(())
    }

    /// Node side length in meters at the base radius.
    pub fn arc_length(&self, node: &QuadNode) -> f64 {
        node.angular_size() * self.base_radius_m
    }

    /// Distance from `camera` to the nearest point of the node's bounding sphere,
    /// zero inside it.
    pub fn sphere_distance(&self, node: &QuadNode, camera: DVec3) -> f64 {
        let (center, r) = node.bounding_sphere(self.base_radius_m, self.max_relief_m);
        ((camera - center).length() - r).max(0.0)
    }

    /// Same as [`sphere_distance`](Self::sphere_distance) with the sphere
    /// sized to displacements in `[lo, hi]` instead of `[0, max_relief]`.
    pub fn band_distance(&self, node: &QuadNode, camera: DVec3, (lo, hi): (f64, f64)) -> f64 {
        let (center, r) = node.bounding_sphere(self.base_radius_m + lo, (hi - lo).max(0.0));
        ((camera - center).length() - r).max(0.0)
    }
}

/// Per-node displacement range `(lo, hi)` in meters above the base radius.
/// Lets the tree size bounding spheres to the terrain under each node.
pub trait HeightBand: fmt::Debug + Send + Sync {
    fn band(&self, node: &QuadNode) -> (f64, f64);
}

/// Effective node distances for one camera position, memoized per update.
///
/// A node's effective distance is the largest bounding-sphere distance along
/// its ancestor chain: every ancestor sphere also contains the node, so this
/// is still a lower bound on the true distance, and it never decreases with
/// depth. That keeps refinement monotone.
struct DistanceField<'a> {
    config: &'a LodConfig,
    band: Option<&'a dyn HeightBand>,
    camera: DVec3,
    memo: HashMap<QuadNode, f64>,
}

impl<'a> DistanceField<'a> {
    fn new(config: &'a LodConfig, band: Option<&'a dyn HeightBand>, camera: DVec3) -> Self {
        DistanceField {
            config,
            band,
            camera,
            memo: HashMap::new(),
        }
    }

    fn distance(&mut self, node: QuadNode) -> f64 {
        if let Some(&d) = self.memo.get(&node) {
            return d;
        }
        let own = match self.band {
            Some(b) => self.config.band_distance(&node, self.camera, b.band(&node)),
            None => self.config.sphere_distance(&node, self.camera),
        };
        let d = match node.parent() {
            Some(p) => own.max(self.distance(p)),
            None => own,
        };
        self.memo.insert(node, d);
        d
    }

    fn wants_split(&mut self, node: QuadNode) -> bool {
        node.depth < self.config.max_depth
            && self.distance(node) < self.config.split_factor * self.config.arc_length(&node)
    }

    fn wants_merge(&mut self, node: QuadNode) -> bool {
        self.distance(node)
            > self.config.hysteresis * self.config.split_factor * self.config.arc_length(&node)
    }
}

/// Whether `node` would split for a camera at `camera`, evaluated from scratch.
pub fn split_predicate(config: &LodConfig, node: &QuadNode, camera: DVec3) -> bool {
    DistanceField::new(config, None, camera).wants_split(*node)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LodUpdate {
    pub added: Vec<QuadNode>,
    pub removed: Vec<QuadNode>,
    /// Stitch mask of every current leaf.
    pub stitch_masks: BTreeMap<QuadNode, u8>,
}

impl LodUpdate {
    pub fn is_empty(&self) -> bool {
        self.added.is_empty() && self.removed.is_empty()
    }
}

/// Restricted quadtree over the six cube faces.
#[derive(Debug, Clone)]
pub struct QuadTree {
    config: LodConfig,
    band: Option<Arc<dyn HeightBand>>,
    leaves: BTreeSet<QuadNode>,
    internal: HashSet<QuadNode>,
}

impl QuadTree {
    pub fn new(config: LodConfig) -> Result<QuadTree, LodError> {
        config.validate()?;
        Ok(QuadTree {
            config,
            band: None,
            leaves: QuadNode::roots().into_iter().collect(),
            internal: HashSet::new(),
        })
    }

    /// Builds a tree from an explicit leaf set, checking that it partitions
    /// the sphere and is restricted.
    pub fn from_leaves(
        config: LodConfig,
        leaves: impl IntoIterator<Item = QuadNode>,
    ) -> Result<QuadTree, LodError> {
        config.validate()?;
        let leaves: BTreeSet<QuadNode> = leaves.into_iter().collect();
        let mut internal = HashSet::new();
        let mut deepest = 0u8;
        for leaf in &leaves {
            if !leaf.is_valid() {
                return Err(LodError::InvalidTree(format!("invalid address {leaf}")));
            }
            deepest = deepest.max(leaf.depth);
            let mut cur = *leaf;
            while let Some(p) = cur.parent() {
                if leaves.contains(&p) {
                    return Err(LodError::InvalidTree(format!("{leaf} overlaps leaf {p}")));
                }
                internal.insert(p);
                cur = p;
            }
        }
        let area: u128 = leaves
            .iter()
            .map(|l| 1u128 << (2 * (deepest - l.depth) as u32))
            .sum();
        if area != 6u128 << (2 * deepest as u32) {
            return Err(LodError::InvalidTree("leaves do not cover the sphere".into()));
        }
        let tree = QuadTree {
            config,
            band: None,
            leaves,
            internal,
        };
        if let Some(leaf) = tree.leaves.iter().find(|l| tree.needs_balance_split(l)) {
            return Err(LodError::InvalidTree(format!(
                "{leaf} borders a leaf more than one level finer"
            )));
        }
        Ok(tree)
    }

    /// Sizes bounding spheres from `band` instead of the uniform relief.
    pub fn with_height_band(mut self, band: Arc<dyn HeightBand>) -> QuadTree {
        self.band = Some(band);
        self
    }

    pub fn config(&self) -> &LodConfig {
        &self.config
    }

    pub fn leaves(&self) -> &BTreeSet<QuadNode> {
        &self.leaves
    }

    pub fn is_leaf(&self, node: &QuadNode) -> bool {
        self.leaves.contains(node)
    }

    pub fn max_leaf_depth(&self) -> u8 {
        self.leaves.iter().map(|l| l.depth).max().unwrap_or(0)
    }

    fn split(&mut self, node: QuadNode) {
        self.leaves.remove(&node);
        self.internal.insert(node);
        self.leaves.extend(node.children());
    }

    fn merge(&mut self, node: QuadNode) {
        for c in node.children() {
            self.leaves.remove(&c);
        }
        self.internal.remove(&node);
        self.leaves.insert(node);
    }

    /// True when some leaf two or more levels finer touches `leaf` across an edge.
    fn needs_balance_split(&self, leaf: &QuadNode) -> bool {
        Edge::ALL.into_iter().any(|edge| {
            let (n, back) = leaf.neighbor_with_edge(edge);
            self.internal.contains(&n)
                && n.edge_children(back)
                    .iter()
                    .any(|c| self.internal.contains(c))
        })
    }

    /// Leaf containing the region of `node` (itself or an ancestor), if any.
    fn covering_leaf(&self, node: QuadNode) -> Option<QuadNode> {
        let mut cur = Some(node);
        while let Some(n) = cur {
            if self.leaves.contains(&n) {
                return Some(n);
            }
            cur = n.parent();
        }
        None
    }

    /// Splits leaves until edge-adjacent leaves differ by at most one level.
    fn restrict(&mut self) {
        let mut work: Vec<QuadNode> = self.leaves.iter().copied().collect();
        while let Some(leaf) = work.pop() {
            if !self.leaves.contains(&leaf) || !self.needs_balance_split(&leaf) {
                continue;
            }
            self.split(leaf);
            work.extend(leaf.children());
            for edge in Edge::ALL {
                if let Some(l) = self.covering_leaf(leaf.neighbor(edge)) {
                    work.push(l);
                }
            }
        }
    }

    /// Merging `node` keeps the tree restricted.
    fn merge_keeps_balance(&self, node: &QuadNode) -> bool {
        Edge::ALL.into_iter().all(|edge| {
            let (n, back) = node.neighbor_with_edge(edge);
            !(self.internal.contains(&n)
                && n.edge_children(back)
                    .iter()
                    .any(|c| self.internal.contains(c)))
        })
    }

    fn mergeable(&self, node: &QuadNode) -> bool {
        self.internal.contains(node) && node.children().iter().all(|c| self.leaves.contains(c))
    }

    /// Bit set for each edge whose neighbor leaf is one level coarser.
    pub fn stitch_mask(&self, leaf: &QuadNode) -> u8 {
        Edge::ALL
            .into_iter()
            .filter(|&edge| {
                let n = leaf.neighbor(edge);
                !self.leaves.contains(&n) && !self.internal.contains(&n)
            })
            .fold(0, |mask, edge| mask | edge.bit())
    }

    pub fn stitch_masks(&self) -> BTreeMap<QuadNode, u8> {
        self.leaves.iter().map(|l| (*l, self.stitch_mask(l))).collect()
    }

    /// No leaf borders a leaf more than one level finer (or coarser).
    pub fn is_restricted(&self) -> bool {
        !self.leaves.iter().any(|l| self.needs_balance_split(l))
    }

    /// Refines and coarsens the tree for a new camera position.
    ///
    /// A leaf splits while its distance is below `split_factor` node arc
    /// lengths; a parent of four leaves merges once its distance exceeds
    /// `hysteresis * split_factor` arc lengths and the merge keeps the tree
    /// restricted. Balance splits are added after predicate splits.
    pub fn update(&mut self, camera: &CameraState) -> Result<LodUpdate, LodError> {
        camera.validate()?;
        let before = self.leaves.clone();
        let config = self.config;
        let band = self.band.clone();
        let mut field = DistanceField::new(&config, band.as_deref(), camera.position);

        let mut work: Vec<QuadNode> = self
            .leaves
            .iter()
            .copied()
            .filter(|l| field.wants_split(*l))
            .collect();
        while let Some(node) = work.pop() {
            if !self.leaves.contains(&node) {
                continue;
            }
            self.split(node);
            work.extend(node.children().into_iter().filter(|c| field.wants_split(*c)));
        }

        self.restrict();

        loop {
            let mut candidates: Vec<QuadNode> = self
                .leaves
                .iter()
                .filter(|l| l.depth > 0 && l.x % 2 == 0 && l.y % 2 == 0)
                .filter_map(|l| l.parent())
                .filter(|p| self.mergeable(p))
                .collect();
            candidates.sort_by(|a, b| b.depth.cmp(&a.depth).then(a.cmp(b)));
            let mut merged = false;
            for p in candidates {
                if self.mergeable(&p) && field.wants_merge(p) && self.merge_keeps_balance(&p) {
                    self.merge(p);
                    merged = true;
                }
            }
            if !merged {
                break;
            }
        }

        Ok(LodUpdate {
            added: self.leaves.difference(&before).copied().collect(),
            removed: before.difference(&self.leaves).copied().collect(),
            stitch_masks: self.stitch_masks(),
        })
    }
}
