//! Tile meshes: displaced, stitched vertex grids for quadtree nodes, plus the
//! OBJ exporter and the binary `PTIL` tile codec.
//!
//! Geometry is built in double precision ([`TileGeometry`]) and then stored
//! relative to a double-precision tile center in single precision
//! ([`TileMesh`]).

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use glam::{DVec3, Vec3};
use thiserror::Error;

use crate::lod::{face_lattice_dir, Edge, QuadNode};
use crate::terrain::{Biome, SurfaceSampler, TerrainError};

pub const DEFAULT_RESOLUTION: u32 = 16;

pub const TILE_MAGIC: [u8; 4] = *b"PTIL";
pub const TILE_VERSION: u32 = 1;
pub const TILE_HEADER_LEN: usize = 32;

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("tile resolution must be at least 2, got {0}")]
    ResolutionTooSmall(u32),
    #[error("stitching needs an even resolution, got {0}")]
    OddResolution(u32),
    #[error("invalid node {0}")]
    InvalidNode(QuadNode),
    #[error("no tiles to export")]
    EmptyTileList,
    #[error(transparent)]
    Terrain(#[from] TerrainError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DecodeError {
    #[error("bad magic {0:?}, expected \"PTIL\"")]
    BadMagic([u8; 4]),
    #[error("unsupported tile format version {0}")]
    UnsupportedVersion(u32),
    #[error("truncated tile: need {needed} bytes, have {available}")]
    Truncated { needed: usize, available: usize },
    #[error("{0} unexpected trailing bytes")]
    TrailingBytes(usize),
    #[error("index {index} out of range for {vertex_count} vertices")]
    IndexOutOfRange { index: u32, vertex_count: u32 },
    #[error("unknown biome id {0}")]
    BadBiome(u8),
    #[error("inconsistent header: {0}")]
    Inconsistent(String),
}

/// Tile geometry in absolute double-precision coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct TileGeometry {
    pub node: QuadNode,
    pub resolution: u32,
    pub stitch_mask: u8,
    /// Displaced surface point at the node's center direction.
    pub center: DVec3,
    pub positions: Vec<DVec3>,
    pub normals: Vec<DVec3>,
    pub biomes: Vec<Biome>,
    pub displacements: Vec<f64>,
    pub indices: Vec<u32>,
    /// Vertices whose normal fell back to the radial direction.
    pub radial_fallbacks: usize,
}

impl TileGeometry {
    pub fn vertex_index(&self, i: u32, j: u32) -> usize {
        (j * (self.resolution + 1) + i) as usize
    }

    /// Vertex indices along `edge`, ordered by increasing grid coordinate.
    pub fn edge_vertices(&self, edge: Edge) -> Vec<usize> {
        edge_vertex_indices(self.resolution, edge)
    }

    /// Single-precision, center-relative form of this geometry.
    pub fn to_mesh(&self) -> TileMesh {
        TileMesh {
            node: self.node,
            resolution: self.resolution,
            center: self.center,
            positions: self
                .positions
                .iter()
                .map(|&p| relative_to_center(self.center, p))
                .collect(),
            normals: self.normals.iter().map(|n| n.as_vec3()).collect(),
            biomes: self.biomes.clone(),
            indices: self.indices.clone(),
        }
    }
}

fn edge_vertex_indices(resolution: u32, edge: Edge) -> Vec<usize> {
    let side = resolution + 1;
    (0..side)
        .map(|k| {
            let (i, j) = match edge {
                Edge::South => (k, 0),
                Edge::North => (k, resolution),
                Edge::West => (0, k),
                Edge::East => (resolution, k),
            };
            (j * side + i) as usize
        })
        .collect()
}

/// `dir * radius`, nudged outward until its computed length reaches `radius`.
fn surface_point(dir: DVec3, radius: f64) -> DVec3 {
    let mut p = dir * radius;
    for _ in 0..4 {
        if p.length() >= radius {
            break;
        }
        p *= 1.0 + f64::EPSILON;
    }
    p
}

/// Single-precision offset of `p` from `center`, rounded so the reconstructed
/// point `center + offset` is never closer to the planet center than `p`.
/// Quantized terrain then never dips below the radius it was generated at.
///
/// Tries round-to-nearest first, then the closest of the eight f32 corners
/// around the exact offset that satisfies the radius bound.
fn relative_to_center(center: DVec3, p: DVec3) -> Vec3 {
    let target = p.length();
    let exact = p - center;
    let nearest = exact.as_vec3();
    let reaches = |rel: Vec3| (center + rel.as_dvec3()).length() >= target;
    if reaches(nearest) {
        return nearest;
    }
    let bracket = |x: f64| {
        let r = x as f32;
        if (r as f64) < x {
            [r, r.next_up()]
        } else if (r as f64) > x {
            [r.next_down(), r]
        } else {
            [r, r]
        }
    };
    let (bx, by, bz) = (bracket(exact.x), bracket(exact.y), bracket(exact.z));
    let mut best: Option<(f64, Vec3)> = None;
    for k in 0..8 {
        let rel = Vec3::new(bx[k & 1], by[(k >> 1) & 1], bz[(k >> 2) & 1]);
        if !reaches(rel) {
            continue;
        }
        let err = (rel.as_dvec3() - exact).length_squared();
        if best.map_or(true, |(e, _)| err < e) {
            best = Some((err, rel));
        }
    }
    if let Some((_, rel)) = best {
        return rel;
    }
    // rounding in `reaches` itself can still fall short; step outward
    let mut rel = nearest;
    for _ in 0..8 {
        if reaches(rel) {
            break;
        }
        let out = |v: f32, s: f64| {
            if s > 0.0 {
                v.next_up()
            } else if s < 0.0 {
                v.next_down()
            } else {
                v
            }
        };
        rel = Vec3::new(out(rel.x, p.x), out(rel.y, p.y), out(rel.z, p.z));
    }
    rel
}

/// Tile mesh as shipped to clients: positions are single precision relative
/// to a double-precision center.
#[derive(Debug, Clone, PartialEq)]
pub struct TileMesh {
    pub node: QuadNode,
    pub resolution: u32,
    pub center: DVec3,
    pub positions: Vec<Vec3>,
    pub normals: Vec<Vec3>,
    pub biomes: Vec<Biome>,
    pub indices: Vec<u32>,
}

impl TileMesh {
    pub fn vertex_count(&self) -> usize {
        self.positions.len()
    }

    pub fn triangle_count(&self) -> usize {
        self.indices.len() / 3
    }

    pub fn absolute_position(&self, i: usize) -> DVec3 {
        self.center + self.positions[i].as_dvec3()
    }

    pub fn absolute_positions(&self) -> impl Iterator<Item = DVec3> + '_ {
        (0..self.positions.len()).map(|i| self.absolute_position(i))
    }

    /// Byte length of [`encode_tile`]'s output.
    pub fn encoded_len(&self) -> usize {
        encoded_len(self.positions.len(), self.indices.len())
    }
}

/// `32 + 24 + 12V + 12V + V + pad + 4I`.
pub fn encoded_len(vertices: usize, indices: usize) -> usize {
    let before_pad = TILE_HEADER_LEN + 24 + 24 * vertices + vertices;
    before_pad.next_multiple_of(4) + 4 * indices
}

fn grid_indices(resolution: u32) -> Vec<u32> {
    let side = resolution + 1;
    let mut indices = Vec::with_capacity((6 * resolution * resolution) as usize);
    for j in 0..resolution {
        for i in 0..resolution {
            let v00 = j * side + i;
            let v10 = v00 + 1;
            let v01 = v00 + side;
            let v11 = v01 + 1;
            // counter-clockwise seen from outside (u x v is the outward normal)
            indices.extend_from_slice(&[v00, v10, v11, v00, v11, v01]);
        }
    }
    indices
}

/// Per-vertex normals from central differences of the displaced surface.
///
/// Tangents are taken `step` radians either side of each direction along the
/// face's u and v axes. Degenerate or non-finite results fall back to the
/// radial direction and are counted in the second return value.
pub fn compute_normals<S: SurfaceSampler + ?Sized>(
    face: u8,
    dirs: &[DVec3],
    sampler: &S,
    base_radius: f64,
    step: f64,
) -> Result<(Vec<DVec3>, usize), MeshError> {
    let u_axis = crate::lod::face_cube_point(face, 1.0, 0.0) - crate::lod::face_cube_point(face, 0.0, 0.0);
    let v_axis = crate::lod::face_cube_point(face, 0.0, 1.0) - crate::lod::face_cube_point(face, 0.0, 0.0);
    let (cos, sin) = (step.cos(), step.sin());
    let surface = |d: DVec3| -> Result<DVec3, MeshError> {
        let d = d.normalize();
        Ok(d * (base_radius + sampler.sample(d)?.displacement))
    };

    let mut fallbacks = 0;
    let mut normals = Vec::with_capacity(dirs.len());
    for &d in dirs {
        let tu = (u_axis - d * u_axis.dot(d)).normalize_or_zero();
        let tv = (v_axis - d * v_axis.dot(d)).normalize_or_zero();
        let du = surface(d * cos + tu * sin)? - surface(d * cos - tu * sin)?;
        let dv = surface(d * cos + tv * sin)? - surface(d * cos - tv * sin)?;
        let n = du.cross(dv);
        let len = n.length();
        if !(len.is_finite() && len > f64::MIN_POSITIVE) || tu == DVec3::ZERO || tv == DVec3::ZERO {
            fallbacks += 1;
            normals.push(d);
            continue;
        }
        let n = n / len;
        normals.push(if n.dot(d) < 0.0 { -n } else { n });
    }
    Ok((normals, fallbacks))
}

/// Builds the absolute-coordinate geometry of one tile.
///
/// Vertex `(i, j)` sits on the face lattice with `2^depth * resolution` cells
/// per side, so neighboring tiles at the same depth produce bit-identical
/// shared edges. For each edge bit in `stitch_mask` the odd edge vertices are
/// moved to the midpoint of their even neighbors, matching the one level
/// coarser neighbor's edge.
pub fn build_tile_geometry<S: SurfaceSampler + ?Sized>(
    node: QuadNode,
    stitch_mask: u8,
    sampler: &S,
    resolution: u32,
    base_radius: f64,
) -> Result<TileGeometry, MeshError> {
    if resolution < 2 {
        return Err(MeshError::ResolutionTooSmall(resolution));
    }
    if stitch_mask & 0xF != 0 && resolution % 2 == 1 {
        return Err(MeshError::OddResolution(resolution));
    }
    if !node.is_valid() {
        return Err(MeshError::InvalidNode(node));
    }

    let side = resolution + 1;
    let cells = node.cells() * resolution as u64;
    let (gx, gy) = (node.x as u64 * resolution as u64, node.y as u64 * resolution as u64);
    let count = (side * side) as usize;
    let mut dirs = Vec::with_capacity(count);
    for j in 0..side as u64 {
        for i in 0..side as u64 {
            dirs.push(face_lattice_dir(node.face, cells, gx + i, gy + j));
        }
    }

    let mut positions = Vec::with_capacity(count);
    let mut biomes = Vec::with_capacity(count);
    let mut displacements = Vec::with_capacity(count);
    for &d in &dirs {
        let s = sampler.sample(d)?;
        positions.push(surface_point(d, base_radius + s.displacement));
        biomes.push(s.biome);
        displacements.push(s.displacement);
    }

    let center_dir = node.center_dir();
    let center = surface_point(center_dir, base_radius + sampler.sample(center_dir)?.displacement);

    let step = 0.5 * node.angular_size() / resolution as f64;
    let (normals, radial_fallbacks) = compute_normals(node.face, &dirs, sampler, base_radius, step)?;

    for edge in Edge::ALL {
        if stitch_mask & edge.bit() == 0 {
            continue;
        }
        let ids = edge_vertex_indices(resolution, edge);
        for k in (1..ids.len() - 1).step_by(2) {
            positions[ids[k]] = (positions[ids[k - 1]] + positions[ids[k + 1]]) * 0.5;
        }
    }

    Ok(TileGeometry {
        node,
        resolution,
        stitch_mask: stitch_mask & 0xF,
        center,
        positions,
        normals,
        biomes,
        displacements,
        indices: grid_indices(resolution),
        radial_fallbacks,
    })
}

/// [`build_tile_geometry`] followed by center-relative encoding.
pub fn build_tile<S: SurfaceSampler + ?Sized>(
    node: QuadNode,
    stitch_mask: u8,
    sampler: &S,
    resolution: u32,
    base_radius: f64,
) -> Result<TileMesh, MeshError> {
    Ok(build_tile_geometry(node, stitch_mask, sampler, resolution, base_radius)?.to_mesh())
}

/// Group name of a tile in OBJ output.
pub fn obj_group_name(node: &QuadNode) -> String {
    format!("f{}_d{}_x{}_y{}", node.face, node.depth, node.x, node.y)
}

/// Writes tiles as one OBJ document, sorted by node address, one group per
/// tile, with absolute positions and per-vertex normals.
pub fn write_obj<W: Write>(tiles: &[TileMesh], out: &mut W) -> Result<(), MeshError> {
    if tiles.is_empty() {
        return Err(MeshError::EmptyTileList);
    }
    let mut order: Vec<&TileMesh> = tiles.iter().collect();
    order.sort_by_key(|t| t.node);

    writeln!(out, "# planetgen tile export")?;
    writeln!(out, "o planet")?;
    let mut base = 1usize;
    for tile in order {
        writeln!(out, "g {}", obj_group_name(&tile.node))?;
        for p in tile.absolute_positions() {
            writeln!(out, "v {} {} {}", p.x, p.y, p.z)?;
        }
        for n in &tile.normals {
            writeln!(out, "vn {} {} {}", n.x, n.y, n.z)?;
        }
        for tri in tile.indices.chunks_exact(3) {
            let [a, b, c] = [tri[0], tri[1], tri[2]].map(|i| i as usize + base);
            writeln!(out, "f {a}//{a} {b}//{b} {c}//{c}")?;
        }
        base += tile.vertex_count();
    }
    Ok(())
}

/// Writes an OBJ file. Nothing is created when `tiles` is empty.
pub fn export_obj(tiles: &[TileMesh], path: impl AsRef<Path>) -> Result<(), MeshError> {
    if tiles.is_empty() {
        return Err(MeshError::EmptyTileList);
    }
    let mut out = BufWriter::new(File::create(path)?);
    write_obj(tiles, &mut out)?;
    out.flush()?;
    Ok(())
}

/// Encodes a tile in the little-endian `PTIL` format:
///
/// ```text
/// magic "PTIL" | version u32 | face u8 | depth u8 | pad u16 | x u32 | y u32
/// | resolution u32 | vertex_count u32 | index_count u32 | center f64x3
/// | positions f32x3xV | normals f32x3xV | biomes u8xV | pad to 4 | indices u32xI
/// ```
pub fn encode_tile(tile: &TileMesh) -> Vec<u8> {
    let v = tile.positions.len();
    let mut buf = Vec::with_capacity(tile.encoded_len());
    buf.extend_from_slice(&TILE_MAGIC);
    buf.extend_from_slice(&TILE_VERSION.to_le_bytes());
    buf.push(tile.node.face);
    buf.push(tile.node.depth);
    buf.extend_from_slice(&0u16.to_le_bytes());
    for word in [
        tile.node.x,
        tile.node.y,
        tile.resolution,
        v as u32,
        tile.indices.len() as u32,
    ] {
        buf.extend_from_slice(&word.to_le_bytes());
    }
    for c in tile.center.to_array() {
        buf.extend_from_slice(&c.to_le_bytes());
    }
    for p in tile.positions.iter().chain(&tile.normals) {
        for c in p.to_array() {
            buf.extend_from_slice(&c.to_le_bytes());
        }
    }
    buf.extend(tile.biomes.iter().map(|b| b.id()));
    buf.resize(buf.len().next_multiple_of(4), 0);
    for i in &tile.indices {
        buf.extend_from_slice(&i.to_le_bytes());
    }
    buf
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], DecodeError> {
        let end = self.pos + n;
        if end > self.bytes.len() {
            return Err(DecodeError::Truncated {
                needed: end,
                available: self.bytes.len(),
            });
        }
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N], DecodeError> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }

    fn u32(&mut self) -> Result<u32, DecodeError> {
        Ok(u32::from_le_bytes(self.array()?))
    }

    fn f32(&mut self) -> Result<f32, DecodeError> {
        Ok(f32::from_le_bytes(self.array()?))
    }

    fn f64(&mut self) -> Result<f64, DecodeError> {
        Ok(f64::from_le_bytes(self.array()?))
    }

    fn vec3s(&mut self, n: usize) -> Result<Vec<Vec3>, DecodeError> {
        (0..n)
            .map(|_| Ok(Vec3::new(self.f32()?, self.f32()?, self.f32()?)))
            .collect()
    }
}

pub fn decode_tile(bytes: &[u8]) -> Result<TileMesh, DecodeError> {
    let mut r = Reader { bytes, pos: 0 };
    let magic = r.array::<4>()?;
    if magic != TILE_MAGIC {
        return Err(DecodeError::BadMagic(magic));
    }
    let version = r.u32()?;
    if version != TILE_VERSION {
        return Err(DecodeError::UnsupportedVersion(version));
    }
    let [face, depth] = r.array::<2>()?;
    r.take(2)?;
    let (x, y) = (r.u32()?, r.u32()?);
    let resolution = r.u32()?;
    let vertex_count = r.u32()?;
    let index_count = r.u32()?;

    let node = QuadNode { face, depth, x, y };
    if !node.is_valid() {
        return Err(DecodeError::Inconsistent(format!("invalid node {node}")));
    }
    let side = resolution as u64 + 1;
    if side * side != vertex_count as u64 {
        return Err(DecodeError::Inconsistent(format!(
            "{vertex_count} vertices for resolution {resolution}"
        )));
    }
    let (v, i) = (vertex_count as usize, index_count as usize);
    let needed = encoded_len(v, i);
    if bytes.len() < needed {
        return Err(DecodeError::Truncated {
            needed,
            available: bytes.len(),
        });
    }
    if bytes.len() > needed {
        return Err(DecodeError::TrailingBytes(bytes.len() - needed));
    }

    let center = DVec3::new(r.f64()?, r.f64()?, r.f64()?);
    let positions = r.vec3s(v)?;
    let normals = r.vec3s(v)?;
    let biomes = r
        .take(v)?
        .iter()
        .map(|&id| Biome::from_id(id).ok_or(DecodeError::BadBiome(id)))
        .collect::<Result<Vec<_>, _>>()?;
    r.take(r.pos.next_multiple_of(4) - r.pos)?;
    let indices = (0..i)
        .map(|_| {
            let index = r.u32()?;
            if index >= vertex_count {
                return Err(DecodeError::IndexOutOfRange {
                    index,
                    vertex_count,
                });
            }
            Ok(index)
        })
        .collect::<Result<Vec<_>, _>>()?;

    Ok(TileMesh {
        node,
        resolution,
        center,
        positions,
        normals,
        biomes,
        indices,
    })
}
