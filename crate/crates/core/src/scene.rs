//! Decoration: trees per tile, cloud spawners per planet, sun and moon.
//!
//! Tree candidates are generated once per cell at the tree LOD threshold and
//! handed to whichever descendant tile contains them, so refining or
//! coarsening tiles above the threshold never moves a tree.

use glam::DVec3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lod::{face_uv_to_sphere, QuadNode};
use crate::noise::{mix64, NoiseSeed};
use crate::terrain::{Biome, SurfaceSampler, TerrainError};

const CLOUD_STREAM: u64 = 0xC10D_5EED;
const TREE_STREAM: u64 = 0x7AEE_5EED;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SceneError {
    #[error("time must be finite, got {0}")]
    NonFiniteTime(f64),
    #[error("invalid decoration configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Terrain(#[from] TerrainError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InstanceKind {
    TreePalm,
    TreeNormal,
    Cloud,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SceneInstance {
    pub kind: InstanceKind,
    /// Planet-centered meters.
    pub anchor: DVec3,
    /// Radians about the local up axis.
    pub rotation: f64,
    pub scale: f64,
    /// Trunk extension below the anchor, meters.
    pub embed_depth: f64,
    /// Tile the instance belongs to, when it belongs to one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tile: Option<QuadNode>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TreeConfig {
    /// Minimum tile depth that carries trees; `None` means `max_depth - 2`.
    pub lod_threshold: Option<u8>,
    /// Expected trees per threshold-depth tile in each biome.
    pub density_forest: f64,
    pub density_grassland: f64,
    pub density_beach: f64,
    pub scale_min: f64,
    pub scale_max: f64,
    pub embed_depth_m: f64,
}

impl Default for TreeConfig {
    fn default() -> Self {
        TreeConfig {
            lod_threshold: None,
            density_forest: 24.0,
            density_grassland: 8.0,
            density_beach: 6.0,
            scale_min: 0.7,
            scale_max: 1.3,
            embed_depth_m: 2.0,
        }
    }
}

impl TreeConfig {
    pub fn threshold(&self, max_depth: u8) -> u8 {
        self.lod_threshold.unwrap_or(max_depth.saturating_sub(2))
    }

    /// Mountains, oceans and lava carry no trees.
    pub fn density(&self, biome: Biome) -> f64 {
        match biome {
            Biome::Forest => self.density_forest,
            Biome::Grassland => self.density_grassland,
            Biome::Beach => self.density_beach,
            Biome::Ocean | Biome::Mountain | Biome::Lava => 0.0,
        }
    }

    fn max_density(&self) -> f64 {
        self.density_forest
            .max(self.density_grassland)
            .max(self.density_beach)
    }

    pub fn validate(&self) -> Result<(), SceneError> {
        let densities = [self.density_forest, self.density_grassland, self.density_beach];
        if densities.iter().any(|d| !(d.is_finite() && *d >= 0.0 && *d <= 10_000.0)) {
            return Err(SceneError::InvalidConfig("tree densities in [0, 10000]".into()));
        }
        if !(self.scale_min > 0.0 && self.scale_min <= self.scale_max && self.scale_max.is_finite()) {
            return Err(SceneError::InvalidConfig("0 < tree scale_min ≤ scale_max".into()));
        }
        if !(self.embed_depth_m.is_finite() && self.embed_depth_m > 0.0) {
            return Err(SceneError::InvalidConfig("tree embed_depth > 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CloudConfig {
    pub count: u32,
    /// Meters above the base radius.
    pub altitude_m: f64,
    pub scale_min: f64,
    pub scale_max: f64,
}

impl Default for CloudConfig {
    fn default() -> Self {
        CloudConfig {
            count: 64,
            altitude_m: 20_000.0,
            scale_min: 0.5,
            scale_max: 2.5,
        }
    }
}

impl CloudConfig {
    pub fn validate(&self) -> Result<(), SceneError> {
        if !(self.altitude_m.is_finite() && self.altitude_m >= 0.0) {
            return Err(SceneError::InvalidConfig("cloud altitude ≥ 0".into()));
        }
        if !(self.scale_min > 0.0 && self.scale_min <= self.scale_max && self.scale_max.is_finite()) {
            return Err(SceneError::InvalidConfig("0 < cloud scale_min ≤ scale_max".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OrbitConfig {
    pub sun_period_s: f64,
    pub moon_period_s: f64,
    /// Moon orbit radius in planet radii.
    pub moon_orbit_radii: f64,
    /// Sun distance in planet radii, for drawing the sun sphere.
    pub sun_distance_radii: f64,
    pub moon_inclination_deg: f64,
}

impl Default for OrbitConfig {
    fn default() -> Self {
        OrbitConfig {
            sun_period_s: 1200.0,
            moon_period_s: 300.0,
            moon_orbit_radii: 4.0,
            sun_distance_radii: 60.0,
            moon_inclination_deg: 5.0,
        }
    }
}

impl OrbitConfig {
    pub fn validate(&self) -> Result<(), SceneError> {
        if !(self.sun_period_s.is_finite() && self.sun_period_s > 0.0) {
            return Err(SceneError::InvalidConfig("sun_period > 0".into()));
        }
        if !(self.moon_period_s > 0.0 && self.moon_period_s < self.sun_period_s) {
            return Err(SceneError::InvalidConfig("0 < moon_period < sun_period".into()));
        }
        if !(self.moon_orbit_radii > 1.0 && self.moon_orbit_radii < self.sun_distance_radii)
            || !self.sun_distance_radii.is_finite()
        {
            return Err(SceneError::InvalidConfig(
                "1 < moon_orbit_radii < sun_distance_radii".into(),
            ));
        }
        if !self.moon_inclination_deg.is_finite() {
            return Err(SceneError::InvalidConfig("moon inclination must be finite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct DecorationConfig {
    pub trees: TreeConfig,
    pub clouds: CloudConfig,
    pub orbit: OrbitConfig,
}

impl DecorationConfig {
    pub fn validate(&self) -> Result<(), SceneError> {
        self.trees.validate()?;
        self.clouds.validate()?;
        self.orbit.validate()
    }
}

fn tile_rng(seed: NoiseSeed, node: &QuadNode) -> ChaCha8Rng {
    let mut h = mix64(seed.derive(TREE_STREAM).0 ^ node.face as u64);
    h = mix64(h ^ ((node.depth as u64) << 56));
    h = mix64(h ^ node.x as u64);
    h = mix64(h ^ ((node.y as u64) << 32));
    ChaCha8Rng::seed_from_u64(h)
}

/// Trees standing on `node`.
///
/// Tiles shallower than `lod_threshold` get none. Otherwise the threshold-depth
/// ancestor draws `max_density` candidate spots on its face patch; each spot
/// inside `node` survives with probability `density(biome) / max_density`.
/// Beach trees are palms. Anchors sit on the displaced surface.
pub fn place_trees<S: SurfaceSampler + ?Sized>(
    node: &QuadNode,
    sampler: &S,
    base_radius: f64,
    seed: NoiseSeed,
    config: &TreeConfig,
    lod_threshold: u8,
) -> Result<Vec<SceneInstance>, SceneError> {
    let Some(anchor_cell) = node.ancestor_at(lod_threshold) else {
        return Ok(Vec::new());
    };
    let max_density = config.max_density();
    if max_density <= 0.0 {
        return Ok(Vec::new());
    }

    let mut rng = tile_rng(seed, &anchor_cell);
    let (a_u0, a_v0, a_u1, a_v1) = anchor_cell.uv_bounds();
    let (u0, v0, u1, v1) = node.uv_bounds();
    let candidates = max_density.round() as usize;
    let mut trees = Vec::new();
    for _ in 0..candidates {
        let s: f64 = rng.gen();
        let t: f64 = rng.gen();
        let keep: f64 = rng.gen();
        let rotation = rng.gen_range(0.0..std::f64::consts::TAU);
        let scale = rng.gen_range(config.scale_min..=config.scale_max);

        let u = a_u0 + (a_u1 - a_u0) * s;
        let v = a_v0 + (a_v1 - a_v0) * t;
        if !(u >= u0 && u < u1 && v >= v0 && v < v1) {
            continue;
        }
        let dir = face_uv_to_sphere(node.face, u, v).expect("uv inside the face");
        let sample = sampler.sample(dir)?;
        if keep >= config.density(sample.biome) / max_density {
            continue;
        }
        let kind = if sample.biome == Biome::Beach {
            InstanceKind::TreePalm
        } else {
            InstanceKind::TreeNormal
        };
        trees.push(SceneInstance {
            kind,
            anchor: dir * (base_radius + sample.displacement),
            rotation,
            scale,
            embed_depth: config.embed_depth_m,
            tile: Some(*node),
        });
    }
    Ok(trees)
}

/// Cloud spawners at uniformly random directions around the planet.
pub fn place_clouds(seed: NoiseSeed, config: &CloudConfig, base_radius: f64) -> Vec<SceneInstance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.derive(CLOUD_STREAM).0);
    (0..config.count)
        .map(|_| {
            let z: f64 = rng.gen_range(-1.0..=1.0);
            let phi = rng.gen_range(0.0..std::f64::consts::TAU);
            let r = (1.0 - z * z).max(0.0).sqrt();
            let dir = DVec3::new(r * phi.cos(), r * phi.sin(), z);
            SceneInstance {
                kind: InstanceKind::Cloud,
                anchor: dir * (base_radius + config.altitude_m),
                rotation: rng.gen_range(0.0..std::f64::consts::TAU),
                scale: rng.gen_range(config.scale_min..=config.scale_max),
                embed_depth: 0.0,
                tile: None,
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ephemeris {
    pub sun_direction: DVec3,
    /// Planet-centered meters.
    pub moon_position: DVec3,
    /// 0 is new moon, 1 is full.
    pub moon_phase: f64,
    pub time: f64,
}

/// Illuminated fraction `(1 - cos θ) / 2`, θ the sun-planet-moon angle.
pub fn lunar_phase(sun_direction: DVec3, moon_direction: DVec3) -> f64 {
    let cos = sun_direction.dot(moon_direction).clamp(-1.0, 1.0);
    ((1.0 - cos) * 0.5).clamp(0.0, 1.0)
}

/// Sun and moon at `time`. The sun direction turns in the equatorial plane
/// from +X; the moon circles faster on a slightly inclined orbit.
pub fn ephemeris_at(time: f64, orbit: &OrbitConfig, base_radius: f64) -> Result<Ephemeris, SceneError> {
    if !time.is_finite() {
        return Err(SceneError::NonFiniteTime(time));
    }
    let tau = std::f64::consts::TAU;
    let sun_angle = tau * (time / orbit.sun_period_s).fract();
    let moon_angle = tau * (time / orbit.moon_period_s).fract();
    let sun_direction = DVec3::new(sun_angle.cos(), sun_angle.sin(), 0.0);
    let incl = orbit.moon_inclination_deg.to_radians();
    let moon_direction = DVec3::new(
        moon_angle.cos(),
        moon_angle.sin() * incl.cos(),
        moon_angle.sin() * incl.sin(),
    );
    Ok(Ephemeris {
        sun_direction,
        moon_position: moon_direction * (orbit.moon_orbit_radii * base_radius),
        moon_phase: lunar_phase(sun_direction, moon_direction),
        time,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::terrain::SurfaceSample;

    struct Uniform(Biome);

    impl SurfaceSampler for Uniform {
        fn sample(&self, _dir: DVec3) -> Result<SurfaceSample, TerrainError> {
            Ok(SurfaceSample {
                displacement: 40.0,
                biome: self.0,
                layers: None,
            })
        }
    }

    fn node() -> QuadNode {
        QuadNode::new(2, 6, 17, 40).unwrap()
    }

    #[test]
    fn no_trees_on_mountains_or_oceans() {
        for biome in [Biome::Mountain, Biome::Ocean, Biome::Lava] {
            let trees = place_trees(&node(), &Uniform(biome), 1e6, NoiseSeed(1), &TreeConfig::default(), 6).unwrap();
            assert!(trees.is_empty(), "{biome:?}");
        }
    }

    #[test]
    fn beach_tiles_grow_palms() {
        let trees = place_trees(&node(), &Uniform(Biome::Beach), 1e6, NoiseSeed(1), &TreeConfig::default(), 6).unwrap();
        assert!(!trees.is_empty());
        assert!(trees.iter().all(|t| t.kind == InstanceKind::TreePalm));
        let trees = place_trees(&node(), &Uniform(Biome::Forest), 1e6, NoiseSeed(1), &TreeConfig::default(), 6).unwrap();
        assert_eq!(trees.len(), 24);
        assert!(trees.iter().all(|t| t.kind == InstanceKind::TreeNormal));
    }

    #[test]
    fn shallow_tiles_have_no_trees() {
        let trees = place_trees(&node(), &Uniform(Biome::Forest), 1e6, NoiseSeed(1), &TreeConfig::default(), 7).unwrap();
        assert!(trees.is_empty());
    }

    #[test]
    fn children_partition_parent_trees() {
        let sampler = Uniform(Biome::Forest);
        let config = TreeConfig::default();
        let parent = place_trees(&node(), &sampler, 1e6, NoiseSeed(9), &config, 6).unwrap();
        let mut from_children: Vec<SceneInstance> = node()
            .children()
            .iter()
            .flat_map(|c| place_trees(c, &sampler, 1e6, NoiseSeed(9), &config, 6).unwrap())
            .collect();
        assert_eq!(parent.len(), from_children.len());
        from_children.sort_by(|a, b| a.rotation.total_cmp(&b.rotation));
        let mut parent = parent;
        parent.sort_by(|a, b| a.rotation.total_cmp(&b.rotation));
        for (p, c) in parent.iter().zip(&from_children) {
            assert_eq!(p.anchor, c.anchor);
            assert_eq!(p.scale, c.scale);
        }
    }

    #[test]
    fn clouds_count_and_altitude() {
        let config = CloudConfig::default();
        assert!(place_clouds(NoiseSeed(1), &CloudConfig { count: 0, ..config }, 1e6).is_empty());
        let clouds = place_clouds(NoiseSeed(1), &config, 1e6);
        assert_eq!(clouds.len(), config.count as usize);
        for c in &clouds {
            assert!((c.anchor.length() - (1e6 + config.altitude_m)).abs() < 1e-6);
            assert!(c.scale >= config.scale_min && c.scale <= config.scale_max);
            assert_eq!(c.embed_depth, 0.0);
        }
        assert_eq!(clouds, place_clouds(NoiseSeed(1), &config, 1e6));
    }

    #[test]
    fn ephemeris_conventions() {
        let orbit = OrbitConfig::default();
        let e = ephemeris_at(0.0, &orbit, 1000.0).unwrap();
        assert_eq!(e.sun_direction, DVec3::X);
        assert_eq!(e.moon_phase, 0.0);
        assert!((e.moon_position.length() - 4000.0).abs() < 1e-9);
        assert_eq!(lunar_phase(DVec3::Y, DVec3::Y), 0.0);
        assert_eq!(lunar_phase(DVec3::Y, -DVec3::Y), 1.0);
        assert!(ephemeris_at(f64::NAN, &orbit, 1000.0).is_err());
    }

    #[test]
    fn instance_json_shape() {
        let c = place_clouds(NoiseSeed(3), &CloudConfig { count: 1, ..Default::default() }, 10.0)[0];
        let v = serde_json::to_value(c).unwrap();
        assert_eq!(v["kind"], "cloud");
        assert_eq!(v["anchor"].as_array().unwrap().len(), 3);
        assert!(v.get("tile").is_none());
        for key in ["rotation", "scale", "embed_depth"] {
            assert!(v[key].is_number());
        }
    }
}
