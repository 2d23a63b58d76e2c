//! Planet configuration file and the [`Planet`] handle built from it.

use std::collections::HashMap;
use std::path::Path;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lod::{face_uv_to_sphere, HeightBand, LodConfig, QuadNode, QuadTree, MAX_SUPPORTED_DEPTH};
use crate::mesh::{build_tile, build_tile_geometry, MeshError, TileGeometry, TileMesh, DEFAULT_RESOLUTION};
use crate::noise::NoiseSeed;
use crate::scene::{ephemeris_at, place_clouds, place_trees, DecorationConfig, Ephemeris, SceneError, SceneInstance};
use crate::terrain::{Generator, LayeredPlanetParams, SeededGenerator, SimplePlanetParams, SurfaceSampler};

/// Largest accepted tile resolution.
pub const MAX_RESOLUTION: u32 = 256;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot parse config: {0}")]
    Parse(String),
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorKind {
    Simple,
    Layered,
}

fn default_resolution() -> u32 {
    DEFAULT_RESOLUTION
}
fn default_max_depth() -> u8 {
    14
}
fn default_split_factor() -> f64 {
    1.5
}
fn default_hysteresis() -> f64 {
    1.2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanetConfig {
    pub seed: NoiseSeed,
    pub base_radius_m: f64,
    pub generator: GeneratorKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simple: Option<SimplePlanetParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub layered: Option<LayeredPlanetParams>,
    #[serde(default = "default_resolution")]
    pub resolution: u32,
    #[serde(default = "default_max_depth")]
    pub max_depth: u8,
    #[serde(default = "default_split_factor")]
    pub split_factor: f64,
    #[serde(default = "default_hysteresis")]
    pub hysteresis: f64,
    #[serde(default)]
    pub decoration: DecorationConfig,
}

impl PlanetConfig {
    pub fn simple(seed: u64, params: SimplePlanetParams) -> PlanetConfig {
        PlanetConfig {
            seed: NoiseSeed(seed),
            base_radius_m: 1_000_000.0,
            generator: GeneratorKind::Simple,
            simple: Some(params),
            layered: None,
            resolution: DEFAULT_RESOLUTION,
            max_depth: default_max_depth(),
            split_factor: default_split_factor(),
            hysteresis: default_hysteresis(),
            decoration: DecorationConfig::default(),
        }
    }

    pub fn layered(seed: u64, params: LayeredPlanetParams) -> PlanetConfig {
        PlanetConfig {
            generator: GeneratorKind::Layered,
            simple: None,
            layered: Some(params),
            ..PlanetConfig::simple(seed, SimplePlanetParams::default())
        }
    }

    pub fn from_json(text: &str) -> Result<PlanetConfig, ConfigError> {
        serde_json::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Reads and validates a config file.
    pub fn load(path: impl AsRef<Path>) -> Result<PlanetConfig, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let config = PlanetConfig::from_json(&text)?;
        config.validate()?;
        Ok(config)
    }

    /// The generator block selected by `generator`.
    pub fn generator(&self) -> Result<Generator, ConfigError> {
        let invalid = |m: &str| Err(ConfigError::Invalid(m.to_string()));
        match (self.generator, &self.simple, &self.layered) {
            (_, Some(_), Some(_)) => invalid("exactly one generator parameter block may be present"),
            (GeneratorKind::Simple, Some(p), None) => Ok(Generator::Simple(*p)),
            (GeneratorKind::Layered, None, Some(p)) => Ok(Generator::Layered(p.clone())),
            (GeneratorKind::Simple, _, _) => invalid("generator \"simple\" needs a \"simple\" block"),
            (GeneratorKind::Layered, _, _) => invalid("generator \"layered\" needs a \"layered\" block"),
        }
    }

    pub fn lod_config(&self) -> Result<LodConfig, ConfigError> {
        let generator = self.generator()?;
        let lod = LodConfig {
            base_radius_m: self.base_radius_m,
            max_relief_m: generator.max_relief(),
            split_factor: self.split_factor,
            hysteresis: self.hysteresis,
            max_depth: self.max_depth,
        };
        lod.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(lod)
    }

    /// Checks every nested invariant and names the first violation.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |m: String| ConfigError::Invalid(m);
        if !(self.base_radius_m.is_finite() && self.base_radius_m > 0.0) {
            return Err(invalid("base_radius_m > 0".into()));
        }
        self.generator()?
            .validate()
            .map_err(|e| invalid(e.to_string()))?;
        if !(2..=MAX_RESOLUTION).contains(&self.resolution) || self.resolution % 2 != 0 {
            return Err(invalid(format!(
                "resolution must be even and in [2, {MAX_RESOLUTION}], got {}",
                self.resolution
            )));
        }
        if self.max_depth > MAX_SUPPORTED_DEPTH {
            return Err(invalid(format!("max_depth ≤ {MAX_SUPPORTED_DEPTH}")));
        }
        self.lod_config()?;
        self.decoration
            .validate()
            .map_err(|e| invalid(e.to_string()))
    }
}

/// A validated planet: generator bound to its seed plus LOD settings.
#[derive(Debug, Clone)]
pub struct Planet {
    config: PlanetConfig,
    sampler: SeededGenerator,
    lod: LodConfig,
}

impl Planet {
    pub fn new(config: PlanetConfig) -> Result<Planet, ConfigError> {
        config.validate()?;
        let sampler = SeededGenerator {
            generator: config.generator()?,
            seed: config.seed,
        };
        let lod = config.lod_config()?;
        Ok(Planet { config, sampler, lod })
    }

    pub fn config(&self) -> &PlanetConfig {
        &self.config
    }

    pub fn sampler(&self) -> &SeededGenerator {
        &self.sampler
    }

    pub fn generator(&self) -> &Generator {
        &self.sampler.generator
    }

    pub fn lod_config(&self) -> LodConfig {
        self.lod
    }

    /// Empty quadtree whose bounding spheres follow this planet's terrain.
    pub fn quad_tree(&self) -> QuadTree {
        let band = TerrainBand::new(self.sampler.clone(), self.lod.max_relief_m);
        QuadTree::new(self.lod)
            .expect("validated in Planet::new")
            .with_height_band(Arc::new(band))
    }

    pub fn base_radius(&self) -> f64 {
        self.config.base_radius_m
    }

    pub fn tree_threshold(&self) -> u8 {
        self.config.decoration.trees.threshold(self.config.max_depth)
    }

    pub fn build_tile(&self, node: QuadNode, stitch_mask: u8) -> Result<TileMesh, MeshError> {
        build_tile(node, stitch_mask, &self.sampler, self.config.resolution, self.config.base_radius_m)
    }

    pub fn build_geometry(&self, node: QuadNode, stitch_mask: u8) -> Result<TileGeometry, MeshError> {
        build_tile_geometry(node, stitch_mask, &self.sampler, self.config.resolution, self.config.base_radius_m)
    }

    pub fn trees(&self, node: &QuadNode) -> Result<Vec<SceneInstance>, SceneError> {
        place_trees(
            node,
            &self.sampler,
            self.config.base_radius_m,
            self.config.seed,
            &self.config.decoration.trees,
            self.tree_threshold(),
        )
    }

    pub fn clouds(&self) -> Vec<SceneInstance> {
        place_clouds(self.config.seed, &self.config.decoration.clouds, self.config.base_radius_m)
    }

    pub fn ephemeris(&self, time: f64) -> Result<Ephemeris, SceneError> {
        ephemeris_at(time, &self.config.decoration.orbit, self.config.base_radius_m)
    }
}

/// Samples per side of the grid a node's height band is estimated from.
const BAND_GRID: u32 = 5;
/// Cached bands kept before the cache is dropped and refilled.
const BAND_CACHE_LIMIT: usize = 1 << 20;

/// Displacement range of each node estimated from a grid of terrain samples,
/// widened by half the sampled spread on each side and clamped to
/// `[ocean_level, max_relief]`. Falls back to the full range if sampling fails.
#[derive(Debug)]
pub struct TerrainBand {
    sampler: SeededGenerator,
    max_relief: f64,
    cache: Mutex<HashMap<QuadNode, (f64, f64)>>,
}

impl TerrainBand {
    pub fn new(sampler: SeededGenerator, max_relief: f64) -> TerrainBand {
        TerrainBand {
            sampler,
            max_relief,
            cache: Mutex::new(HashMap::new()),
        }
    }

    fn estimate(&self, node: &QuadNode) -> (f64, f64) {
        let floor = self.sampler.generator.ocean_level().min(self.max_relief);
        let full = (floor, self.max_relief);
        let (u0, v0, u1, v1) = node.uv_bounds();
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for j in 0..BAND_GRID {
            for i in 0..BAND_GRID {
                let s = i as f64 / (BAND_GRID - 1) as f64;
                let t = j as f64 / (BAND_GRID - 1) as f64;
                let sample = face_uv_to_sphere(node.face, u0 + s * (u1 - u0), v0 + t * (v1 - v0))
                    .ok()
                    .and_then(|dir| self.sampler.sample(dir).ok());
                let Some(sample) = sample else {
                    return full;
                };
                lo = lo.min(sample.displacement);
                hi = hi.max(sample.displacement);
            }
        }
        let margin = 0.5 * (hi - lo);
        ((lo - margin).max(floor), (hi + margin).min(self.max_relief))
    }
}

impl HeightBand for TerrainBand {
    fn band(&self, node: &QuadNode) -> (f64, f64) {
        if let Some(&b) = self.cache.lock().unwrap().get(node) {
            return b;
        }
        let b = self.estimate(node);
        let mut cache = self.cache.lock().unwrap();
        if cache.len() >= BAND_CACHE_LIMIT {
            cache.clear();
        }
        cache.insert(*node, b);
        b
    }
}

/// Every node at `depth`, sorted by address.
pub fn uniform_nodes(depth: u8) -> Vec<QuadNode> {
    let n = 1u32 << depth;
    let mut nodes = Vec::with_capacity(6 * (n as usize).pow(2));
    for face in 0..6 {
        for y in 0..n {
            for x in 0..n {
                nodes.push(QuadNode { face, depth, x, y });
            }
        }
    }
    nodes.sort();
    nodes
}
