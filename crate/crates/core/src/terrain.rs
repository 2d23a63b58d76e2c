//! Height and biome generators.
//!
//! Two generators share the [`SurfaceSampler`] interface:
//!
//! * **Simple**: one FBM field scaled by a base factor and clamped to the
//!   ocean level.
//! * **Layered**: four FBM fields (continentalness, erosion, peaks & valleys,
//!   temperature), each remapped through its own [`SplineCurve`]. The height
//!   factor is `(C + PV) * (1 - E)`; temperature only picks biomes.
//!
//! Both sample by 3D direction, so adjacent cube faces agree bit-exactly on
//! their shared edges.

use glam::DVec3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::noise::{fbm_dir, FbmParams, NoiseError, NoiseSeed, SamplingMode};
use crate::spline::SplineCurve;

/// Tolerance on `|dir| - 1` accepted by the generators.
pub const UNIT_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TerrainError {
    #[error("direction {0:?} is not unit length")]
    NotUnit([f64; 3]),
    #[error(transparent)]
    Noise(#[from] NoiseError),
    #[error("displacement {displacement} is below the ocean level {ocean_level}")]
    BelowOcean { displacement: f64, ocean_level: f64 },
    #[error("invalid terrain parameters: {0}")]
    InvalidParams(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
#[repr(u8)]
pub enum Biome {
    Ocean = 0,
    Beach = 1,
    Grassland = 2,
    Forest = 3,
    Mountain = 4,
    Lava = 5,
}

impl Biome {
    pub const ALL: [Biome; 6] = [
        Biome::Ocean,
        Biome::Beach,
        Biome::Grassland,
        Biome::Forest,
        Biome::Mountain,
        Biome::Lava,
    ];

    pub fn id(self) -> u8 {
        self as u8
    }

    pub fn from_id(id: u8) -> Option<Biome> {
        Biome::ALL.get(id as usize).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Biome::Ocean => "ocean",
            Biome::Beach => "beach",
            Biome::Grassland => "grassland",
            Biome::Forest => "forest",
            Biome::Mountain => "mountain",
            Biome::Lava => "lava",
        }
    }

    /// Ocean and lava are the two flat, clamped surfaces.
    pub fn is_liquid(self) -> bool {
        matches!(self, Biome::Ocean | Biome::Lava)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BiomeThresholds {
    /// Beach band height as a fraction of the amplitude scale.
    pub beach_band_fraction: f64,
    /// Displacements at or above `mountain_fraction * amplitude_scale` are mountains.
    pub mountain_fraction: f64,
    /// Clamped surfaces with temperature at or above this are lava.
    pub lava_threshold: f64,
    /// Temperatures inside this closed band are forest, outside grassland.
    pub forest_band: [f64; 2],
}

impl Default for BiomeThresholds {
    fn default() -> Self {
        BiomeThresholds {
            beach_band_fraction: 0.02,
            mountain_fraction: 0.6,
            lava_threshold: 0.85,
            forest_band: [0.3, 0.7],
        }
    }
}

impl BiomeThresholds {
    pub fn validate(&self) -> Result<(), TerrainError> {
        let ok = self.beach_band_fraction.is_finite()
            && self.beach_band_fraction >= 0.0
            && self.mountain_fraction.is_finite()
            && self.mountain_fraction > 0.0
            && (0.0..=1.0).contains(&self.lava_threshold)
            && self.forest_band[0] <= self.forest_band[1];
        if ok {
            Ok(())
        } else {
            Err(TerrainError::InvalidParams(format!(
                "biome thresholds out of range: {self:?}"
            )))
        }
    }
}

/// Classifies a surface point.
///
/// Rules, in order: a clamped point is ocean, or lava when its temperature
/// reaches the lava threshold; points within the beach band above the ocean
/// are beach; points at or above the mountain line are mountain; the rest is
/// forest or grassland by temperature band. Without a temperature (simple
/// generator) the lower half of the land between beach and mountain line is
/// forest.
pub fn classify_biome(
    displacement: f64,
    ocean_level: f64,
    amplitude_scale: f64,
    temperature: Option<f64>,
    thresholds: &BiomeThresholds,
) -> Result<Biome, TerrainError> {
    if !(displacement >= ocean_level) {
        return Err(TerrainError::BelowOcean {
            displacement,
            ocean_level,
        });
    }
    if displacement == ocean_level {
        return Ok(match temperature {
            Some(t) if t >= thresholds.lava_threshold => Biome::Lava,
            _ => Biome::Ocean,
        });
    }
    let beach_top = ocean_level + thresholds.beach_band_fraction * amplitude_scale;
    if displacement <= beach_top {
        return Ok(Biome::Beach);
    }
    let mountain_line = thresholds.mountain_fraction * amplitude_scale;
    if displacement >= mountain_line {
        return Ok(Biome::Mountain);
    }
    let forest = match temperature {
        Some(t) => (thresholds.forest_band[0]..=thresholds.forest_band[1]).contains(&t),
        None => displacement <= 0.5 * (beach_top + mountain_line),
    };
    Ok(if forest { Biome::Forest } else { Biome::Grassland })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimplePlanetParams {
    pub fbm: FbmParams,
    /// Height in meters of a normalized FBM value of 1.
    pub base_factor_m: f64,
    pub ocean_level_m: f64,
    #[serde(default)]
    pub sampling: SamplingMode,
    #[serde(default)]
    pub biomes: BiomeThresholds,
}

impl Default for SimplePlanetParams {
    fn default() -> Self {
        SimplePlanetParams {
            fbm: FbmParams {
                octaves: 7,
                persistence: 0.5,
                lacunarity: 2.0,
                exponentiation: 2.0,
                base_frequency: 1.6,
            },
            base_factor_m: 12_000.0,
            ocean_level_m: 3_000.0,
            sampling: SamplingMode::Sphere3d,
            biomes: BiomeThresholds::default(),
        }
    }
}

impl SimplePlanetParams {
    pub fn validate(&self) -> Result<(), TerrainError> {
        self.fbm
            .validate()
            .map_err(|e| TerrainError::InvalidParams(format!("simple.fbm: {e}")))?;
        if !(self.base_factor_m.is_finite() && self.base_factor_m > 0.0) {
            return Err(TerrainError::InvalidParams("base_factor > 0".into()));
        }
        if !(self.ocean_level_m >= 0.0 && self.ocean_level_m < self.base_factor_m) {
            return Err(TerrainError::InvalidParams(
                "0 ≤ ocean_level < base_factor".into(),
            ));
        }
        self.biomes.validate()
    }
}

/// One noise channel of the layered generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseLayer {
    pub fbm: FbmParams,
    pub curve: SplineCurve,
}

impl NoiseLayer {
    fn sample(&self, dir: DVec3, mode: SamplingMode, seed: NoiseSeed) -> Result<f64, NoiseError> {
        let raw = fbm_dir(dir, mode, &self.fbm, seed)?;
        Ok(self.curve.evaluate_unchecked(raw))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayeredPlanetParams {
    pub continentalness: NoiseLayer,
    pub erosion: NoiseLayer,
    pub peaks_valleys: NoiseLayer,
    pub temperature: NoiseLayer,
    /// Meters per unit of height factor; the maximum relief is twice this.
    pub amplitude_m: f64,
    pub ocean_level_m: f64,
    #[serde(default)]
    pub sampling: SamplingMode,
    #[serde(default)]
    pub biomes: BiomeThresholds,
}

impl Default for LayeredPlanetParams {
    fn default() -> Self {
        let fbm = |octaves, base_frequency| FbmParams {
            octaves,
            persistence: 0.5,
            lacunarity: 2.0,
            exponentiation: 1.0,
            base_frequency,
        };
        LayeredPlanetParams {
            continentalness: NoiseLayer {
                fbm: fbm(5, 1.2),
                curve: SplineCurve::new(vec![
                    [0.0, 0.0],
                    [0.4, 0.1],
                    [0.5, 0.3],
                    [0.6, 0.5],
                    [1.0, 0.7],
                ]),
            },
            erosion: NoiseLayer {
                fbm: fbm(4, 2.0),
                curve: SplineCurve::new(vec![[0.0, 0.0], [0.4, 0.2], [0.6, 0.5], [1.0, 0.9]]),
            },
            peaks_valleys: NoiseLayer {
                fbm: FbmParams {
                    exponentiation: 1.5,
                    ..fbm(6, 4.0)
                },
                curve: SplineCurve::new(vec![
                    [0.0, 0.0],
                    [0.3, 0.05],
                    [0.5, 0.15],
                    [0.7, 0.45],
                    [1.0, 0.6],
                ]),
            },
            temperature: NoiseLayer {
                fbm: fbm(3, 1.0),
                curve: SplineCurve::new(vec![[0.0, 0.0], [0.35, 0.2], [0.65, 0.8], [1.0, 1.0]]),
            },
            amplitude_m: 8_000.0,
            ocean_level_m: 2_000.0,
            sampling: SamplingMode::Sphere3d,
            biomes: BiomeThresholds::default(),
        }
    }
}

impl LayeredPlanetParams {
    pub fn layers(&self) -> [(&'static str, &NoiseLayer); 4] {
        [
            ("continentalness", &self.continentalness),
            ("erosion", &self.erosion),
            ("peaks_valleys", &self.peaks_valleys),
            ("temperature", &self.temperature),
        ]
    }

    pub fn validate(&self) -> Result<(), TerrainError> {
        for (name, layer) in self.layers() {
            layer
                .fbm
                .validate()
                .map_err(|e| TerrainError::InvalidParams(format!("layered.{name}.fbm: {e}")))?;
            layer
                .curve
                .validate()
                .map_err(|e| TerrainError::InvalidParams(format!("layered.{name}.curve: {e}")))?;
        }
        if !(self.amplitude_m.is_finite() && self.amplitude_m > 0.0) {
            return Err(TerrainError::InvalidParams("amplitude > 0".into()));
        }
        if !(self.ocean_level_m >= 0.0 && self.ocean_level_m < 2.0 * self.amplitude_m) {
            return Err(TerrainError::InvalidParams(
                "0 ≤ ocean_level < 2·amplitude".into(),
            ));
        }
        self.biomes.validate()
    }
}

/// Post-spline values of the four layers, each in [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayerSample {
    pub continentalness: f64,
    pub erosion: f64,
    pub peaks_valleys: f64,
    pub temperature: f64,
}

impl LayerSample {
    /// `(C + PV) * (1 - E)`.
    pub fn height_factor(&self) -> f64 {
        (self.continentalness + self.peaks_valleys) * (1.0 - self.erosion)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurfaceSample {
    /// Meters above the base radius.
    pub displacement: f64,
    pub biome: Biome,
    pub layers: Option<LayerSample>,
}

/// Layer-specific seed streams; octave seeds are derived from these in turn.
const LAYER_STREAMS: [u64; 4] = [0x0C0_0001, 0x0E0_0002, 0x0B0_0003, 0x07E_0004];

fn check_unit(dir: DVec3) -> Result<(), TerrainError> {
    if dir.is_finite() && (dir.length() - 1.0).abs() <= UNIT_TOLERANCE {
        Ok(())
    } else {
        Err(TerrainError::NotUnit(dir.to_array()))
    }
}

pub fn simple_height(
    dir: DVec3,
    params: &SimplePlanetParams,
    seed: NoiseSeed,
) -> Result<SurfaceSample, TerrainError> {
    check_unit(dir)?;
    let raw = fbm_dir(dir, params.sampling, &params.fbm, seed)?;
    let displacement = (raw * params.base_factor_m).max(params.ocean_level_m);
    let biome = classify_biome(
        displacement,
        params.ocean_level_m,
        params.base_factor_m,
        None,
        &params.biomes,
    )?;
    Ok(SurfaceSample {
        displacement,
        biome,
        layers: None,
    })
}

/// The four remapped layers at `dir`.
pub fn layered_layers(
    dir: DVec3,
    params: &LayeredPlanetParams,
    seed: NoiseSeed,
) -> Result<LayerSample, TerrainError> {
    check_unit(dir)?;
    let mode = params.sampling;
    let [c, e, pv, t] = LAYER_STREAMS.map(|s| seed.derive(s));
    Ok(LayerSample {
        continentalness: params.continentalness.sample(dir, mode, c)?,
        erosion: params.erosion.sample(dir, mode, e)?,
        peaks_valleys: params.peaks_valleys.sample(dir, mode, pv)?,
        temperature: params.temperature.sample(dir, mode, t)?,
    })
}

/// Surface sample built from already-evaluated layers.
pub fn layered_from_layers(
    layers: LayerSample,
    params: &LayeredPlanetParams,
) -> Result<SurfaceSample, TerrainError> {
    let displacement = (layers.height_factor() * params.amplitude_m).max(params.ocean_level_m);
    let biome = classify_biome(
        displacement,
        params.ocean_level_m,
        params.amplitude_m,
        Some(layers.temperature),
        &params.biomes,
    )?;
    Ok(SurfaceSample {
        displacement,
        biome,
        layers: Some(layers),
    })
}

pub fn layered_height(
    dir: DVec3,
    params: &LayeredPlanetParams,
    seed: NoiseSeed,
) -> Result<SurfaceSample, TerrainError> {
    layered_from_layers(layered_layers(dir, params, seed)?, params)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Generator {
    Simple(SimplePlanetParams),
    Layered(LayeredPlanetParams),
}

impl Generator {
    pub fn validate(&self) -> Result<(), TerrainError> {
        match self {
            Generator::Simple(p) => p.validate(),
            Generator::Layered(p) => p.validate(),
        }
    }

    pub fn ocean_level(&self) -> f64 {
        match self {
            Generator::Simple(p) => p.ocean_level_m,
            Generator::Layered(p) => p.ocean_level_m,
        }
    }

    /// Upper bound on any displacement the generator can produce.
    pub fn max_relief(&self) -> f64 {
        match self {
            Generator::Simple(p) => p.base_factor_m,
            Generator::Layered(p) => 2.0 * p.amplitude_m,
        }
    }

    /// Height scale used for biome thresholds.
    pub fn amplitude_scale(&self) -> f64 {
        match self {
            Generator::Simple(p) => p.base_factor_m,
            Generator::Layered(p) => p.amplitude_m,
        }
    }

    pub fn sample(&self, dir: DVec3, seed: NoiseSeed) -> Result<SurfaceSample, TerrainError> {
        match self {
            Generator::Simple(p) => simple_height(dir, p, seed),
            Generator::Layered(p) => layered_height(dir, p, seed),
        }
    }
}

/// Anything that maps a unit direction to a surface sample.
pub trait SurfaceSampler {
    fn sample(&self, dir: DVec3) -> Result<SurfaceSample, TerrainError>;
}

/// A generator bound to a seed.
#[derive(Debug, Clone, PartialEq)]
pub struct SeededGenerator {
    pub generator: Generator,
    pub seed: NoiseSeed,
}

impl SurfaceSampler for SeededGenerator {
    fn sample(&self, dir: DVec3) -> Result<SurfaceSample, TerrainError> {
        self.generator.sample(dir, self.seed)
    }
}

impl<S: SurfaceSampler + ?Sized> SurfaceSampler for &S {
    fn sample(&self, dir: DVec3) -> Result<SurfaceSample, TerrainError> {
        (**self).sample(dir)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn th() -> BiomeThresholds {
        BiomeThresholds::default()
    }

    #[test]
    fn biome_examples() {
        let (ocean, amp) = (100.0, 1000.0);
        assert_eq!(classify_biome(ocean, ocean, amp, None, &th()), Ok(Biome::Ocean));
        let band = th().beach_band_fraction * amp;
        assert_eq!(
            classify_biome(ocean + band / 2.0, ocean, amp, Some(0.5), &th()),
            Ok(Biome::Beach)
        );
        assert_eq!(
            classify_biome(0.95 * amp, ocean, amp, Some(0.5), &th()),
            Ok(Biome::Mountain)
        );
        assert_eq!(classify_biome(ocean, ocean, amp, Some(0.9), &th()), Ok(Biome::Lava));
        assert_eq!(classify_biome(400.0, ocean, amp, Some(0.5), &th()), Ok(Biome::Forest));
        assert_eq!(classify_biome(400.0, ocean, amp, Some(0.1), &th()), Ok(Biome::Grassland));
        assert!(matches!(
            classify_biome(99.0, ocean, amp, None, &th()),
            Err(TerrainError::BelowOcean { .. })
        ));
    }

    #[test]
    fn simple_biomes_never_lava() {
        let (ocean, amp) = (100.0, 1000.0);
        for i in 0..=1000 {
            let d = ocean + (amp - ocean) * i as f64 / 1000.0;
            assert_ne!(classify_biome(d, ocean, amp, None, &th()).unwrap(), Biome::Lava);
        }
    }

    #[test]
    fn simple_clamp_and_endpoint() {
        let mut p = SimplePlanetParams::default();
        // ocean above nearly every sample: clamp dominates
        p.ocean_level_m = p.base_factor_m * 0.999;
        let s = simple_height(DVec3::Z, &p, NoiseSeed(3)).unwrap();
        assert_eq!(s.displacement, p.ocean_level_m);
        assert_eq!(s.biome, Biome::Ocean);
        assert!(s.layers.is_none());
    }

    #[test]
    fn layered_formula_examples() {
        let p = LayeredPlanetParams {
            amplitude_m: 1000.0,
            ocean_level_m: 0.0,
            ..Default::default()
        };
        let layers = LayerSample {
            continentalness: 0.5,
            erosion: 0.0,
            peaks_valleys: 0.3,
            temperature: 0.5,
        };
        assert_eq!(layers.height_factor(), 0.8);
        assert_eq!(layered_from_layers(layers, &p).unwrap().displacement, 800.0);

        let p = LayeredPlanetParams {
            ocean_level_m: 50.0,
            ..p
        };
        let eroded = LayerSample {
            erosion: 1.0,
            ..layers
        };
        let s = layered_from_layers(eroded, &p).unwrap();
        assert_eq!(s.displacement, 50.0);
        assert_eq!(s.biome, Biome::Ocean);
    }

    #[test]
    fn rejects_non_unit_direction() {
        let p = SimplePlanetParams::default();
        assert!(matches!(
            simple_height(DVec3::new(1.0, 1.0, 0.0), &p, NoiseSeed(0)),
            Err(TerrainError::NotUnit(_))
        ));
        let q = LayeredPlanetParams::default();
        assert!(layered_height(DVec3::ZERO, &q, NoiseSeed(0)).is_err());
        assert!(layered_height(DVec3::new(f64::NAN, 0.0, 0.0), &q, NoiseSeed(0)).is_err());
    }

    #[test]
    fn validation_messages() {
        let mut p = SimplePlanetParams::default();
        p.ocean_level_m = p.base_factor_m;
        assert!(p.validate().unwrap_err().to_string().contains("ocean_level"));
        let mut q = LayeredPlanetParams::default();
        q.erosion.fbm.octaves = 0;
        let msg = q.validate().unwrap_err().to_string();
        assert!(msg.contains("octaves ≥ 1"), "{msg}");
        let mut q = LayeredPlanetParams::default();
        q.temperature.curve.points.swap(1, 2);
        let msg = q.validate().unwrap_err().to_string();
        assert!(msg.contains("inputs not strictly increasing"), "{msg}");
    }

    #[test]
    fn biome_ids_round_trip() {
        for b in Biome::ALL {
            assert_eq!(Biome::from_id(b.id()), Some(b));
        }
        assert_eq!(Biome::from_id(6), None);
    }
}
