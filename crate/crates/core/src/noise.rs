//! Seeded 3D gradient noise and fractal Brownian motion.
//!
//! Lattice gradients are chosen by a table-free integer hash of the lattice
//! coordinates and the seed, so every seed is equally cheap and results are
//! bit-identical on any platform with IEEE-754 doubles.

use glam::DVec3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Coordinates beyond this magnitude lose their fractional part in `f64`.
const MAX_COORD: f64 = 4_503_599_627_370_496.0; // 2^52

/// Maps the raw gradient sum into [-1, 1]. With the 12 cube-edge gradients
/// (length sqrt 2) the unscaled 3D sum is bounded by sqrt(2) * sqrt(3) / 2.
const OUTPUT_SCALE: f64 = 0.816_496_580_927_726; // sqrt(2/3)

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NoiseError {
    #[error("noise input is not finite: {0:?}")]
    NonFinite([f64; 3]),
    #[error("noise input {0:?} is too large to sample")]
    OutOfRange([f64; 3]),
    #[error("invalid fbm parameters: {0}")]
    InvalidParams(String),
}

/// Per-planet random seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NoiseSeed(pub u64);

impl NoiseSeed {
    /// Derives an independent child seed, e.g. one per octave or per layer.
    pub fn derive(self, stream: u64) -> NoiseSeed {
        NoiseSeed(mix64(self.0 ^ mix64(stream.wrapping_add(0x9E37_79B9_7F4A_7C15))))
    }
}

impl From<u64> for NoiseSeed {
    fn from(value: u64) -> Self {
        NoiseSeed(value)
    }
}

/// SplitMix64 finalizer.
#[inline]
pub(crate) fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[inline]
fn hash_lattice(ix: i64, iy: i64, iz: i64, seed: u64) -> u64 {
    let mut h = mix64(seed ^ 0x2545_F491_4F6C_DD1D);
    h = mix64(h ^ (ix as u64).wrapping_mul(0x8CB9_2BA7_2F3D_8DD7));
    h = mix64(h ^ (iy as u64).wrapping_mul(0xD6E8_FEB8_6659_FD93));
    mix64(h ^ (iz as u64).wrapping_mul(0xA076_1D64_78BD_642F))
}

/// Dot product of the hashed cube-edge gradient with the offset `(x, y, z)`.
/// Sixteen slots over twelve gradients, the last four repeated.
#[inline]
fn grad(hash: u64, x: f64, y: f64, z: f64) -> f64 {
    match hash & 15 {
        0 | 12 => x + y,
        1 | 14 => -x + y,
        2 => x - y,
        3 => -x - y,
        4 => x + z,
        5 => -x + z,
        6 => x - z,
        7 => -x - z,
        8 => y + z,
        9 | 13 => -y + z,
        10 => y - z,
        _ => -y - z,
    }
}

#[inline]
fn fade(t: f64) -> f64 {
    t * t * t * (t * (t * 6.0 - 15.0) + 10.0)
}

#[inline]
fn lerp(t: f64, a: f64, b: f64) -> f64 {
    a + t * (b - a)
}

/// Gradient noise at `p`, in [-1, 1]. Exactly zero on the integer lattice.
pub fn perlin3(p: DVec3, seed: NoiseSeed) -> Result<f64, NoiseError> {
    if !p.is_finite() {
        return Err(NoiseError::NonFinite(p.to_array()));
    }
    if p.abs().max_element() >= MAX_COORD {
        return Err(NoiseError::OutOfRange(p.to_array()));
    }
    Ok(perlin3_unchecked(p, seed.0))
}

#[inline]
fn perlin3_unchecked(p: DVec3, seed: u64) -> f64 {
    let cell = p.floor();
    let (ix, iy, iz) = (cell.x as i64, cell.y as i64, cell.z as i64);
    let (x, y, z) = (p.x - cell.x, p.y - cell.y, p.z - cell.z);
    let (u, v, w) = (fade(x), fade(y), fade(z));

    let corner = |dx: i64, dy: i64, dz: i64| {
        let h = hash_lattice(ix + dx, iy + dy, iz + dz, seed);
        grad(h, x - dx as f64, y - dy as f64, z - dz as f64)
    };

    let x00 = lerp(u, corner(0, 0, 0), corner(1, 0, 0));
    let x10 = lerp(u, corner(0, 1, 0), corner(1, 1, 0));
    let x01 = lerp(u, corner(0, 0, 1), corner(1, 0, 1));
    let x11 = lerp(u, corner(0, 1, 1), corner(1, 1, 1));
    let y0 = lerp(v, x00, x10);
    let y1 = lerp(v, x01, x11);
    (lerp(w, y0, y1) * OUTPUT_SCALE).clamp(-1.0, 1.0)
}

/// How a unit-sphere direction is turned into a noise-space point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingMode {
    /// Sample 3D noise at the direction itself. Seamless and free of pole pinching.
    #[default]
    Sphere3d,
    /// Sample the (longitude, latitude) plane in radians. Has a seam at the
    /// antimeridian and pinches at the poles; kept for comparison with flat
    /// heightmap generators.
    LonLat2d,
}

impl SamplingMode {
    pub fn to_noise_space(self, dir: DVec3) -> DVec3 {
        match self {
            SamplingMode::Sphere3d => dir,
            SamplingMode::LonLat2d => {
                let lon = dir.y.atan2(dir.x);
                let lat = dir.z.clamp(-1.0, 1.0).asin();
                DVec3::new(lon, lat, 0.0)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FbmParams {
    pub octaves: u32,
    /// Amplitude multiplier between successive octaves.
    pub persistence: f64,
    /// Frequency multiplier between successive octaves.
    pub lacunarity: f64,
    /// Power applied to the normalized sum.
    pub exponentiation: f64,
    /// Cycles per unit length of the first octave.
    pub base_frequency: f64,
}

impl Default for FbmParams {
    fn default() -> Self {
        FbmParams {
            octaves: 6,
            persistence: 0.5,
            lacunarity: 2.0,
            exponentiation: 1.0,
            base_frequency: 1.5,
        }
    }
}

impl FbmParams {
    pub fn validate(&self) -> Result<(), NoiseError> {
        let fail = |msg: &str| Err(NoiseError::InvalidParams(msg.to_string()));
        if self.octaves < 1 {
            return fail("octaves ≥ 1");
        }
        if !(self.persistence.is_finite() && self.persistence > 0.0) {
            return fail("persistence > 0");
        }
        if !(self.lacunarity.is_finite() && self.lacunarity > 1.0) {
            return fail("lacunarity > 1");
        }
        if !(self.exponentiation.is_finite() && self.exponentiation > 0.0) {
            return fail("exponentiation > 0");
        }
        if !(self.base_frequency.is_finite() && self.base_frequency > 0.0) {
            return fail("base_frequency > 0");
        }
        Ok(())
    }

    /// Sum of octave amplitudes, the analytic bound on |raw sum|.
    pub fn amplitude_sum(&self) -> f64 {
        let mut amplitude = 1.0;
        let mut total = 0.0;
        for _ in 0..self.octaves {
            total += amplitude;
            amplitude *= self.persistence;
        }
        total
    }
}

/// Fractal Brownian motion at `p`, normalized to [0, 1] and raised to
/// `params.exponentiation`. Octave `i` uses the seed `seed.derive(i)`.
pub fn fbm(p: DVec3, params: &FbmParams, seed: NoiseSeed) -> Result<f64, NoiseError> {
    params.validate()?;
    if !p.is_finite() {
        return Err(NoiseError::NonFinite(p.to_array()));
    }

    let mut raw = 0.0;
    let mut amplitude = 1.0;
    let mut frequency = params.base_frequency;
    for octave in 0..params.octaves {
        raw += amplitude * perlin3(p * frequency, seed.derive(octave as u64))?;
        amplitude *= params.persistence;
        frequency *= params.lacunarity;
    }

    let normalized = ((raw / params.amplitude_sum() + 1.0) * 0.5).clamp(0.0, 1.0);
    Ok(normalized.powf(params.exponentiation))
}

/// [`fbm`] on a unit direction mapped through `mode`.
pub fn fbm_dir(
    dir: DVec3,
    mode: SamplingMode,
    params: &FbmParams,
    seed: NoiseSeed,
) -> Result<f64, NoiseError> {
    fbm(mode.to_noise_space(dir), params, seed)
}
