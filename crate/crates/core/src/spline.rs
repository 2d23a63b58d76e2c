//! Control-point remapping curves for noise layers.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SplineViolation {
    #[error("fewer than 2 points")]
    TooFewPoints,
    #[error("control point {0} is not finite")]
    NonFinite(usize),
    #[error("inputs not strictly increasing")]
    NotIncreasing,
    #[error("first input must be 0")]
    FirstInputNotZero,
    #[error("last input must be 1")]
    LastInputNotOne,
    #[error("output of control point {0} outside [0, 1]")]
    OutputOutOfRange(usize),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SplineError {
    #[error("invalid curve: {0}")]
    Invalid(#[from] SplineViolation),
    #[error("curve input {0} outside [0, 1]")]
    Domain(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Interpolation {
    #[default]
    Linear,
    /// Fritsch-Carlson monotone cubic Hermite. Never overshoots the data.
    MonotoneCubic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplineCurve {
    /// `[input, output]` pairs.
    pub points: Vec<[f64; 2]>,
    #[serde(default)]
    pub interpolation: Interpolation,
}

impl SplineCurve {
    pub fn new(points: Vec<[f64; 2]>) -> Self {
        SplineCurve {
            points,
            interpolation: Interpolation::Linear,
        }
    }

    pub fn identity() -> Self {
        SplineCurve::new(vec![[0.0, 0.0], [1.0, 1.0]])
    }

    pub fn with_interpolation(mut self, interpolation: Interpolation) -> Self {
        self.interpolation = interpolation;
        self
    }

    /// Checks the curve invariants in a fixed order and reports the first failure.
    pub fn validate(&self) -> Result<(), SplineViolation> {
        let pts = &self.points;
        if pts.len() < 2 {
            return Err(SplineViolation::TooFewPoints);
        }
        if let Some(i) = pts.iter().position(|p| !(p[0].is_finite() && p[1].is_finite())) {
            return Err(SplineViolation::NonFinite(i));
        }
        if pts.windows(2).any(|w| w[1][0] <= w[0][0]) {
            return Err(SplineViolation::NotIncreasing);
        }
        if pts[0][0] != 0.0 {
            return Err(SplineViolation::FirstInputNotZero);
        }
        if pts[pts.len() - 1][0] != 1.0 {
            return Err(SplineViolation::LastInputNotOne);
        }
        if let Some(i) = pts.iter().position(|p| !(0.0..=1.0).contains(&p[1])) {
            return Err(SplineViolation::OutputOutOfRange(i));
        }
        Ok(())
    }

    /// Remaps `t` through the curve. Control points are reproduced exactly.
    pub fn evaluate(&self, t: f64) -> Result<f64, SplineError> {
        self.validate()?;
        if !(0.0..=1.0).contains(&t) {
            return Err(SplineError::Domain(t));
        }
        Ok(self.evaluate_unchecked(t))
    }

    /// [`evaluate`](Self::evaluate) without validation; the caller guarantees a
    /// valid curve and `t` in [0, 1].
    pub(crate) fn evaluate_unchecked(&self, t: f64) -> f64 {
        let pts = &self.points;
        // index of the first control point with input > t
        let upper = pts.partition_point(|p| p[0] <= t);
        if upper > 0 && pts[upper - 1][0] == t {
            return pts[upper - 1][1];
        }
        let k = upper.clamp(1, pts.len() - 1) - 1;
        let ([x0, y0], [x1, y1]) = (pts[k], pts[k + 1]);
        let h = x1 - x0;
        let s = (t - x0) / h;

        let y = match self.interpolation {
            Interpolation::Linear => y0 + (y1 - y0) * s,
            Interpolation::MonotoneCubic => {
                let m = self.tangents();
                let (m0, m1) = (m[k], m[k + 1]);
                let s2 = s * s;
                let s3 = s2 * s;
                let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
                let h10 = s3 - 2.0 * s2 + s;
                let h01 = -2.0 * s3 + 3.0 * s2;
                let h11 = s3 - s2;
                h00 * y0 + h10 * h * m0 + h01 * y1 + h11 * h * m1
            }
        };
        // keeps rounding inside the bracketing segment's range
        y.clamp(y0.min(y1), y0.max(y1))
    }

    /// Fritsch-Carlson tangents, one per control point.
    fn tangents(&self) -> Vec<f64> {
        let pts = &self.points;
        let n = pts.len();
        let secants: Vec<f64> = pts
            .windows(2)
            .map(|w| (w[1][1] - w[0][1]) / (w[1][0] - w[0][0]))
            .collect();

        let mut m = vec![0.0; n];
        m[0] = secants[0];
        m[n - 1] = secants[n - 2];
        for i in 1..n - 1 {
            let (a, b) = (secants[i - 1], secants[i]);
            m[i] = if a * b <= 0.0 { 0.0 } else { (a + b) * 0.5 };
        }
        for (k, &d) in secants.iter().enumerate() {
            if d == 0.0 {
                m[k] = 0.0;
                m[k + 1] = 0.0;
                continue;
            }
            let (alpha, beta) = (m[k] / d, m[k + 1] / d);
            let r = alpha * alpha + beta * beta;
            if r > 9.0 {
                let tau = 3.0 / r.sqrt();
                m[k] = tau * alpha * d;
                m[k + 1] = tau * beta * d;
            }
        }
        m
    }
}
