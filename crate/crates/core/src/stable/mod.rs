//! One-dimensional rotationally symmetric α-stable laws.
//!
//! Normalization: a standard variate `S` has characteristic function
//! `E[exp(iuS)] = exp(-|u|^α)`. Under this convention the Lévy measure is
//! `ν(dz) = c_α |z|^{-1-α} dz` with `c_α = Γ(1+α) sin(πα/2) / π`
//! (see [`levy_intensity`]).

mod density;

pub use density::{DensityTable, GridSpec, TailSeries};

use std::f64::consts::{FRAC_PI_2, PI};

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;
use thiserror::Error;

use crate::rng::{batched, StreamKey};

#[derive(Debug, Error)]
pub enum StableError {
    #[error("stability index {0} outside the open interval (1, 2)")]
    AlphaOutOfRange(f64),
    #[error("{name} must be positive and finite, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("density grid needs at least 1024 points (odd count), got {0}")]
    Resolution(usize),
    #[error("Fourier inversion did not converge at z = {z} (discrepancy {discrepancy:e})")]
    QuadratureNonConvergence { z: f64, discrepancy: f64 },
    #[error("asymptotic tail disagrees with the tabulated density at z = {z} (relative gap {gap:e})")]
    TailMismatch { z: f64, gap: f64 },
    #[error("integral of {what} is not finite")]
    Divergent { what: &'static str },
    #[error("malformed density file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub(crate) fn check_alpha(alpha: f64) -> Result<(), StableError> {
    if alpha.is_finite() && alpha > 1.0 && alpha < 2.0 {
        Ok(())
    } else {
        Err(StableError::AlphaOutOfRange(alpha))
    }
}

pub(crate) fn check_positive(name: &'static str, value: f64) -> Result<(), StableError> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(StableError::NonPositive { name, value })
    }
}

/// Lévy-measure constant `c_α` making `ν(dz) = c_α |z|^{-1-α} dz` the Lévy
/// measure of the standard law. Valid for α in (0, 2); equals 1/π at α = 1.
pub fn levy_intensity(alpha: f64) -> f64 {
    gamma(1.0 + alpha) * (FRAC_PI_2 * alpha).sin() / PI
}

/// Symmetric stable law with exponent `alpha` and scale `scale`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StableLaw {
    alpha: f64,
    scale: f64,
}

impl StableLaw {
    pub fn new(alpha: f64, scale: f64) -> Result<Self, StableError> {
        check_alpha(alpha)?;
        check_positive("scale", scale)?;
        Ok(Self { alpha, scale })
    }

    pub fn standard(alpha: f64) -> Result<Self, StableError> {
        Self::new(alpha, 1.0)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Closed-form characteristic function `exp(-(scale |u|)^α)`.
    pub fn characteristic_function(&self, u: f64) -> f64 {
        (-(self.scale * u.abs()).powf(self.alpha)).exp()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.scale * standard_variate(self.alpha, rng)
    }
}

/// Chambers–Mallows–Stuck draw of a standard symmetric α-stable variate.
///
/// With `V ~ U(-π/2, π/2)` and `W ~ Exp(1)`,
/// `S = sin(αV) / cos(V)^{1/α} · (cos((1-α)V) / W)^{(1-α)/α}`.
#[inline]
pub fn standard_variate<R: Rng + ?Sized>(alpha: f64, rng: &mut R) -> f64 {
    let v = PI * (rng.random::<f64>() - 0.5);
    let w: f64 = Exp1.sample(rng);
    let cos_v = v.cos();
    (alpha * v).sin() / cos_v.powf(1.0 / alpha)
        * (((1.0 - alpha) * v).cos() / w).powf((1.0 - alpha) / alpha)
}

/// Draw `count` i.i.d. samples of `law`. Deterministic in `key`, independent
/// of the worker count.
pub fn sample_standard(law: &StableLaw, count: usize, key: StreamKey) -> Result<Vec<f64>, StableError> {
    check_alpha(law.alpha)?;
    if count == 0 {
        return Err(StableError::NonPositive { name: "count", value: 0.0 });
    }
    let law = *law;
    Ok(batched(
        count,
        key,
        move |k, n| {
            let mut rng = k.rng();
            (0..n).map(|_| law.sample(&mut rng)).collect::<Vec<f64>>()
        },
        |acc: &mut Vec<f64>, part| acc.extend(part),
        Vec::with_capacity(count),
    ))
}

/// Split of the standard Lévy measure at a threshold `ε`: compound-Poisson
/// jumps above `ε` and a second-moment budget below it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JumpDecomposition {
    alpha: f64,
    threshold: f64,
    big_jump_rate: f64,
    small_jump_variance_rate: f64,
}

impl JumpDecomposition {
    pub fn new(alpha: f64, threshold: f64) -> Result<Self, StableError> {
        check_alpha(alpha)?;
        check_positive("threshold", threshold)?;
        let c = levy_intensity(alpha);
        Ok(Self {
            alpha,
            threshold,
            big_jump_rate: 2.0 * c * threshold.powf(-alpha) / alpha,
            small_jump_variance_rate: 2.0 * c * threshold.powf(2.0 - alpha) / (2.0 - alpha),
        })
    }

    /// Threshold giving `expected_jumps` jumps above it on `[0, horizon]`.
    pub fn with_jump_budget(alpha: f64, horizon: f64, expected_jumps: f64) -> Result<Self, StableError> {
        check_alpha(alpha)?;
        check_positive("horizon", horizon)?;
        check_positive("expected_jumps", expected_jumps)?;
        let c = levy_intensity(alpha);
        let eps = (2.0 * c * horizon / (alpha * expected_jumps)).powf(1.0 / alpha);
        Self::new(alpha, eps)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    /// Total Lévy mass of `{|z| > ε}`.
    pub fn big_jump_rate(&self) -> f64 {
        self.big_jump_rate
    }

    /// `∫_{|z| ≤ ε} z² ν(dz)`.
    pub fn small_jump_variance_rate(&self) -> f64 {
        self.small_jump_variance_rate
    }

    /// One jump size from the normalized tail of ν: Pareto magnitude above ε
    /// with a symmetric sign.
    #[inline]
    pub fn jump_size<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = 1.0 - rng.random::<f64>();
        let mag = self.threshold * u.powf(-1.0 / self.alpha);
        if rng.random::<bool>() {
            mag
        } else {
            -mag
        }
    }

    /// Marked Poisson process of jumps above ε on `(0, horizon]`, sorted by time.
    pub fn sample_big_jumps<R: Rng + ?Sized>(&self, horizon: f64, rng: &mut R) -> Vec<(f64, f64)> {
        let mut out = Vec::new();
        if !(self.big_jump_rate > 0.0) || !(horizon > 0.0) {
            return out;
        }
        let mut t = 0.0;
        loop {
            let gap: f64 = Exp1.sample(rng);
            t += gap / self.big_jump_rate;
            if t > horizon {
                break;
            }
            out.push((t, self.jump_size(rng)));
        }
        out
    }
}
