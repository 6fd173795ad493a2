//! Test functions `f`, drifts `B`, and the [`Field`] abstraction shared by
//! analytic functions and tabulated grid functions.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::StreamKey;

#[derive(Debug, Error, PartialEq)]
pub enum FunctionError {
    #[error("unknown {kind} '{name}'; available: {available}")]
    Unknown { kind: &'static str, name: String, available: String },
    #[error("invalid parameter for {name}: {reason}")]
    Parameter { name: String, reason: String },
}

/// Map `R^dim → R^codim`, evaluated into a caller-provided buffer.
pub trait Field: Send + Sync {
    fn dim(&self) -> usize;
    fn codim(&self) -> usize;
    fn eval_into(&self, x: &[f64], out: &mut [f64]);

    fn eval(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.codim()];
        self.eval_into(x, &mut out);
        out
    }

    /// First component; the value for scalar fields.
    fn eval_scalar(&self, x: &[f64]) -> f64 {
        let mut out = vec![0.0; self.codim()];
        self.eval_into(x, &mut out);
        out[0]
    }

    /// Known bound on `sup |f|`, if any.
    fn sup_bound(&self) -> Option<f64> {
        None
    }
}

/// Hölder exponent with a value of `‖f‖_β = sup|f| + [f]_β`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HolderMeta {
    pub exponent: f64,
    pub norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TestKind {
    Constant { value: f64 },
    /// `cos(⟨w, x⟩ + phase)`.
    CosLinear { weights: Vec<f64>, phase: f64 },
    /// `min(1, |x_1|)^exponent`.
    HolderPower { exponent: f64 },
    /// `exp(1 - 1/(1 - |x-c|²/ρ²))` inside the ball, 0 outside.
    Bump { center: Vec<f64>, radius: f64 },
}

/// Bounded real function on `R^N` with its sup bound and Hölder metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestFunction {
    kind: TestKind,
    dim: usize,
    bound_sup: f64,
    holder: Option<HolderMeta>,
}

pub const TEST_FUNCTION_NAMES: [&str; 4] = ["constant", "cos-linear", "holder-power", "bump"];

impl TestFunction {
    pub fn constant(dim: usize, value: f64) -> Self {
        Self {
            kind: TestKind::Constant { value },
            dim,
            bound_sup: value.abs(),
            holder: Some(HolderMeta { exponent: 1.0, norm: value.abs() }),
        }
    }

    /// `cos(⟨w, x⟩ + phase)`; the weights are used as given.
    pub fn cos_linear(weights: Vec<f64>, phase: f64) -> Self {
        let dim = weights.len();
        let lip = weights.iter().map(|w| w * w).sum::<f64>().sqrt();
        Self {
            kind: TestKind::CosLinear { weights, phase },
            dim,
            bound_sup: 1.0,
            holder: Some(HolderMeta { exponent: 1.0, norm: 1.0 + lip }),
        }
    }

    /// `min(1, |x_1|)^β` with `‖f‖_β = 2`: the power is β-Hölder with
    /// seminorm 1 and clipping at 1 does not increase it.
    pub fn holder_power(dim: usize, exponent: f64) -> Result<Self, FunctionError> {
        if !(exponent > 0.0 && exponent <= 1.0) {
            return Err(FunctionError::Parameter {
                name: "holder-power".into(),
                reason: format!("exponent {exponent} outside (0, 1]"),
            });
        }
        Ok(Self {
            kind: TestKind::HolderPower { exponent },
            dim,
            bound_sup: 1.0,
            holder: Some(HolderMeta { exponent, norm: 2.0 }),
        })
    }

    pub fn bump(center: Vec<f64>, radius: f64) -> Result<Self, FunctionError> {
        if !(radius > 0.0) {
            return Err(FunctionError::Parameter { name: "bump".into(), reason: format!("radius {radius} must be positive") });
        }
        let dim = center.len();
        Ok(Self { kind: TestKind::Bump { center, radius }, dim, bound_sup: 1.0, holder: None })
    }

    /// Registry lookup with default parameters: `cos-linear` uses `e_1`,
    /// `holder-power` uses `exponent`, `bump` is centred at 0 with radius 1.
    pub fn from_name(name: &str, dim: usize, exponent: f64) -> Result<Self, FunctionError> {
        let mut e1 = vec![0.0; dim];
        if dim > 0 {
            e1[0] = 1.0;
        }
        match name {
            "constant" => Ok(Self::constant(dim, 1.0)),
            "cos-linear" | "cos" => Ok(Self::cos_linear(e1, 0.0)),
            "holder-power" => Self::holder_power(dim, exponent),
            "bump" => Self::bump(vec![0.0; dim], 1.0),
            _ => Err(FunctionError::Unknown {
                kind: "test function",
                name: name.to_string(),
                available: TEST_FUNCTION_NAMES.join(", "),
            }),
        }
    }

    pub fn kind(&self) -> &TestKind {
        &self.kind
    }

    pub fn bound_sup(&self) -> f64 {
        self.bound_sup
    }

    pub fn holder(&self) -> Option<HolderMeta> {
        self.holder
    }

    pub fn is_constant(&self) -> bool {
        matches!(self.kind, TestKind::Constant { .. })
    }

    #[inline]
    pub fn value(&self, x: &[f64]) -> f64 {
        match &self.kind {
            TestKind::Constant { value } => *value,
            TestKind::CosLinear { weights, phase } => {
                let s: f64 = weights.iter().zip(x).map(|(w, v)| w * v).sum();
                (s + phase).cos()
            }
            TestKind::HolderPower { exponent } => x[0].abs().min(1.0).powf(*exponent),
            TestKind::Bump { center, radius } => {
                let d2: f64 = center.iter().zip(x).map(|(c, v)| (v - c) * (v - c)).sum::<f64>() / (radius * radius);
                if d2 < 1.0 {
                    (1.0 - 1.0 / (1.0 - d2)).exp()
                } else {
                    0.0
                }
            }
        }
    }

    /// Analytic gradient where the function is differentiable.
    pub fn gradient(&self, x: &[f64]) -> Option<Vec<f64>> {
        match &self.kind {
            TestKind::Constant { .. } => Some(vec![0.0; self.dim]),
            TestKind::CosLinear { weights, phase } => {
                let s: f64 = weights.iter().zip(x).map(|(w, v)| w * v).sum();
                let d = -(s + phase).sin();
                Some(weights.iter().map(|w| d * w).collect())
            }
            TestKind::Bump { center, radius } => {
                let r2 = radius * radius;
                let d2: f64 = center.iter().zip(x).map(|(c, v)| (v - c) * (v - c)).sum::<f64>() / r2;
                if d2 >= 1.0 {
                    return Some(vec![0.0; self.dim]);
                }
                let f = (1.0 - 1.0 / (1.0 - d2)).exp();
                let g = -f / ((1.0 - d2) * (1.0 - d2)) * 2.0 / r2;
                Some(center.iter().zip(x).map(|(c, v)| g * (v - c)).collect())
            }
            TestKind::HolderPower { .. } => None,
        }
    }
}

impl Field for TestFunction {
    fn dim(&self) -> usize {
        self.dim
    }

    fn codim(&self) -> usize {
        1
    }

    fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        out[0] = self.value(x);
    }

    fn eval_scalar(&self, x: &[f64]) -> f64 {
        self.value(x)
    }

    fn sup_bound(&self) -> Option<f64> {
        Some(self.bound_sup())
    }
}

/// Scalar profile acting coordinatewise or through the sine basis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Profile {
    Zero,
    Constant { value: f64 },
    /// `a sin(v)`.
    Lipschitz { amplitude: f64 },
    /// `a sgn(v) min(1, |v|)^β`.
    HolderPower { amplitude: f64, exponent: f64 },
    /// `a clamp(v, -1, 1)`.
    ClippedLinear { amplitude: f64 },
    /// `a / (1 + |v|^β)`.
    HolderCusp { amplitude: f64, exponent: f64 },
}

impl Profile {
    #[inline]
    pub fn apply(&self, v: f64) -> f64 {
        match *self {
            Profile::Zero => 0.0,
            Profile::Constant { value } => value,
            Profile::Lipschitz { amplitude } => amplitude * v.sin(),
            Profile::HolderPower { amplitude, exponent } => amplitude * v.signum() * v.abs().min(1.0).powf(exponent),
            Profile::ClippedLinear { amplitude } => amplitude * v.clamp(-1.0, 1.0),
            Profile::HolderCusp { amplitude, exponent } => amplitude / (1.0 + v.abs().powf(exponent)),
        }
    }

    /// Hölder exponent, sup norm, and Hölder seminorm of the scalar profile.
    pub fn holder(&self) -> (f64, f64, f64) {
        match *self {
            Profile::Zero => (1.0, 0.0, 0.0),
            Profile::Constant { value } => (1.0, value.abs(), 0.0),
            Profile::Lipschitz { amplitude } => (1.0, amplitude.abs(), amplitude.abs()),
            // an odd β-power jumps by at most 2^{1-β}|x - y|^β across 0
            Profile::HolderPower { amplitude, exponent } => {
                (exponent, amplitude.abs(), amplitude.abs() * 2f64.powf(1.0 - exponent))
            }
            Profile::ClippedLinear { amplitude } => (1.0, amplitude.abs(), amplitude.abs()),
            // |v|^β has seminorm 1 and u ↦ 1/(1+u) is 1-Lipschitz on u ≥ 0
            Profile::HolderCusp { amplitude, exponent } => (exponent, amplitude.abs(), amplitude.abs()),
        }
    }
}

/// How the profile acts on the coordinate vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Coupling {
    /// `B_k(x) = b(x_k)`.
    Diagonal,
    /// `B_k(x) = ⟨b(Σ_j x_j e_j), e_k⟩` with `e_j(ξ) = √(2/π) sin(jξ)` on `[0, π]`.
    SineBasis,
}

/// Bounded drift `B: R^N → R^N` from the registry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Drift {
    name: String,
    dim: usize,
    profile: Profile,
    coupling: Coupling,
}

pub const DRIFT_NAMES: [&str; 7] =
    ["zero", "constant", "lipschitz", "holder-power", "clipped-linear", "holder-cusp", "reaction"];

/// Midpoint nodes for projections onto the sine basis.
const SINE_NODES: usize = 128;

impl Drift {
    pub fn new(name: &str, dim: usize, profile: Profile, coupling: Coupling) -> Self {
        Self { name: name.to_string(), dim, profile, coupling }
    }

    /// Registry lookup. `amplitude` scales the profile; `exponent` is the
    /// Hölder exponent where the profile has one. `reaction` couples a
    /// cusp profile through the sine basis.
    pub fn from_name(name: &str, dim: usize, amplitude: f64, exponent: f64) -> Result<Self, FunctionError> {
        let check_exp = || {
            if exponent > 0.0 && exponent <= 1.0 {
                Ok(())
            } else {
                Err(FunctionError::Parameter { name: name.to_string(), reason: format!("exponent {exponent} outside (0, 1]") })
            }
        };
        let (profile, coupling) = match name {
            "zero" => (Profile::Zero, Coupling::Diagonal),
            "constant" => (Profile::Constant { value: amplitude }, Coupling::Diagonal),
            "lipschitz" => (Profile::Lipschitz { amplitude }, Coupling::Diagonal),
            "holder-power" => {
                check_exp()?;
                (Profile::HolderPower { amplitude, exponent }, Coupling::Diagonal)
            }
            "clipped-linear" => (Profile::ClippedLinear { amplitude }, Coupling::Diagonal),
            "holder-cusp" => {
                check_exp()?;
                (Profile::HolderCusp { amplitude, exponent }, Coupling::Diagonal)
            }
            "reaction" => {
                check_exp()?;
                (Profile::HolderCusp { amplitude, exponent }, Coupling::SineBasis)
            }
            _ => {
                return Err(FunctionError::Unknown {
                    kind: "drift",
                    name: name.to_string(),
                    available: DRIFT_NAMES.join(", "),
                })
            }
        };
        Ok(Self::new(name, dim, profile, coupling))
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn profile(&self) -> Profile {
        self.profile
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.profile, Profile::Zero)
    }

    /// Hölder exponent of the drift.
    pub fn exponent(&self) -> f64 {
        self.profile.holder().0
    }

    /// Bound on `sup |B|` (Euclidean norm).
    pub fn sup_norm(&self) -> f64 {
        let (_, sup, _) = self.profile.holder();
        match self.coupling {
            Coupling::Diagonal => sup * (self.dim as f64).sqrt(),
            // Bessel: Σ_k ⟨b∘X, e_k⟩² ≤ ∫_0^π b² ≤ π sup²
            Coupling::SineBasis => sup * PI.sqrt(),
        }
    }

    /// Bound on the Hölder seminorm `sup |B(x) - B(y)| / |x - y|^β`.
    pub fn seminorm(&self) -> f64 {
        let (beta, _, semi) = self.profile.holder();
        match self.coupling {
            // Σ_k semi² |x_k - y_k|^{2β} ≤ semi² N^{1-β} |x - y|^{2β}
            Coupling::Diagonal => semi * (self.dim as f64).powf(0.5 * (1.0 - beta)),
            // |b∘X - b∘Y| ≤ semi |X - Y|^β pointwise with X - Y in the span of
            // the e_j, and sup|e_j| = √(2/π) gives |X - Y|_∞ ≤ √(2N/π) |x - y|
            Coupling::SineBasis => semi * PI.sqrt() * (2.0 * self.dim as f64 / PI).powf(0.5 * beta),
        }
    }

    /// `‖B‖_β = sup|B| + [B]_β`.
    pub fn holder_norm(&self) -> f64 {
        self.sup_norm() + self.seminorm()
    }
}

impl Field for Drift {
    fn dim(&self) -> usize {
        self.dim
    }

    fn codim(&self) -> usize {
        self.dim
    }

    fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        match self.coupling {
            Coupling::Diagonal => {
                for (o, &v) in out.iter_mut().zip(x) {
                    *o = self.profile.apply(v);
                }
            }
            Coupling::SineBasis => {
                let norm = (2.0 / PI).sqrt();
                let h = PI / SINE_NODES as f64;
                out.iter_mut().for_each(|o| *o = 0.0);
                for i in 0..SINE_NODES {
                    let xi = (i as f64 + 0.5) * h;
                    let field: f64 = x.iter().enumerate().map(|(j, &v)| v * norm * ((j + 1) as f64 * xi).sin()).sum();
                    let b = self.profile.apply(field) * h;
                    for (k, o) in out.iter_mut().enumerate() {
                        *o += b * norm * ((k + 1) as f64 * xi).sin();
                    }
                }
            }
        }
    }

    fn sup_bound(&self) -> Option<f64> {
        Some(self.sup_norm())
    }
}

/// Empirical Hölder norm: a lower bound of the true norm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HolderEstimate {
    pub sup: f64,
    pub quotient: f64,
    pub pairs: usize,
}

impl HolderEstimate {
    /// `sup + quotient`, a lower bound of `‖f‖_β`.
    pub fn lower_bound(&self) -> f64 {
        self.sup + self.quotient
    }
}

/// Probe `pairs` pairs in `[-extent, extent]^dim` with separations
/// log-uniform in `[1e-6, 2 extent]`, a quarter of them anchored at the origin.
pub fn holder_norm_estimate<F: Field + ?Sized>(
    f: &F,
    exponent: f64,
    extent: f64,
    pairs: usize,
    key: StreamKey,
) -> HolderEstimate {
    let dim = f.dim();
    let mut rng = key.rng();
    let mut sup: f64 = 0.0;
    let mut quotient: f64 = 0.0;
    let (mut fx, mut fy) = (vec![0.0; f.codim()], vec![0.0; f.codim()]);
    let mut x = vec![0.0; dim];
    let mut y = vec![0.0; dim];
    let (lo, hi) = ((1e-6f64).ln(), (2.0 * extent).ln());
    for i in 0..pairs {
        let sep = (lo + (hi - lo) * rng.random::<f64>()).exp();
        if i % 4 == 0 {
            // pairs anchored at the origin resolve kinks located there
            let dir: Vec<f64> = (0..dim).map(|_| rng.random::<f64>() - 0.5).collect();
            let n = dir.iter().map(|d| d * d).sum::<f64>().sqrt().max(1e-300);
            for k in 0..dim {
                x[k] = 0.0;
                y[k] = sep * dir[k] / n;
            }
        } else {
            let dir: Vec<f64> = (0..dim).map(|_| rng.random::<f64>() - 0.5).collect();
            let n = dir.iter().map(|d| d * d).sum::<f64>().sqrt().max(1e-300);
            for k in 0..dim {
                x[k] = extent * (2.0 * rng.random::<f64>() - 1.0);
                y[k] = x[k] + sep * dir[k] / n;
            }
        }
        f.eval_into(&x, &mut fx);
        f.eval_into(&y, &mut fy);
        let nx = fx.iter().map(|v| v * v).sum::<f64>().sqrt();
        let ny = fy.iter().map(|v| v * v).sum::<f64>().sqrt();
        sup = sup.max(nx).max(ny);
        let diff = fx.iter().zip(&fy).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        let dist = x.iter().zip(&y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        if dist > 0.0 {
            quotient = quotient.max(diff / dist.powf(exponent));
        }
    }
    HolderEstimate { sup, quotient, pairs }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn registry_lists_names_on_miss() {
        let e = Drift::from_name("nope", 2, 1.0, 0.5).unwrap_err();
        assert!(e.to_string().contains("holder-power"));
        let e = TestFunction::from_name("nope", 2, 0.5).unwrap_err();
        assert!(e.to_string().contains("bump"));
    }

    #[test]
    fn zero_drift_is_zero() {
        let b = Drift::from_name("zero", 3, 1.0, 0.5).unwrap();
        assert_eq!(b.eval(&[1.0, -2.0, 0.3]), vec![0.0; 3]);
        assert_eq!(b.holder_norm(), 0.0);
    }

    #[test]
    fn holder_power_metadata_is_exact() {
        let f = TestFunction::holder_power(1, 0.6).unwrap();
        assert_eq!(f.holder().unwrap().norm, 2.0);
        // exact quotient 1 at pairs (0, δ) for δ ≤ 1
        for d in [1e-6, 1e-3, 0.5, 1.0] {
            assert!((f.value(&[d]) - f.value(&[0.0])) / d.powf(0.6) - 1.0 < 1e-12);
        }
        let est = holder_norm_estimate(&f, 0.6, 3.0, 2000, StreamKey::new(2));
        assert!(est.quotient >= 0.999 && est.quotient <= 1.0 + 1e-12, "{est:?}");
        assert_eq!(est.sup, 1.0);
    }

    #[test]
    fn constant_has_sup_only() {
        let f = TestFunction::constant(2, 1.0);
        let est = holder_norm_estimate(&f, 0.5, 3.0, 1000, StreamKey::new(3));
        assert_eq!(est.quotient, 0.0);
        assert_eq!(est.lower_bound(), 1.0);
    }

    #[test]
    fn cos_lipschitz_estimate() {
        let f = TestFunction::cos_linear(vec![1.0], 0.0);
        let est = holder_norm_estimate(&f, 1.0, 4.0, 4000, StreamKey::new(4));
        assert!(est.quotient >= 0.9 && est.quotient <= 1.0, "{est:?}");
    }

    #[test]
    fn sine_coupling_of_constant_profile_projects_correctly() {
        // b ≡ 1: ⟨1, e_k⟩ = √(2/π)(1 - cos kπ)/k
        let d = Drift::new("c", 3, Profile::Constant { value: 1.0 }, Coupling::SineBasis);
        let out = d.eval(&[0.2, -0.4, 0.7]);
        let norm = (2.0 / PI).sqrt();
        let exact = [2.0 * norm, 0.0, 2.0 * norm / 3.0];
        for k in 0..3 {
            assert!((out[k] - exact[k]).abs() < 5e-4, "{k}: {} vs {}", out[k], exact[k]);
        }
    }

    #[test]
    fn bump_gradient_matches_finite_difference() {
        let f = TestFunction::bump(vec![0.1, -0.2], 1.3).unwrap();
        let x = [0.4, 0.1];
        let g = f.gradient(&x).unwrap();
        let d = 1e-6;
        for k in 0..2 {
            let mut xp = x;
            let mut xm = x;
            xp[k] += d;
            xm[k] -= d;
            let fd = (f.value(&xp) - f.value(&xm)) / (2.0 * d);
            assert!((fd - g[k]).abs() < 1e-7);
        }
    }

    proptest! {
        #[test]
        fn drifts_respect_their_bounds(
            name_idx in 0usize..7,
            exponent in 0.3f64..1.0,
            x in proptest::collection::vec(-5.0f64..5.0, 3),
            y in proptest::collection::vec(-5.0f64..5.0, 3),
        ) {
            let d = Drift::from_name(DRIFT_NAMES[name_idx], 3, 0.8, exponent).unwrap();
            let (bx, by) = (d.eval(&x), d.eval(&y));
            let nx = bx.iter().map(|v| v * v).sum::<f64>().sqrt();
            prop_assert!(nx <= d.sup_norm() + 1e-12);
            let diff = bx.iter().zip(&by).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            let dist = x.iter().zip(&y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            prop_assert!(diff <= d.seminorm() * dist.powf(d.exponent()) * (1.0 + 1e-9) + 1e-12);
        }

        #[test]
        fn test_functions_respect_sup_bound(idx in 0usize..4, x in proptest::collection::vec(-5.0f64..5.0, 2)) {
            let f = TestFunction::from_name(TEST_FUNCTION_NAMES[idx], 2, 0.7).unwrap();
            prop_assert!(f.value(&x).abs() <= f.bound_sup() + 1e-15);
        }
    }
}
