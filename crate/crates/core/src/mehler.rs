//! Monte Carlo evaluation of the Ornstein–Uhlenbeck (Mehler) semigroup
//! `R_t f(x) = E f(e^{tA}x + Z_A(t))` on the truncated coordinates, with
//! score-function estimators for its first and second derivatives.
//!
//! Mode `k` of the stochastic convolution is `c_k(t) S_k` with `S_k` i.i.d.
//! standard symmetric stable, so with `a_k = e^{-γ_k t}` and `ψ = p'/p`:
//!
//! - `⟨DR_t f(x), h⟩ = -E[f(Y) Σ_k ψ(S_k) a_k h_k / c_k]`
//! - `⟨D²R_t f(x) h, g⟩ = E[f(Y) (Σ_{k≠l} u_k v_l + Σ_l (p''/p)(S_l) a_l² h_l g_l / c_l²)]`
//!   with `u_k = ψ(S_k) a_k h_k / c_k` and `v_l = ψ(S_l) a_l g_l / c_l`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::functions::{Field, TestFunction, TestKind};
use crate::rng::{batched, MeanAccumulator, StreamKey};
use crate::spectral::{ou_scale_raw, SpectralError, SpectralModel};
use crate::stable::{standard_variate, DensityTable};

pub const MIN_SAMPLES: usize = 1000;

#[derive(Debug, Error, PartialEq)]
pub enum MehlerError {
    #[error("time must be positive, got {0}")]
    NonPositiveTime(f64),
    #[error("at least {MIN_SAMPLES} samples required, got {0}")]
    TooFewSamples(usize),
    #[error("dimension mismatch: model has {model} modes, argument has {arg}")]
    Dimension { model: usize, arg: usize },
    #[error("direction norm {0} exceeds 1")]
    Direction(f64),
    #[error("density table is for alpha {table}, model has alpha {model}")]
    AlphaMismatch { table: f64, model: f64 },
    #[error("test function has no Hölder metadata")]
    MissingHolder,
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

/// Monte Carlo mean with its standard error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemigroupEstimate {
    pub value: f64,
    pub std_error: f64,
    pub samples: usize,
    pub t: f64,
    pub x: Vec<f64>,
}

impl SemigroupEstimate {
    fn from_acc(acc: &MeanAccumulator, t: f64, x: &[f64]) -> Self {
        Self { value: acc.mean(), std_error: acc.std_error(), samples: acc.count() as usize, t, x: x.to_vec() }
    }

    /// `|value - target| ≤ k · std_error`.
    pub fn within(&self, target: f64, k: f64) -> bool {
        (self.value - target).abs() <= k * self.std_error
    }
}

/// Per-mode damping `a_k = e^{-γ_k t}` and Mehler scales `c_k(t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct OuCoefficients {
    pub alpha: f64,
    pub damping: Vec<f64>,
    pub scale: Vec<f64>,
}

impl OuCoefficients {
    pub fn new(model: &SpectralModel, t: f64) -> Result<Self, MehlerError> {
        if !(t > 0.0) {
            return Err(MehlerError::NonPositiveTime(t));
        }
        let alpha = model.alpha();
        let (mut damping, mut scale) = (Vec::new(), Vec::new());
        for k in 1..=model.truncation() {
            let (g, b) = (model.gamma(k), model.beta(k));
            damping.push((-g * t).exp());
            scale.push(ou_scale_raw(alpha, g, b, t));
        }
        Ok(Self { alpha, damping, scale })
    }

    pub fn dim(&self) -> usize {
        self.damping.len()
    }

    /// `e^{tA}x + c ∘ s`.
    #[inline]
    pub fn state(&self, x: &[f64], s: &[f64], out: &mut [f64]) {
        for k in 0..out.len() {
            out[k] = self.damping[k] * x[k] + self.scale[k] * s[k];
        }
    }

    /// `√(Σ (a_k h_k / c_k)²)`.
    pub fn weighted_norm(&self, h: &[f64]) -> f64 {
        h.iter()
            .enumerate()
            .map(|(k, hk)| (self.damping[k] * hk / self.scale[k]).powi(2))
            .sum::<f64>()
            .sqrt()
    }
}

fn check_vec(model: &SpectralModel, v: &[f64]) -> Result<(), MehlerError> {
    if v.len() != model.truncation() {
        return Err(MehlerError::Dimension { model: model.truncation(), arg: v.len() });
    }
    Ok(())
}

fn check_direction(model: &SpectralModel, h: &[f64]) -> Result<(), MehlerError> {
    check_vec(model, h)?;
    let n = h.iter().map(|v| v * v).sum::<f64>().sqrt();
    if n > 1.0 + 1e-12 {
        return Err(MehlerError::Direction(n));
    }
    Ok(())
}

fn check_table(model: &SpectralModel, table: &DensityTable) -> Result<(), MehlerError> {
    if table.alpha() != model.alpha() {
        return Err(MehlerError::AlphaMismatch { table: table.alpha(), model: model.alpha() });
    }
    Ok(())
}

/// Draw one state of `Y^x_t`: coordinate `k` is `e^{-γ_k t} x_k + c_k(t) S_k`.
pub fn sample_ou_state(model: &SpectralModel, x: &[f64], t: f64, key: StreamKey) -> Result<Vec<f64>, MehlerError> {
    check_vec(model, x)?;
    let coef = OuCoefficients::new(model, t)?;
    let mut rng = key.rng();
    let s: Vec<f64> = (0..coef.dim()).map(|_| standard_variate(coef.alpha, &mut rng)).collect();
    let mut y = vec![0.0; coef.dim()];
    coef.state(x, &s, &mut y);
    Ok(y)
}

/// Monte Carlo mean of `weight(S, Y)` over `samples` draws of the standard
/// stable vector `S` and the state `Y = e^{tA}x + c ∘ S`.
fn monte_carlo<W>(coef: &OuCoefficients, x: &[f64], samples: usize, key: StreamKey, weight: W) -> MeanAccumulator
where
    W: Fn(&[f64], &[f64]) -> f64 + Sync + Send,
{
    let n = coef.dim();
    batched(
        samples,
        key,
        |k, m| {
            let mut rng = k.rng();
            let mut acc = MeanAccumulator::new();
            let mut s = vec![0.0; n];
            let mut y = vec![0.0; n];
            for _ in 0..m {
                for v in s.iter_mut() {
                    *v = standard_variate(coef.alpha, &mut rng);
                }
                coef.state(x, &s, &mut y);
                acc.push(weight(&s, &y));
            }
            acc
        },
        |a, b| a.merge(&b),
        MeanAccumulator::new(),
    )
}

/// `R_t f(x)` by Monte Carlo.
pub fn apply<F: Field + ?Sized>(
    f: &F,
    model: &SpectralModel,
    x: &[f64],
    t: f64,
    samples: usize,
    key: StreamKey,
) -> Result<SemigroupEstimate, MehlerError> {
    check_vec(model, x)?;
    if samples < MIN_SAMPLES {
        return Err(MehlerError::TooFewSamples(samples));
    }
    let coef = OuCoefficients::new(model, t)?;
    let acc = monte_carlo(&coef, x, samples, key, |_, y| f.eval_scalar(y));
    Ok(SemigroupEstimate::from_acc(&acc, t, x))
}

/// `⟨DR_t f(x), h⟩` by the score-function formula.
#[allow(clippy::too_many_arguments)]
pub fn gradient<F: Field + ?Sized>(
    f: &F,
    model: &SpectralModel,
    table: &DensityTable,
    x: &[f64],
    h: &[f64],
    t: f64,
    samples: usize,
    key: StreamKey,
) -> Result<SemigroupEstimate, MehlerError> {
    check_vec(model, x)?;
    check_direction(model, h)?;
    check_table(model, table)?;
    if samples < MIN_SAMPLES {
        return Err(MehlerError::TooFewSamples(samples));
    }
    let coef = OuCoefficients::new(model, t)?;
    let w: Vec<f64> = (0..coef.dim()).map(|k| coef.damping[k] * h[k] / coef.scale[k]).collect();
    let acc = monte_carlo(&coef, x, samples, key, |s, y| {
        let score: f64 = s.iter().zip(&w).filter(|(_, wk)| **wk != 0.0).map(|(sk, wk)| table.score(*sk) * wk).sum();
        -f.eval_scalar(y) * score
    });
    Ok(SemigroupEstimate::from_acc(&acc, t, x))
}

/// `⟨D²R_t f(x) h, g⟩` by the double-score formula.
#[allow(clippy::too_many_arguments)]
pub fn hessian_action<F: Field + ?Sized>(
    f: &F,
    model: &SpectralModel,
    table: &DensityTable,
    x: &[f64],
    h: &[f64],
    g: &[f64],
    t: f64,
    samples: usize,
    key: StreamKey,
) -> Result<SemigroupEstimate, MehlerError> {
    check_vec(model, x)?;
    check_direction(model, h)?;
    check_direction(model, g)?;
    check_table(model, table)?;
    if samples < MIN_SAMPLES {
        return Err(MehlerError::TooFewSamples(samples));
    }
    let coef = OuCoefficients::new(model, t)?;
    let n = coef.dim();
    let wh: Vec<f64> = (0..n).map(|k| coef.damping[k] * h[k] / coef.scale[k]).collect();
    let wg: Vec<f64> = (0..n).map(|k| coef.damping[k] * g[k] / coef.scale[k]).collect();
    let acc = monte_carlo(&coef, x, samples, key, |s, y| {
        let (mut su, mut sv, mut suv, mut diag) = (0.0, 0.0, 0.0, 0.0);
        for k in 0..n {
            if wh[k] == 0.0 && wg[k] == 0.0 {
                continue;
            }
            let psi = table.score(s[k]);
            let (u, v) = (psi * wh[k], psi * wg[k]);
            su += u;
            sv += v;
            suv += u * v;
            diag += table.curvature(s[k]) * wh[k] * wg[k];
        }
        f.eval_scalar(y) * (su * sv - suv + diag)
    });
    Ok(SemigroupEstimate::from_acc(&acc, t, x))
}

/// Closed form of `R_t f`, its gradient and Hessian for
/// `f = cos(⟨w, x⟩ + φ)`: `cos(⟨w, e^{tA}x⟩ + φ) Π_k exp(-|w_k c_k(t)|^α)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CosOracle {
    pub value: f64,
    pub gradient: Vec<f64>,
    pub hessian: Vec<Vec<f64>>,
}

impl CosOracle {
    pub fn new(weights: &[f64], phase: f64, model: &SpectralModel, x: &[f64], t: f64) -> Result<Self, MehlerError> {
        check_vec(model, x)?;
        check_vec(model, weights)?;
        let coef = OuCoefficients::new(model, t)?;
        let n = coef.dim();
        let theta: f64 = (0..n).map(|k| weights[k] * coef.damping[k] * x[k]).sum::<f64>() + phase;
        let damp: f64 = (0..n).map(|k| -(weights[k] * coef.scale[k]).abs().powf(coef.alpha)).sum::<f64>().exp();
        let wa: Vec<f64> = (0..n).map(|k| weights[k] * coef.damping[k]).collect();
        let gradient = wa.iter().map(|v| -theta.sin() * damp * v).collect();
        let hessian = wa.iter().map(|vi| wa.iter().map(|vj| -theta.cos() * damp * vi * vj).collect()).collect();
        Ok(Self { value: theta.cos() * damp, gradient, hessian })
    }

    /// Oracle for a registry test function, if it is of cosine type.
    pub fn for_function(f: &TestFunction, model: &SpectralModel, x: &[f64], t: f64) -> Result<Option<Self>, MehlerError> {
        match f.kind() {
            TestKind::CosLinear { weights, phase } => Self::new(weights, *phase, model, x, t).map(Some),
            TestKind::Constant { value } => Ok(Some(Self {
                value: *value,
                gradient: vec![0.0; model.truncation()],
                hessian: vec![vec![0.0; model.truncation()]; model.truncation()],
            })),
            _ => Ok(None),
        }
    }

    pub fn directional(&self, h: &[f64]) -> f64 {
        self.gradient.iter().zip(h).map(|(a, b)| a * b).sum()
    }

    pub fn second_directional(&self, h: &[f64], g: &[f64]) -> f64 {
        self.hessian.iter().zip(h).map(|(row, hi)| hi * row.iter().zip(g).map(|(a, b)| a * b).sum::<f64>()).sum()
    }
}

/// Gradient bound `c_α Λ_t ‖f‖₀` in its literal form.
pub fn first_bound(c_alpha: f64, lambda_t: f64, sup_f: f64) -> f64 {
    c_alpha * lambda_t * sup_f
}

/// Hessian bound `c̃_α Λ_t² ‖f‖₀` in its literal form.
pub fn second_bound(c_tilde_alpha: f64, lambda_t: f64, sup_f: f64) -> f64 {
    c_tilde_alpha * lambda_t * lambda_t * sup_f
}

/// Cauchy–Schwarz gradient bound `√c_α ‖f‖₀ (Σ (a_k h_k / c_k)²)^{1/2}`,
/// valid for every normalization of the stable law.
pub fn gradient_bound_cs(coef: &OuCoefficients, c_alpha: f64, h: &[f64], sup_f: f64) -> f64 {
    c_alpha.sqrt() * coef.weighted_norm(h) * sup_f
}

/// Cauchy–Schwarz Hessian bound `‖f‖₀ (E W²)^{1/2}` with the exact second
/// moment of the double-score weight `W`:
/// `E W² = c_α² Σ_{k≠l} w_k² w_l² (h_k² g_l² + h_k g_k h_l g_l) + I₂ Σ_l w_l⁴ h_l² g_l²`,
/// `w_k = a_k / c_k`, `I₂ = ∫ p''²/p`.
pub fn hessian_bound_cs(coef: &OuCoefficients, c_alpha: f64, curvature_info: f64, h: &[f64], g: &[f64], sup_f: f64) -> f64 {
    let n = coef.dim();
    let w: Vec<f64> = (0..n).map(|k| coef.damping[k] / coef.scale[k]).collect();
    let mut off = 0.0;
    let mut diag = 0.0;
    for k in 0..n {
        for l in 0..n {
            if k != l {
                off += w[k].powi(2) * w[l].powi(2) * (h[k] * h[k] * g[l] * g[l] + h[k] * g[k] * h[l] * g[l]);
            }
        }
        diag += w[k].powi(4) * h[k] * h[k] * g[k] * g[k];
    }
    (c_alpha * c_alpha * off + curvature_info * diag).max(0.0).sqrt() * sup_f
}

/// Bound on the score variance discarded by truncating at `N` modes, for a
/// unit direction: `c_α sup_{N < k ≤ N + extra} (a_k / c_k)²`. Zero when
/// the model has no modes past `N`.
pub fn score_tail_certificate(model: &SpectralModel, t: f64, c_alpha: f64, extra: usize) -> Result<f64, MehlerError> {
    if !(t > 0.0) {
        return Err(MehlerError::NonPositiveTime(t));
    }
    let n = model.truncation();
    let mut worst: f64 = 0.0;
    for k in n + 1..=n + extra {
        let (Some(g), Some(b)) = (model.gamma_rule().get(k), model.beta_rule().get(k)) else {
            break;
        };
        let w = (-g * t).exp() / ou_scale_raw(model.alpha(), g, b, t);
        worst = worst.max(w * w);
    }
    Ok(c_alpha * worst)
}

/// One pair of the Hölder-gradient check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HolderPair {
    pub distance: f64,
    pub difference: f64,
    pub std_error: f64,
    /// `Λ_t^{1+r-β} ‖f‖_β |x - y|^r` without the constant.
    pub shape: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HolderGradientReport {
    pub t: f64,
    pub r: f64,
    pub lambda_t: f64,
    /// Constant fitted on the first half of the pairs.
    pub fitted_constant: f64,
    /// Pairs in the second half exceeding the fitted bound by more than 3σ.
    pub violations: usize,
    pub validated: usize,
    pub pairs: Vec<HolderPair>,
}

/// Estimate `|⟨DR_t f(x) - DR_t f(y), h⟩|` for each pair with common random
/// numbers, fit the constant of `C Λ_t^{1+r-β} ‖f‖_β |x-y|^r` on the first
/// half of the pairs, and count 3σ violations on the second half.
#[allow(clippy::too_many_arguments)]
pub fn verify_holder_gradient_bound(
    f: &TestFunction,
    model: &SpectralModel,
    table: &DensityTable,
    pairs: &[(Vec<f64>, Vec<f64>)],
    h: &[f64],
    t: f64,
    r: f64,
    samples: usize,
    key: StreamKey,
) -> Result<HolderGradientReport, MehlerError> {
    let meta = f.holder().ok_or(MehlerError::MissingHolder)?;
    check_direction(model, h)?;
    check_table(model, table)?;
    let coef = OuCoefficients::new(model, t)?;
    let lambda_t = model.lambda_t(t)?.value;
    let w: Vec<f64> = (0..coef.dim()).map(|k| coef.damping[k] * h[k] / coef.scale[k]).collect();
    let mut out = Vec::with_capacity(pairs.len());
    for (i, (x, y)) in pairs.iter().enumerate() {
        check_vec(model, x)?;
        check_vec(model, y)?;
        let distance = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        if distance == 0.0 {
            out.push(HolderPair { distance, difference: 0.0, std_error: 0.0, shape: 0.0 });
            continue;
        }
        let n = coef.dim();
        let acc = monte_carlo(&coef, x, samples, key.child(i as u64), |s, yx| {
            let mut yy = vec![0.0; n];
            coef.state(y, s, &mut yy);
            let score: f64 = s.iter().zip(&w).map(|(sk, wk)| table.score(*sk) * wk).sum();
            -(f.value(yx) - f.value(&yy)) * score
        });
        let shape = lambda_t.powf(1.0 + r - meta.exponent) * meta.norm * distance.powf(r);
        out.push(HolderPair { distance, difference: acc.mean().abs(), std_error: acc.std_error(), shape });
    }
    let half = out.len() / 2;
    let fitted_constant = out[..half]
        .iter()
        .filter(|p| p.shape > 0.0)
        .map(|p| p.difference / p.shape)
        .fold(0.0, f64::max);
    let validation: Vec<&HolderPair> = out[half..].iter().filter(|p| p.shape > 0.0).collect();
    let violations = validation.iter().filter(|p| p.difference - 3.0 * p.std_error > fitted_constant * p.shape).count();
    Ok(HolderGradientReport { t, r, lambda_t, fitted_constant, violations, validated: validation.len(), pairs: out })
}
