//! Diagonal operator and noise data `(γ_n, β_n)`: hypothesis checks, the
//! smoothing functional `Λ_t`, the resolvent integrals `C_λ`, and the
//! admissible Hölder ranges.

use std::f64::consts::E;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::quadrature::{graded_breaks, uniform_breaks, GaussLegendre};

#[derive(Debug, Error, PartialEq)]
pub enum SpectralError {
    #[error("stability index {0} outside the open interval (1, 2)")]
    AlphaOutOfRange(f64),
    #[error("invalid sequence rule: {0}")]
    InvalidRule(String),
    #[error("time must be positive, got {0}")]
    NonPositiveTime(f64),
    #[error("lambda must be positive, got {0}")]
    NonPositiveLambda(f64),
    #[error("mode index {index} outside 1..={truncation}")]
    ModeIndex { index: usize, truncation: usize },
    #[error("envelope needs r >= -1/alpha, got r = {r} with alpha = {alpha}")]
    EnvelopeExponent { r: f64, alpha: f64 },
    #[error("preset rejected: {0}")]
    Preset(String),
}

/// Positive sequence indexed from `n = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SequenceRule {
    /// `n ↦ coefficient · n^exponent`.
    Power { coefficient: f64, exponent: f64 },
    /// Finitely many values; nothing is known past the end of the list.
    Explicit { values: Vec<f64> },
}

impl SequenceRule {
    pub fn power(coefficient: f64, exponent: f64) -> Self {
        SequenceRule::Power { coefficient, exponent }
    }

    /// Value at `n ≥ 1`, if the rule defines one.
    pub fn get(&self, n: usize) -> Option<f64> {
        match self {
            SequenceRule::Power { coefficient, exponent } => Some(coefficient * (n as f64).powf(*exponent)),
            SequenceRule::Explicit { values } => values.get(n.checked_sub(1)?).copied(),
        }
    }

}

/// Eigenvalue magnitudes `γ_n` of `-A`, noise amplitudes `β_n`, the stable
/// exponent and the Galerkin truncation level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralModel {
    alpha: f64,
    gamma_rule: SequenceRule,
    beta_rule: SequenceRule,
    truncation: usize,
}

impl SpectralModel {
    pub fn new(
        alpha: f64,
        gamma_rule: SequenceRule,
        beta_rule: SequenceRule,
        truncation: usize,
    ) -> Result<Self, SpectralError> {
        if !(alpha > 1.0 && alpha < 2.0) {
            return Err(SpectralError::AlphaOutOfRange(alpha));
        }
        let bad = |m: String| Err(SpectralError::InvalidRule(m));
        if truncation == 0 {
            return bad("truncation must be at least 1".into());
        }
        match &gamma_rule {
            SequenceRule::Power { coefficient, exponent } => {
                if !(*coefficient > 0.0 && coefficient.is_finite()) || !(*exponent > 0.0 && exponent.is_finite()) {
                    return bad(format!("gamma power rule needs positive coefficient and exponent, got {coefficient}, {exponent}"));
                }
            }
            SequenceRule::Explicit { values } => {
                if values.len() < truncation {
                    return bad(format!("gamma list has {} entries, truncation is {truncation}", values.len()));
                }
                if values.iter().any(|g| !(*g > 0.0 && g.is_finite())) {
                    return bad("gamma values must be positive".into());
                }
                if values.windows(2).any(|w| w[1] < w[0]) {
                    return bad("gamma values must be nondecreasing".into());
                }
            }
        }
        match &beta_rule {
            SequenceRule::Power { coefficient, exponent } => {
                if !(*coefficient > 0.0 && coefficient.is_finite()) || !exponent.is_finite() {
                    return bad(format!("beta power rule needs a positive coefficient, got {coefficient}"));
                }
            }
            SequenceRule::Explicit { values } => {
                if values.len() < truncation {
                    return bad(format!("beta list has {} entries, truncation is {truncation}", values.len()));
                }
                if values.iter().any(|b| !(*b > 0.0 && b.is_finite())) {
                    return bad("beta values must be positive".into());
                }
            }
        }
        Ok(Self { alpha, gamma_rule, beta_rule, truncation })
    }

    /// `γ_n = gamma_coef · n^gamma_exp`, `β_n = beta_coef · n^beta_exp`.
    pub fn power_law(
        alpha: f64,
        gamma_coef: f64,
        gamma_exp: f64,
        beta_coef: f64,
        beta_exp: f64,
        truncation: usize,
    ) -> Result<Self, SpectralError> {
        Self::new(
            alpha,
            SequenceRule::power(gamma_coef, gamma_exp),
            SequenceRule::power(beta_coef, beta_exp),
            truncation,
        )
    }

    pub fn explicit(alpha: f64, gammas: Vec<f64>, betas: Vec<f64>) -> Result<Self, SpectralError> {
        let n = gammas.len();
        Self::new(alpha, SequenceRule::Explicit { values: gammas }, SequenceRule::Explicit { values: betas }, n)
    }

    pub fn with_truncation(&self, truncation: usize) -> Result<Self, SpectralError> {
        Self::new(self.alpha, self.gamma_rule.clone(), self.beta_rule.clone(), truncation)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn truncation(&self) -> usize {
        self.truncation
    }

    pub fn gamma_rule(&self) -> &SequenceRule {
        &self.gamma_rule
    }

    pub fn beta_rule(&self) -> &SequenceRule {
        &self.beta_rule
    }

    /// `γ_k` for `1 ≤ k ≤ truncation`.
    pub fn gamma(&self, k: usize) -> f64 {
        self.gamma_rule.get(k).expect("mode index within the defined range")
    }

    /// `β_k` for `1 ≤ k ≤ truncation`.
    pub fn beta(&self, k: usize) -> f64 {
        self.beta_rule.get(k).expect("mode index within the defined range")
    }

    /// `(γ_1..γ_N)`.
    pub fn gammas(&self) -> Vec<f64> {
        (1..=self.truncation).map(|k| self.gamma(k)).collect()
    }

    /// `(β_1..β_N)`.
    pub fn betas(&self) -> Vec<f64> {
        (1..=self.truncation).map(|k| self.beta(k)).collect()
    }

    /// `(r, K)` with `β_n = K γ_n^{-r}` exactly, when both rules are power laws.
    pub fn power_relation(&self) -> Option<(f64, f64)> {
        match (&self.gamma_rule, &self.beta_rule) {
            (
                SequenceRule::Power { coefficient: c, exponent: q },
                SequenceRule::Power { coefficient: b, exponent: s },
            ) => {
                let r = -s / q;
                Some((r, b * c.powf(r)))
            }
            _ => None,
        }
    }

    /// Rate `r + 1/α` of the small-time blow-up `Λ_t ~ t^{-(r+1/α)}`.
    pub fn lambda_rate(&self) -> Option<f64> {
        self.power_relation().map(|(r, _)| r + 1.0 / self.alpha)
    }

    fn lambda_term(&self, n: usize, t: f64) -> f64 {
        let g = self.gamma_rule.get(n).unwrap();
        let b = self.beta_rule.get(n).unwrap();
        (-g * t).exp() * g.powf(1.0 / self.alpha) / b
    }

    /// `Λ_t = sup_n e^{-γ_n t} γ_n^{1/α} / β_n`.
    ///
    /// Power-law models: the summand is unimodal in `γ_n` with continuous
    /// maximizer `γ* = (r + 1/α)/t`, so the sup over all `n ≥ 1` is attained at
    /// one of the two integers bracketing `(γ*/c)^{1/q}`. Other models: the
    /// sup over the listed modes, marked uncertified.
    pub fn lambda_t(&self, t: f64) -> Result<LambdaValue, SpectralError> {
        if !(t > 0.0) {
            return Err(SpectralError::NonPositiveTime(t));
        }
        if let (Some(rate), SequenceRule::Power { coefficient, exponent }) = (self.lambda_rate(), &self.gamma_rule) {
            if rate <= 0.0 {
                return Ok(LambdaValue { value: self.lambda_term(1, t), argmax: 1, certified: true });
            }
            let n_star = (rate / (t * coefficient)).powf(1.0 / exponent);
            let lo = n_star.floor().clamp(1.0, 1e15) as usize;
            let (mut best, mut arg) = (self.lambda_term(lo, t), lo);
            let hi_val = self.lambda_term(lo + 1, t);
            if hi_val > best {
                best = hi_val;
                arg = lo + 1;
            }
            return Ok(LambdaValue { value: best, argmax: arg, certified: true });
        }
        let len = match (&self.gamma_rule, &self.beta_rule) {
            (SequenceRule::Explicit { values: g }, SequenceRule::Explicit { values: b }) => g.len().min(b.len()),
            (SequenceRule::Explicit { values }, _) | (_, SequenceRule::Explicit { values }) => values.len(),
            _ => self.truncation,
        };
        let (mut best, mut arg) = (f64::NEG_INFINITY, 1);
        for n in 1..=len {
            let v = self.lambda_term(n, t);
            if v > best {
                best = v;
                arg = n;
            }
        }
        Ok(LambdaValue { value: best, argmax: arg, certified: false })
    }

    /// `Λ_t` restricted to the modes `1..=N` of the truncated model.
    pub fn lambda_t_truncated(&self, t: f64) -> Result<f64, SpectralError> {
        if !(t > 0.0) {
            return Err(SpectralError::NonPositiveTime(t));
        }
        Ok((1..=self.truncation).map(|n| self.lambda_term(n, t)).fold(f64::NEG_INFINITY, f64::max))
    }

    /// `C_λ(q) = ∫_0^∞ e^{-λt} Λ_t^q dt`.
    ///
    /// Integrability at 0 is decided by the envelope exponent `q(r+1/α) < 1`;
    /// the finite part is computed on `(0, 1]` after the substitution
    /// `t = s^{1/(1-κ)}`, `κ = q(r+1/α)`, which makes the integrand bounded.
    pub fn c_lambda(&self, lambda: f64, q: f64) -> Result<CLambda, SpectralError> {
        if !(lambda > 0.0) {
            return Err(SpectralError::NonPositiveLambda(lambda));
        }
        let kappa = match self.lambda_rate() {
            Some(rate) if rate > 0.0 => q * rate,
            Some(_) => 0.0,
            None => 0.0,
        };
        if kappa >= 1.0 {
            return Ok(CLambda::Divergent { exponent: kappa });
        }
        let certified = self.power_relation().is_some();
        let integrand = |t: f64| {
            let l = self.lambda_t(t).map(|v| v.value).unwrap_or(0.0);
            (-lambda * t).exp() * l.powf(q)
        };
        let gl = GaussLegendre::new(10);
        let m = 1.0 / (1.0 - kappa);
        let mut breaks = graded_breaks(0.0, 0.01, 30);
        breaks.extend(uniform_breaks(0.01, 1.0, 1.0 / 256.0).into_iter().skip(1));
        let head = gl.composite(&breaks, |s| {
            if s == 0.0 {
                return 0.0;
            }
            let t = s.powf(m);
            integrand(t) * m * s.powf(m - 1.0)
        });
        let g1 = self.gamma_rule.get(1).unwrap();
        let decay = lambda + q.max(0.0) * g1;
        let upper = 1.0 + 60.0 / decay.max(1e-12);
        let tail = gl.composite(&uniform_breaks(1.0, upper, (upper - 1.0) / 400.0), integrand);
        Ok(CLambda::Finite { value: head + tail, certified })
    }

    /// `∫_0^∞ e^{-λt} (max_{k ≤ N} e^{-γ_k t} γ_k^{1/α} / β_k)^q dt`, the
    /// contraction integral of the truncated problem. Always finite.
    pub fn c_lambda_truncated(&self, lambda: f64, q: f64) -> Result<f64, SpectralError> {
        if !(lambda > 0.0) {
            return Err(SpectralError::NonPositiveLambda(lambda));
        }
        let integrand = |t: f64| {
            let l = (1..=self.truncation).map(|n| self.lambda_term(n, t)).fold(f64::NEG_INFINITY, f64::max);
            (-lambda * t).exp() * l.powf(q)
        };
        let g1 = self.gamma_rule.get(1).unwrap();
        let upper = 60.0 / (lambda + q.max(0.0) * g1);
        let gl = GaussLegendre::new(10);
        let mut breaks = graded_breaks(0.0, upper.min(1.0), 30);
        if upper > 1.0 {
            breaks.extend(uniform_breaks(1.0, upper, (upper - 1.0) / 400.0).into_iter().skip(1));
        }
        Ok(gl.composite(&breaks, integrand))
    }

    /// `c_k(t) = β_k ((1 - e^{-αγ_k t}) / (αγ_k))^{1/α}`, the scale of the
    /// mode-`k` stochastic convolution at time `t`.
    pub fn ou_scale(&self, k: usize, t: f64) -> Result<f64, SpectralError> {
        if k == 0 || k > self.truncation {
            return Err(SpectralError::ModeIndex { index: k, truncation: self.truncation });
        }
        if !(t >= 0.0) {
            return Err(SpectralError::NonPositiveTime(t));
        }
        Ok(ou_scale_raw(self.alpha, self.gamma(k), self.beta(k), t))
    }

    /// `Σ_n β_n^α` (condition for the noise to live in the state space).
    pub fn sum_beta_alpha(&self) -> SeriesValue {
        let a = self.alpha;
        match &self.beta_rule {
            SequenceRule::Power { coefficient, exponent } => {
                power_series(coefficient.powf(a), exponent * a)
            }
            SequenceRule::Explicit { values } => {
                SeriesValue::uncertified(values.iter().map(|b| b.powf(a)).sum())
            }
        }
    }

    /// `Σ_n 1/γ_n`.
    pub fn sum_inv_gamma(&self) -> SeriesValue {
        match &self.gamma_rule {
            SequenceRule::Power { coefficient, exponent } => power_series(1.0 / coefficient, -exponent),
            SequenceRule::Explicit { values } => SeriesValue::uncertified(values.iter().map(|g| 1.0 / g).sum()),
        }
    }

    /// `Σ_m (1 - e^{-2Tγ_m}) / (2γ_m)`; vanishes as `T → 0`.
    pub fn gronwall_sum(&self, horizon: f64) -> SeriesValue {
        let term = |g: f64| -(-2.0 * horizon * g).exp_m1() / (2.0 * g);
        match &self.gamma_rule {
            SequenceRule::Power { coefficient, exponent } => {
                if *exponent <= 1.0 {
                    return SeriesValue::divergent(PARTIAL_TERMS);
                }
                let partial: f64 = (1..=PARTIAL_TERMS).map(|n| term(coefficient * (n as f64).powf(*exponent))).sum();
                // each term lies in [0, 1/(2γ_n)]
                let m = PARTIAL_TERMS as f64;
                let upper = m.powf(1.0 - exponent) / (2.0 * coefficient * (exponent - 1.0));
                SeriesValue { partial, terms: PARTIAL_TERMS, remainder: (0.0, upper), status: SeriesStatus::Convergent }
            }
            SequenceRule::Explicit { values } => SeriesValue::uncertified(values.iter().map(|&g| term(g)).sum()),
        }
    }

    /// Hypothesis report: conditions on `γ_n`, `β_n`, and the regularity
    /// exponent of the smoothing functional.
    pub fn check_conditions(&self) -> HypothesisReport {
        let increasing = match &self.gamma_rule {
            SequenceRule::Power { .. } => SeriesStatus::Convergent,
            SequenceRule::Explicit { .. } => SeriesStatus::Uncertified,
        };
        let sum_beta_alpha = self.sum_beta_alpha();
        let sum_inv_gamma = self.sum_inv_gamma();
        let (gamma_exponent, gamma_certified) = match self.lambda_rate() {
            Some(rate) => (gamma_exponent_from_rate(rate, self.alpha), true),
            None => (self.probe_gamma_exponent(), false),
        };
        let mut lambda_probe = Vec::new();
        let probe_qs: Vec<f64> = match gamma_exponent {
            Some(g) => vec![1.0, 0.5 * (1.0 + g), g - 0.01],
            None => vec![1.0],
        };
        for q in probe_qs {
            for lambda in [1.0, 10.0] {
                if let Ok(v) = self.c_lambda(lambda, q) {
                    lambda_probe.push(LambdaProbe { q, lambda, integral: v });
                }
            }
        }
        HypothesisReport {
            gamma_unbounded: increasing,
            sum_beta_alpha,
            sum_inv_gamma,
            gamma_exponent,
            gamma_certified,
            lambda_probe,
        }
    }

    /// Largest `q` on a ladder in `(1, α]` whose probe integral is finite.
    fn probe_gamma_exponent(&self) -> Option<f64> {
        let a = self.alpha;
        let mut best = None;
        for i in 1..=20 {
            let q = 1.0 + (a - 1.0) * i as f64 / 20.0;
            match self.c_lambda(1.0, q) {
                Ok(CLambda::Finite { value, .. }) if value.is_finite() => best = Some(q),
                _ => break,
            }
        }
        best
    }
}

#[inline]
pub(crate) fn ou_scale_raw(alpha: f64, gamma: f64, beta: f64, t: f64) -> f64 {
    let ag = alpha * gamma;
    beta * (-(-ag * t).exp_m1() / ag).powf(1.0 / alpha)
}

/// `γ = min(α, 1/(r+1/α))` when it exceeds 1; `α` when `Λ_t` stays bounded.
pub fn gamma_exponent_from_rate(rate: f64, alpha: f64) -> Option<f64> {
    let g = if rate <= 0.0 { alpha } else { alpha.min(1.0 / rate) };
    (g > 1.0).then_some(g)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LambdaValue {
    pub value: f64,
    pub argmax: usize,
    /// False when the sup only covers the listed modes.
    pub certified: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum CLambda {
    Finite { value: f64, certified: bool },
    Divergent { exponent: f64 },
}

impl CLambda {
    pub fn value(&self) -> Option<f64> {
        match self {
            CLambda::Finite { value, .. } => Some(*value),
            CLambda::Divergent { .. } => None,
        }
    }
}

/// `t ↦ ((r+1/α)/(e t))^{r+1/α}`: the maximum of `e^{-γt} γ^{r+1/α}` over
/// continuous `γ > 0`, which dominates `Λ_t` for `β_n = γ_n^{-r}`.
pub fn lambda_t_envelope(r: f64, alpha: f64) -> Result<impl Fn(f64) -> f64, SpectralError> {
    let rho = r + 1.0 / alpha;
    if rho < 0.0 || !rho.is_finite() {
        return Err(SpectralError::EnvelopeExponent { r, alpha });
    }
    Ok(move |t: f64| if rho == 0.0 { 1.0 } else { (rho / (E * t)).powf(rho) })
}

const PARTIAL_TERMS: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SeriesStatus {
    Convergent,
    Divergent,
    Uncertified,
}

/// Partial sum of a positive series with a bracket `[lo, hi]` for the
/// remainder past `terms`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesValue {
    pub partial: f64,
    pub terms: usize,
    pub remainder: (f64, f64),
    pub status: SeriesStatus,
}

impl SeriesValue {
    fn uncertified(partial: f64) -> Self {
        Self { partial, terms: 0, remainder: (0.0, f64::INFINITY), status: SeriesStatus::Uncertified }
    }

    fn divergent(terms: usize) -> Self {
        Self { partial: f64::INFINITY, terms, remainder: (f64::INFINITY, f64::INFINITY), status: SeriesStatus::Divergent }
    }

    pub fn is_convergent(&self) -> bool {
        self.status == SeriesStatus::Convergent
    }

    /// Midpoint estimate of the full sum, when certified.
    pub fn estimate(&self) -> Option<f64> {
        self.is_convergent().then_some(self.partial + 0.5 * (self.remainder.0 + self.remainder.1))
    }
}

/// `Σ_{n≥1} a n^p` with integral-comparison remainder bounds
/// `∫_{M+1}^∞ ≤ Σ_{n>M} ≤ ∫_M^∞`.
fn power_series(a: f64, p: f64) -> SeriesValue {
    if p >= -1.0 {
        return SeriesValue::divergent(PARTIAL_TERMS);
    }
    let partial: f64 = (1..=PARTIAL_TERMS).map(|n| a * (n as f64).powf(p)).sum();
    let m = PARTIAL_TERMS as f64;
    let integral = |x: f64| a * x.powf(p + 1.0) / (-p - 1.0);
    SeriesValue { partial, terms: PARTIAL_TERMS, remainder: (integral(m + 1.0), integral(m)), status: SeriesStatus::Convergent }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LambdaProbe {
    pub q: f64,
    pub lambda: f64,
    pub integral: CLambda,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisReport {
    /// `γ_n > 0` nondecreasing and unbounded.
    pub gamma_unbounded: SeriesStatus,
    pub sum_beta_alpha: SeriesValue,
    pub sum_inv_gamma: SeriesValue,
    /// Regularity exponent in `(1, α]`, if one exists.
    pub gamma_exponent: Option<f64>,
    /// False when `gamma_exponent` is only the largest finite numeric probe.
    pub gamma_certified: bool,
    pub lambda_probe: Vec<LambdaProbe>,
}

impl HypothesisReport {
    /// All four conditions certified.
    pub fn all_pass(&self) -> bool {
        self.gamma_unbounded == SeriesStatus::Convergent
            && self.sum_beta_alpha.is_convergent()
            && self.sum_inv_gamma.is_convergent()
            && self.gamma_exponent.is_some()
            && self.gamma_certified
            && self.lambda_probe.iter().all(|p| p.integral.value().is_some())
    }
}

/// Open interval `(lower, upper)` with an emptiness flag.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lower: f64,
    pub upper: f64,
    pub empty: bool,
}

impl Interval {
    pub fn open(lower: f64, upper: f64) -> Self {
        Self { lower, upper, empty: !(lower < upper) }
    }

    pub fn contains(&self, x: f64) -> bool {
        !self.empty && x > self.lower && x < self.upper
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lower + self.upper)
    }
}

/// Hölder exponents admissible for the drift: `(1 + α/2 - γ, 1)`.
pub fn admissible_beta_interval(gamma_exponent: f64, alpha: f64) -> Interval {
    Interval::open(1.0 + alpha / 2.0 - gamma_exponent, 1.0)
}

/// Regularity bookkeeping for one run: drift exponent `β`, solution
/// exponent `θ < β`, and the norm index `γ + θ` of the Kolmogorov solution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegularityBudget {
    pub gamma: f64,
    pub beta_interval: Interval,
    pub beta: f64,
    pub theta: f64,
    pub picard_norm_index: f64,
}

impl RegularityBudget {
    /// Midpoint defaults: `β` at the middle of the admissible interval, `θ`
    /// at the middle of `(max(0, α/2 + 1 - γ), β)` so that `2(γ+θ-1) > α`.
    pub fn midpoint(gamma: f64, alpha: f64) -> Option<Self> {
        let beta_interval = admissible_beta_interval(gamma, alpha);
        if beta_interval.empty {
            return None;
        }
        let beta = beta_interval.midpoint();
        Self::with_beta(gamma, alpha, beta)
    }

    pub fn with_beta(gamma: f64, alpha: f64, beta: f64) -> Option<Self> {
        let beta_interval = admissible_beta_interval(gamma, alpha);
        let floor = (alpha / 2.0 + 1.0 - gamma).max(0.0);
        if !(beta > floor) {
            return None;
        }
        let theta = 0.5 * (floor + beta);
        Some(Self { gamma, beta_interval, beta, theta, picard_norm_index: gamma + theta })
    }

    /// Exponent `γ + θ - β` of `Λ_t` in the contraction integral `C_λ`.
    pub fn contraction_exponent(&self) -> f64 {
        self.gamma + self.theta - self.beta
    }

    /// `2(γ + θ - 1) > α`.
    pub fn supports_uniqueness(&self, alpha: f64) -> bool {
        2.0 * (self.gamma + self.theta - 1.0) > alpha
    }
}

/// Reaction–diffusion family: `γ_n = n^{2p}`, `β_n = γ_n^{-r}`,
/// regularity exponent `α/(αr + 1)`.
pub fn reaction_diffusion_preset(
    p: u32,
    alpha: f64,
    r: f64,
    truncation: usize,
) -> Result<(SpectralModel, RegularityBudget), SpectralError> {
    if p < 1 {
        return Err(SpectralError::Preset(format!("power p = {p} must be at least 1")));
    }
    let pf = p as f64;
    if !(alpha > 1.0 && alpha < 2.0) {
        return Err(SpectralError::AlphaOutOfRange(alpha));
    }
    if !(1.0 / (2.0 * pf) + 1.0 < alpha) {
        return Err(SpectralError::Preset(format!(
            "1/(2p) + 1 < alpha violated: 1/(2*{p}) + 1 = {} >= {alpha}",
            1.0 / (2.0 * pf) + 1.0
        )));
    }
    let (lo, hi) = reaction_diffusion_r_interval(pf, alpha);
    if !(r > lo) {
        return Err(SpectralError::Preset(format!("r > 1/(2p alpha) = {lo} violated by r = {r}")));
    }
    if !(r < hi) {
        return Err(SpectralError::Preset(format!("r < (alpha-1)/alpha = {hi} violated by r = {r}")));
    }
    let q = 2.0 * pf;
    let model = SpectralModel::power_law(alpha, 1.0, q, 1.0, -q * r, truncation)?;
    let gamma = alpha / (alpha * r + 1.0);
    let budget = RegularityBudget::midpoint(gamma, alpha)
        .ok_or_else(|| SpectralError::Preset(format!("empty Hölder interval for gamma = {gamma}")))?;
    Ok((model, budget))
}

/// Admissible `r` range `(1/(2pα), (α-1)/α)` of the reaction–diffusion family.
pub fn reaction_diffusion_r_interval(p: f64, alpha: f64) -> (f64, f64) {
    (1.0 / (2.0 * p * alpha), (alpha - 1.0) / alpha)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute_lambda(model: &SpectralModel, t: f64, n_max: usize) -> f64 {
        (1..=n_max).map(|n| model.lambda_term(n, t)).fold(0.0, f64::max)
    }

    #[test]
    fn truncated_contraction_integral_single_mode() {
        // Λ_t = e^{-γt} γ^{1/α}/β, so the integral is (γ^{1/α}/β)^q / (λ + qγ)
        let m = SpectralModel::explicit(1.5, vec![2.0], vec![0.5]).unwrap();
        let (lambda, q) = (3.0, 1.2);
        let exact = (2f64.powf(1.0 / 1.5) / 0.5).powf(q) / (lambda + q * 2.0);
        assert!((m.c_lambda_truncated(lambda, q).unwrap() - exact).abs() < 1e-10 * exact);
    }

    #[test]
    fn conditions_for_quadratic_eigenvalues() {
        let m = SpectralModel::power_law(1.8, 1.0, 2.0, 1.0, -0.7, 8).unwrap();
        let rep = m.check_conditions();
        // Σ n^{-1.26} and Σ n^{-2}
        let zeta2 = std::f64::consts::PI.powi(2) / 6.0;
        assert!((rep.sum_inv_gamma.estimate().unwrap() - zeta2).abs() < 1e-9);
        let s = rep.sum_beta_alpha;
        assert!(s.is_convergent());
        assert!(s.remainder.0 < s.remainder.1);
        assert!(rep.all_pass());
    }

    #[test]
    fn constant_amplitudes_diverge() {
        let m = SpectralModel::power_law(1.5, 1.0, 2.0, 1.0, 0.0, 4).unwrap();
        assert_eq!(m.check_conditions().sum_beta_alpha.status, SeriesStatus::Divergent);
        assert!(!m.check_conditions().all_pass());
    }

    #[test]
    fn single_mode_lambda() {
        let m = SpectralModel::explicit(1.5, vec![1.0], vec![1.0]).unwrap();
        for t in [0.1, 1.0, 3.0] {
            assert!((m.lambda_t(t).unwrap().value - (-t).exp()).abs() < 1e-15);
        }
        assert!(m.lambda_t(0.0).is_err());
    }

    #[test]
    fn turnover_matches_brute_force() {
        let m = SpectralModel::power_law(1.8, 1.0, 2.0, 1.0, -0.7, 4).unwrap();
        let t = 0.1;
        let brute = brute_lambda(&m, t, 1_000_000);
        assert!((m.lambda_t(t).unwrap().value - brute).abs() <= 1e-12 * brute.max(1.0));
    }

    #[test]
    fn envelope_edge_cases() {
        let flat = lambda_t_envelope(-1.0 / 1.5, 1.5).unwrap();
        assert_eq!(flat(0.3), 1.0);
        assert!(lambda_t_envelope(-0.9, 1.5).is_err());
    }

    #[test]
    fn endpoint_exponent_is_divergent() {
        let (alpha, r) = (1.8, 0.35);
        let m = SpectralModel::power_law(alpha, 1.0, 2.0, 1.0, -2.0 * r, 4).unwrap();
        let g = alpha / (alpha * r + 1.0);
        assert!(matches!(m.c_lambda(1.0, g).unwrap(), CLambda::Divergent { .. }));
        assert!(m.c_lambda(1.0, g - 0.01).unwrap().value().is_some());
    }

    #[test]
    fn c_lambda_decreases_to_zero() {
        let (m, budget) = reaction_diffusion_preset(1, 1.8, 0.35, 4).unwrap();
        let q = budget.contraction_exponent();
        let vals: Vec<f64> = [1.0, 10.0, 100.0, 1000.0]
            .iter()
            .map(|&l| m.c_lambda(l, q).unwrap().value().unwrap())
            .collect();
        assert!(vals.windows(2).all(|w| w[1] < w[0]), "{vals:?}");
        // for large λ the small-time singularity t^{-κ} dominates: C_λ ∝ λ^{κ-1}
        let kappa = q * m.lambda_rate().unwrap();
        let slope = (vals[3] / vals[2]).log10();
        assert!((slope - (kappa - 1.0)).abs() < 0.01, "slope {slope} vs {}", kappa - 1.0);
    }

    #[test]
    fn c_lambda_of_constant_functional() {
        // one mode with γ = β = 1 at q = 0: ∫ e^{-λt} dt = 1/λ
        let m = SpectralModel::explicit(1.5, vec![1.0], vec![1.0]).unwrap();
        let v = m.c_lambda(2.0, 0.0).unwrap().value().unwrap();
        assert!((v - 0.5).abs() < 1e-10, "{v}");
        // q = 1: ∫ e^{-(λ+1)t} dt
        let v = m.c_lambda(2.0, 1.0).unwrap().value().unwrap();
        assert!((v - 1.0 / 3.0).abs() < 1e-10, "{v}");
    }

    #[test]
    fn finite_dimensional_interval() {
        let i = admissible_beta_interval(1.6, 1.6);
        assert!((i.lower - 0.2).abs() < 1e-15 && i.upper == 1.0 && !i.empty);
        assert!(admissible_beta_interval(0.75, 1.5).empty);
    }

    #[test]
    fn reaction_diffusion_arithmetic() {
        let (m, b) = reaction_diffusion_preset(1, 1.8, 0.35, 4).unwrap();
        // hand computation: γ = 1.8/1.63, lower = 1.9 - γ
        let gamma = 1.8 / 1.63;
        assert!((b.gamma - gamma).abs() < 1e-12);
        assert!((b.beta_interval.lower - (1.9 - gamma)).abs() < 1e-12);
        // equivalent form 1 - α(1-αr)/(2(αr+1))
        let alt = 1.0 - 1.8 * (1.0 - 1.8 * 0.35) / (2.0 * (1.8 * 0.35 + 1.0));
        assert!((b.beta_interval.lower - alt).abs() < 1e-12);
        let (lo, hi) = reaction_diffusion_r_interval(1.0, 1.8);
        assert!((lo - 1.0 / 3.6).abs() < 1e-15 && (hi - 0.8 / 1.8).abs() < 1e-15);
        assert!(b.supports_uniqueness(1.8));
        assert!(b.theta < b.beta);
        assert!(m.check_conditions().all_pass());
        assert_eq!(m.gamma(3), 9.0);
        assert!((m.beta(2) - 2f64.powf(-0.7)).abs() < 1e-15);
    }

    #[test]
    fn reaction_diffusion_rejections_name_the_inequality() {
        let e = reaction_diffusion_preset(1, 1.4, 0.3, 4).unwrap_err();
        assert!(e.to_string().contains("1/(2p) + 1 < alpha"), "{e}");
        let e = reaction_diffusion_preset(1, 1.8, 0.2, 4).unwrap_err();
        assert!(e.to_string().contains("r > 1/(2p alpha)"), "{e}");
        let e = reaction_diffusion_preset(1, 1.8, 0.5, 4).unwrap_err();
        assert!(e.to_string().contains("r < (alpha-1)/alpha"), "{e}");
    }

    #[test]
    fn ou_scale_limits() {
        let m = SpectralModel::explicit(1.5, vec![1.0], vec![1.0]).unwrap();
        assert_eq!(m.ou_scale(1, 0.0).unwrap(), 0.0);
        let lim = (1.0f64 / 1.5).powf(1.0 / 1.5);
        assert!((m.ou_scale(1, 60.0).unwrap() - lim).abs() < 1e-12);
        assert!((lim - 0.7631).abs() < 1e-4);
        let t = 1e-6;
        assert!((m.ou_scale(1, t).unwrap() / t.powf(1.0 / 1.5) - 1.0).abs() < 1e-5);
        assert!(m.ou_scale(2, 1.0).is_err());
    }

    #[test]
    fn gronwall_sum_vanishes_at_zero_horizon() {
        let (m, _) = reaction_diffusion_preset(1, 1.8, 0.35, 4).unwrap();
        let big = m.gronwall_sum(1.0).estimate().unwrap();
        let small = m.gronwall_sum(1e-4).estimate().unwrap();
        assert!(small < big && small < 0.05);
    }

    #[test]
    fn explicit_lists_are_uncertified() {
        let m = SpectralModel::explicit(1.5, vec![1.0, 4.0, 9.0], vec![1.0, 0.5, 0.3]).unwrap();
        let rep = m.check_conditions();
        assert_eq!(rep.sum_beta_alpha.status, SeriesStatus::Uncertified);
        assert!(!rep.gamma_certified);
        assert!(!m.lambda_t(0.5).unwrap().certified);
        assert!(!rep.all_pass());
    }

    #[test]
    fn model_validation() {
        assert!(SpectralModel::explicit(1.5, vec![2.0, 1.0], vec![1.0, 1.0]).is_err());
        assert!(SpectralModel::explicit(1.5, vec![1.0], vec![0.0]).is_err());
        assert!(SpectralModel::power_law(2.5, 1.0, 2.0, 1.0, 0.0, 1).is_err());
        assert!(SpectralModel::power_law(1.5, 1.0, 2.0, 1.0, 0.0, 0).is_err());
    }

    proptest! {
        #[test]
        fn envelope_dominates_lambda(
            alpha in 1.05f64..1.95,
            r_frac in 0.0f64..1.0,
            log_t in -6.0f64..2.0,
        ) {
            let r = -1.0 / alpha + r_frac * 1.5;
            let q = 2.0;
            let m = SpectralModel::power_law(alpha, 1.0, q, 1.0, -q * r, 4).unwrap();
            let t = 10f64.powf(log_t);
            let env = lambda_t_envelope(r, alpha).unwrap();
            let lam = m.lambda_t(t).unwrap().value;
            prop_assert!(env(t) >= lam * (1.0 - 1e-12));
        }

        #[test]
        fn envelope_gamma_equals_preset_gamma(alpha in 1.01f64..1.99, r_frac in 0.0f64..1.0) {
            let r = r_frac * (alpha - 1.0) / alpha;
            let from_rate = 1.0 / (r + 1.0 / alpha);
            prop_assert!((from_rate - alpha / (alpha * r + 1.0)).abs() < 1e-12);
        }

        #[test]
        fn ou_scale_increases_in_time(g in 0.1f64..100.0, b in 0.1f64..3.0, t in 0.0f64..5.0, dt in 1e-6f64..1.0) {
            let a = 1.6;
            let (lo, hi) = (ou_scale_raw(a, g, b, t), ou_scale_raw(a, g, b, t + dt));
            // strict until the exponential saturates in double precision
            let ok = if a * g * t < 30.0 { hi > lo } else { hi >= lo };
            prop_assert!(ok);
            prop_assert!(ou_scale_raw(a, g, b, t + dt) <= b * (a * g).powf(-1.0 / a) * (1.0 + 1e-14));
        }

        #[test]
        fn presets_pass_all_conditions(p in 1u32..4, alpha in 1.55f64..1.95, r_frac in 0.05f64..0.95) {
            let (lo, hi) = reaction_diffusion_r_interval(p as f64, alpha);
            let r = lo + r_frac * (hi - lo);
            let (m, b) = reaction_diffusion_preset(p, alpha, r, 3).unwrap();
            prop_assert!(m.check_conditions().all_pass());
            prop_assert!(b.gamma > 1.0 && b.gamma <= alpha);
        }
    }
}
