//! Tabulated standard symmetric stable density and its first two derivatives.
//!
//! Values on the grid come from Fourier inversion of `exp(-|u|^α)`:
//! `p(z) = (1/π) ∫₀^∞ cos(uz) e^{-u^α} du`, with the derivatives taken under
//! the integral. Beyond `tail_cut` the convergent-in-practice asymptotic
//! series `p(z) ≈ Σ_k a_k |z|^{-αk-1}` takes over.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma, ln_gamma};

use super::{check_alpha, check_positive, StableError};
use crate::quadrature::{graded_breaks, uniform_breaks, GaussLegendre};
use crate::rng::map_ordered;

/// Largest disagreement tolerated between the production inversion rule and
/// a refined rule at the probe abscissae.
const INVERSION_TOLERANCE: f64 = 1e-11;
/// Largest relative gap tolerated between the tail series and the table at `tail_cut`.
const TAIL_TOLERANCE: f64 = 1e-6;
const TAIL_TERMS: usize = 14;

/// Symmetric abscissa grid `[-half_width, half_width]` with an odd number of
/// uniformly spaced points, so that `z = 0` is a node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub half_width: f64,
    pub points: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { half_width: 40.0, points: 8193 }
    }
}

impl GridSpec {
    pub fn new(half_width: f64, points: usize) -> Result<Self, StableError> {
        check_positive("half_width", half_width)?;
        if points < 1024 || points.is_multiple_of(2) {
            return Err(StableError::Resolution(points));
        }
        Ok(Self { half_width, points })
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / (self.points - 1) as f64
    }

    /// Same range with twice the resolution.
    pub fn doubled(&self) -> Self {
        Self { half_width: self.half_width, points: 2 * self.points - 1 }
    }
}

/// Asymptotic expansion of the standard density for large `|z|`:
/// `p(z) = Σ_k a_k |z|^{-αk-1}` with
/// `a_k = (-1)^{k+1} Γ(αk+1) sin(kπα/2) / (π k!)`.
/// At α = 1 this is the exact Cauchy expansion.
#[derive(Debug, Clone, PartialEq)]
pub struct TailSeries {
    alpha: f64,
    coeffs: Vec<f64>,
}

impl TailSeries {
    pub fn new(alpha: f64) -> Self {
        let coeffs = (1..=TAIL_TERMS)
            .map(|k| {
                let kf = k as f64;
                let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
                let mag = (ln_gamma(alpha * kf + 1.0) - ln_gamma(kf + 1.0)).exp();
                let sine = (kf * PI * alpha / 2.0).sin();
                // exact zeros (integer kα/2) must not stop the summation
                let sine = if sine.abs() < 1e-12 { 0.0 } else { sine };
                sign * mag * sine / PI
            })
            .collect();
        Self { alpha, coeffs }
    }

    /// Leading coefficient, equal to the Lévy intensity `c_α`.
    pub fn leading(&self) -> f64 {
        self.coeffs[0]
    }

    /// Normalized sums `(S0, S1, S2)` at `y = |z|` such that
    /// `p = y^{-α-1} S0`, `|p'| = y^{-α-2} S1`, `p'' = y^{-α-3} S2`.
    /// Summation stops at the smallest term of the asymptotic series.
    fn sums(&self, y: f64) -> (f64, f64, f64) {
        let a = self.alpha;
        let decay = y.powf(-a);
        let (mut s0, mut s1, mut s2) = (0.0, 0.0, 0.0);
        let mut factor = 1.0;
        let mut last = f64::INFINITY;
        for (i, &c) in self.coeffs.iter().enumerate() {
            let k = (i + 1) as f64;
            let term = c * factor;
            if term != 0.0 {
                if term.abs() > last {
                    break;
                }
                last = term.abs();
            }
            s0 += term;
            s1 += term * (a * k + 1.0);
            s2 += term * (a * k + 1.0) * (a * k + 2.0);
            factor *= decay;
        }
        (s0, s1, s2)
    }

    pub fn density(&self, z: f64) -> f64 {
        let y = z.abs();
        self.sums(y).0 * y.powf(-self.alpha - 1.0)
    }

    pub fn derivative(&self, z: f64) -> f64 {
        let y = z.abs();
        -z.signum() * self.sums(y).1 * y.powf(-self.alpha - 2.0)
    }

    pub fn second_derivative(&self, z: f64) -> f64 {
        let y = z.abs();
        self.sums(y).2 * y.powf(-self.alpha - 3.0)
    }

    /// `p'/p` evaluated without forming the underflowing powers.
    pub fn score(&self, z: f64) -> f64 {
        let y = z.abs();
        let (s0, s1, _) = self.sums(y);
        -z.signum() * s1 / (s0 * y)
    }

    /// `p''/p` evaluated without forming the underflowing powers.
    pub fn curvature(&self, z: f64) -> f64 {
        let y = z.abs();
        let (s0, _, s2) = self.sums(y);
        s2 / (s0 * y * y)
    }

    /// `∫_y^∞ p(z) dz` for `y > 0` by term-wise integration.
    pub fn tail_mass(&self, y: f64) -> f64 {
        let a = self.alpha;
        let decay = y.powf(-a);
        let mut factor = decay;
        let mut total = 0.0;
        let mut last = f64::INFINITY;
        for (i, &c) in self.coeffs.iter().enumerate() {
            let k = (i + 1) as f64;
            let term = c * factor / (a * k);
            if term != 0.0 {
                if term.abs() > last {
                    break;
                }
                last = term.abs();
            }
            total += term;
            factor *= decay;
        }
        total
    }
}

/// Quadrature rule for the three inversion integrals with the weights
/// `e^{-u^α}/π`, `u e^{-u^α}/π`, `u² e^{-u^α}/π` folded in.
struct InversionRule {
    u: Vec<f64>,
    w0: Vec<f64>,
    w1: Vec<f64>,
    w2: Vec<f64>,
}

impl InversionRule {
    fn new(alpha: f64, z_max: f64, refined: bool) -> Self {
        // panels short enough that cos(uz) turns at most 4 radians per panel
        let mut width = (4.0 / z_max.max(1.0)).min(0.5);
        let mut order = 16;
        if refined {
            width *= 0.5;
            order = 24;
        }
        let u_max = 45f64.powf(1.0 / alpha);
        let gl = GaussLegendre::new(order);
        let mut breaks = graded_breaks(0.0, width, 40);
        breaks.extend(uniform_breaks(width, u_max, width).into_iter().skip(1));
        let (mut u, mut w) = (Vec::new(), Vec::new());
        for pair in breaks.windows(2) {
            gl.push_panel(pair[0], pair[1], &mut u, &mut w);
        }
        let mut w0 = Vec::with_capacity(u.len());
        let mut w1 = Vec::with_capacity(u.len());
        let mut w2 = Vec::with_capacity(u.len());
        for (&x, &wt) in u.iter().zip(&w) {
            let base = wt * (-x.powf(alpha)).exp() / PI;
            w0.push(base);
            w1.push(base * x);
            w2.push(base * x * x);
        }
        Self { u, w0, w1, w2 }
    }

    /// `(p, p', p'')` at `z`.
    fn eval(&self, z: f64) -> (f64, f64, f64) {
        let (mut p, mut dp, mut ddp) = (0.0, 0.0, 0.0);
        for i in 0..self.u.len() {
            let (s, c) = (self.u[i] * z).sin_cos();
            p += self.w0[i] * c;
            dp -= self.w1[i] * s;
            ddp -= self.w2[i] * c;
        }
        (p, dp, ddp)
    }
}

/// Tabulated `p`, `p'`, `p''` of the standard symmetric stable law.
#[derive(Debug, Clone)]
pub struct DensityTable {
    alpha: f64,
    spec: GridSpec,
    grid: Vec<f64>,
    p: Vec<f64>,
    dp: Vec<f64>,
    ddp: Vec<f64>,
    tail_cut: f64,
    tail: TailSeries,
    cumulative: Vec<f64>,
}

impl DensityTable {
    /// Build the table for `alpha ∈ (1, 2)`.
    pub fn build(alpha: f64, spec: GridSpec) -> Result<Self, StableError> {
        check_alpha(alpha)?;
        Self::build_unchecked(alpha, spec)
    }

    /// Cauchy table (α = 1). Exists only to cross-check the machinery
    /// against closed forms.
    pub fn cauchy_validation(spec: GridSpec) -> Result<Self, StableError> {
        Self::build_unchecked(1.0, spec)
    }

    fn build_unchecked(alpha: f64, spec: GridSpec) -> Result<Self, StableError> {
        let spec = GridSpec::new(spec.half_width, spec.points)?;
        let l = spec.half_width;
        let rule = InversionRule::new(alpha, l, false);
        let refined = InversionRule::new(alpha, l, true);
        for z in [0.0, 0.5 * l, l] {
            let a = rule.eval(z);
            let b = refined.eval(z);
            let gap = (a.0 - b.0).abs().max((a.1 - b.1).abs()).max((a.2 - b.2).abs());
            if !(gap <= INVERSION_TOLERANCE) {
                return Err(StableError::QuadratureNonConvergence { z, discrepancy: gap });
            }
        }

        let n = spec.points;
        let mid = n / 2;
        let h = spec.spacing();
        let half: Vec<f64> = (0..=mid).map(|j| if j == mid { l } else { j as f64 * h }).collect();
        let values = map_ordered(&half, |&z| rule.eval(z));

        let mut grid = vec![0.0; n];
        let mut p = vec![0.0; n];
        let mut dp = vec![0.0; n];
        let mut ddp = vec![0.0; n];
        for (j, (&z, &(v0, v1, v2))) in half.iter().zip(&values).enumerate() {
            if !(v0 > 0.0) {
                return Err(StableError::QuadratureNonConvergence { z, discrepancy: v0 });
            }
            let (hi, lo) = (mid + j, mid - j);
            grid[hi] = z;
            grid[lo] = -z;
            p[hi] = v0;
            p[lo] = v0;
            dp[hi] = v1;
            dp[lo] = -v1;
            ddp[hi] = v2;
            ddp[lo] = v2;
        }
        dp[mid] = 0.0;

        let tail = TailSeries::new(alpha);
        let gap = (tail.density(l) - p[n - 1]).abs() / p[n - 1];
        if !(gap <= TAIL_TOLERANCE) {
            return Err(StableError::TailMismatch { z: l, gap });
        }
        Ok(Self::assemble(alpha, spec, grid, p, dp, ddp, tail))
    }

    fn assemble(
        alpha: f64,
        spec: GridSpec,
        grid: Vec<f64>,
        p: Vec<f64>,
        dp: Vec<f64>,
        ddp: Vec<f64>,
        tail: TailSeries,
    ) -> Self {
        let h = spec.spacing();
        let n = grid.len();
        let mid = n / 2;
        // trapezoid with the Hermite endpoint correction (exact for cubics),
        // accumulated outward from the median so the CDF is exactly 1/2 at 0
        let cell = |i: usize| 0.5 * h * (p[i] + p[i + 1]) + h * h * (dp[i] - dp[i + 1]) / 12.0;
        let mut cumulative = vec![0.0; n];
        cumulative[mid] = 0.5;
        for i in mid + 1..n {
            cumulative[i] = cumulative[i - 1] + cell(i - 1);
        }
        for i in (0..mid).rev() {
            cumulative[i] = cumulative[i + 1] - cell(i);
        }
        Self { alpha, spec, grid, p, dp, ddp, tail_cut: spec.half_width, tail, cumulative }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn spec(&self) -> GridSpec {
        self.spec
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn p_values(&self) -> &[f64] {
        &self.p
    }

    pub fn dp_values(&self) -> &[f64] {
        &self.dp
    }

    pub fn ddp_values(&self) -> &[f64] {
        &self.ddp
    }

    pub fn tail_cut(&self) -> f64 {
        self.tail_cut
    }

    pub fn tail(&self) -> &TailSeries {
        &self.tail
    }

    /// Cubic Lagrange interpolation of tabulated `values` at `z` (|z| ≤ tail_cut).
    fn interpolate(&self, values: &[f64], z: f64) -> f64 {
        let n = values.len();
        let h = self.spec.spacing();
        let x = (z + self.spec.half_width) / h;
        let i = (x.floor() as isize).clamp(1, n as isize - 3) as usize;
        let s = x - i as f64;
        let lm = -s * (s - 1.0) * (s - 2.0) / 6.0;
        let l0 = (s + 1.0) * (s - 1.0) * (s - 2.0) / 2.0;
        let l1 = -(s + 1.0) * s * (s - 2.0) / 2.0;
        let l2 = (s + 1.0) * s * (s - 1.0) / 6.0;
        lm * values[i - 1] + l0 * values[i] + l1 * values[i + 1] + l2 * values[i + 2]
    }

    pub fn density(&self, z: f64) -> f64 {
        if z.abs() <= self.tail_cut {
            self.interpolate(&self.p, z)
        } else {
            self.tail.density(z)
        }
    }

    pub fn derivative(&self, z: f64) -> f64 {
        if z.abs() <= self.tail_cut {
            self.interpolate(&self.dp, z)
        } else {
            self.tail.derivative(z)
        }
    }

    pub fn second_derivative(&self, z: f64) -> f64 {
        if z.abs() <= self.tail_cut {
            self.interpolate(&self.ddp, z)
        } else {
            self.tail.second_derivative(z)
        }
    }

    /// Score ratio `p'(z)/p(z)`.
    #[inline]
    pub fn score(&self, z: f64) -> f64 {
        if z.abs() <= self.tail_cut {
            self.interpolate(&self.dp, z) / self.interpolate(&self.p, z)
        } else {
            self.tail.score(z)
        }
    }

    /// Curvature ratio `p''(z)/p(z)`.
    #[inline]
    pub fn curvature(&self, z: f64) -> f64 {
        if z.abs() <= self.tail_cut {
            self.interpolate(&self.ddp, z) / self.interpolate(&self.p, z)
        } else {
            self.tail.curvature(z)
        }
    }

    /// Trapezoid integral of the tabulated density plus both analytic tails.
    pub fn mass(&self) -> f64 {
        let h = self.spec.spacing();
        let n = self.p.len();
        let inner: f64 = self.p.iter().sum::<f64>() - 0.5 * (self.p[0] + self.p[n - 1]);
        inner * h + 2.0 * self.tail.tail_mass(self.tail_cut)
    }

    /// Distribution function from piecewise cubic Hermite integration of the table.
    pub fn cdf(&self, z: f64) -> f64 {
        let l = self.tail_cut;
        if z < -l {
            return self.tail.tail_mass(-z);
        }
        if z > l {
            return 1.0 - self.tail.tail_mass(z);
        }
        let h = self.spec.spacing();
        let n = self.grid.len();
        let i = (((z + l) / h).floor() as usize).min(n - 2);
        let s = (z - self.grid[i]) / h;
        self.cumulative[i] + h * self.cell_integral(i, s)
    }

    /// `∫_0^s` of the cubic Hermite interpolant on cell `i`, in cell units.
    fn cell_integral(&self, i: usize, s: f64) -> f64 {
        let h = self.spec.spacing();
        let (s2, s3, s4) = (s * s, s * s * s, s * s * s * s);
        let h00 = s - s3 + 0.5 * s4;
        let h10 = 0.5 * s2 - 2.0 * s3 / 3.0 + 0.25 * s4;
        let h01 = s3 - 0.5 * s4;
        let h11 = -s3 / 3.0 + 0.25 * s4;
        self.p[i] * h00 + h * self.dp[i] * h10 + self.p[i + 1] * h01 + h * self.dp[i + 1] * h11
    }

    fn cell_density(&self, i: usize, s: f64) -> f64 {
        let h = self.spec.spacing();
        let (s2, s3) = (s * s, s * s * s);
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        self.p[i] * h00 + h * self.dp[i] * h10 + self.p[i + 1] * h01 + h * self.dp[i + 1] * h11
    }

    /// Inverse of [`cdf`](Self::cdf) for `u ∈ (0, 1)`; odd about `u = 1/2`.
    pub fn quantile(&self, u: f64) -> f64 {
        if u > 0.5 {
            return -self.quantile(1.0 - u);
        }
        if u == 0.5 {
            return 0.0;
        }
        if !(u > 0.0) {
            return f64::NEG_INFINITY;
        }
        if u < self.cumulative[0] {
            // left tail: solve tail_mass(y) = u by Newton from the leading term
            let a = self.alpha;
            let mut y = (self.tail.leading() / (a * u)).powf(1.0 / a).max(self.tail_cut);
            for _ in 0..50 {
                let step = (self.tail.tail_mass(y) - u) / self.tail.density(y);
                let next = (y + step).max(0.5 * (y + self.tail_cut));
                if (next - y).abs() <= 1e-15 * y {
                    y = next;
                    break;
                }
                y = next;
            }
            return -y;
        }
        let i = match self.cumulative.binary_search_by(|c| c.partial_cmp(&u).unwrap()) {
            Ok(i) => return self.grid[i],
            Err(i) => (i - 1).min(self.grid.len() - 2),
        };
        let h = self.spec.spacing();
        let target = (u - self.cumulative[i]) / h;
        let (mut lo, mut hi) = (0.0, 1.0);
        let mut s = 0.5;
        for _ in 0..60 {
            let f = self.cell_integral(i, s) - target;
            if f > 0.0 {
                hi = s;
            } else {
                lo = s;
            }
            let d = self.cell_density(i, s);
            let mut next = s - f / d;
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            if (next - s).abs() < 1e-15 {
                s = next;
                break;
            }
            s = next;
        }
        self.grid[i] + s * h
    }

    /// Composite Simpson over the grid plus both tails of `g(p, p', p'')`.
    fn weighted_integral<G: Fn(f64, f64, f64) -> f64>(&self, g: G) -> f64 {
        let h = self.spec.spacing();
        let n = self.p.len();
        let mut inner = 0.0;
        for i in 0..n {
            let w = if i == 0 || i == n - 1 {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            inner += w * g(self.p[i], self.dp[i], self.ddp[i]);
        }
        inner *= h / 3.0;
        // tail on [L, ∞) through z = L/s, both sides by symmetry
        let l = self.tail_cut;
        let gl = GaussLegendre::new(20);
        let tail = gl.composite(&graded_breaks(0.0, 1.0, 30), |s| {
            if s == 0.0 {
                return 0.0;
            }
            let z = l / s;
            let t = &self.tail;
            g(t.density(z), t.derivative(z), t.second_derivative(z)) * l / (s * s)
        });
        inner + 2.0 * tail
    }

    /// `∫ p'(z)² / p(z) dz` (Fisher information of the location family).
    pub fn c_alpha(&self) -> Result<f64, StableError> {
        let v = self.weighted_integral(|p, dp, _| dp * dp / p);
        if v.is_finite() && v > 0.0 {
            Ok(v)
        } else {
            Err(StableError::Divergent { what: "p'^2/p" })
        }
    }

    /// `∫ p''(z)² / p(z) dz`.
    pub fn curvature_information(&self) -> Result<f64, StableError> {
        let v = self.weighted_integral(|p, _, ddp| ddp * ddp / p);
        if v.is_finite() && v > 0.0 {
            Ok(v)
        } else {
            Err(StableError::Divergent { what: "p''^2/p" })
        }
    }

    /// `√2 · max(c_α, (∫ p''²/p)^{1/2})`, the second-derivative constant.
    pub fn c_tilde_alpha(&self) -> Result<f64, StableError> {
        let first = self.c_alpha()?;
        let second = self.curvature_information()?.sqrt();
        Ok(std::f64::consts::SQRT_2 * first.max(second))
    }

    /// Value of the density at zero in closed form, `Γ(1 + 1/α) / π`.
    pub fn closed_form_peak(alpha: f64) -> f64 {
        gamma(1.0 + 1.0 / alpha) / PI
    }

    /// Serialize as a flat columnar text file. Floats use the shortest
    /// round-trip representation, so equal tables give equal bytes.
    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity(self.grid.len() * 96);
        out.push_str("# levy-spde density table\n");
        let _ = writeln!(out, "# alpha={:e}", self.alpha);
        let _ = writeln!(out, "# grid={:e} {:e} {}", -self.spec.half_width, self.spec.half_width, self.spec.points);
        let _ = writeln!(out, "# tail_cut={:e}", self.tail_cut);
        out.push_str("# columns=z p dp ddp\n");
        for i in 0..self.grid.len() {
            let _ = writeln!(out, "{:e} {:e} {:e} {:e}", self.grid[i], self.p[i], self.dp[i], self.ddp[i]);
        }
        out
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<(), StableError> {
        w.write_all(self.to_text().as_bytes())?;
        Ok(())
    }

    pub fn read_from<R: BufRead>(r: R) -> Result<Self, StableError> {
        let bad = |m: &str| StableError::Format(m.to_string());
        let mut alpha = None;
        let mut grid_hdr = None;
        let mut tail_cut = None;
        let (mut grid, mut p, mut dp, mut ddp) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        for line in r.lines() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(h) = line.strip_prefix('#') {
                let h = h.trim();
                if let Some(v) = h.strip_prefix("alpha=") {
                    alpha = Some(v.parse::<f64>().map_err(|_| bad("alpha"))?);
                } else if let Some(v) = h.strip_prefix("grid=") {
                    let parts: Vec<&str> = v.split_whitespace().collect();
                    if parts.len() != 3 {
                        return Err(bad("grid header"));
                    }
                    let hi: f64 = parts[1].parse().map_err(|_| bad("grid upper bound"))?;
                    let n: usize = parts[2].parse().map_err(|_| bad("grid points"))?;
                    grid_hdr = Some(GridSpec::new(hi, n)?);
                } else if let Some(v) = h.strip_prefix("tail_cut=") {
                    tail_cut = Some(v.parse::<f64>().map_err(|_| bad("tail_cut"))?);
                }
                continue;
            }
            let cols: Result<Vec<f64>, _> = line.split_whitespace().map(str::parse::<f64>).collect();
            let cols = cols.map_err(|_| bad("row"))?;
            if cols.len() != 4 {
                return Err(bad("row width"));
            }
            grid.push(cols[0]);
            p.push(cols[1]);
            dp.push(cols[2]);
            ddp.push(cols[3]);
        }
        let alpha = alpha.ok_or_else(|| bad("missing alpha"))?;
        let spec = grid_hdr.ok_or_else(|| bad("missing grid"))?;
        let tail_cut = tail_cut.ok_or_else(|| bad("missing tail_cut"))?;
        if grid.len() != spec.points || tail_cut != spec.half_width {
            return Err(bad("row count or tail_cut disagrees with grid header"));
        }
        if !(1.0..2.0).contains(&alpha) {
            return Err(StableError::AlphaOutOfRange(alpha));
        }
        Ok(Self::assemble(alpha, spec, grid, p, dp, ddp, TailSeries::new(alpha)))
    }

    /// File name under which a table for `(alpha, spec)` is cached.
    pub fn cache_key(alpha: f64, spec: GridSpec) -> String {
        format!("density-{:016x}-{:016x}-{}.txt", alpha.to_bits(), spec.half_width.to_bits(), spec.points)
    }

    /// Load the cached table from `dir`, or build and store it.
    pub fn load_or_build(alpha: f64, spec: GridSpec, dir: &Path) -> Result<Self, StableError> {
        let path = dir.join(Self::cache_key(alpha, spec));
        if let Ok(file) = std::fs::File::open(&path) {
            if let Ok(t) = Self::read_from(std::io::BufReader::new(file)) {
                if t.alpha == alpha && t.spec == spec {
                    return Ok(t);
                }
            }
        }
        let table = Self::build(alpha, spec)?;
        std::fs::create_dir_all(dir)?;
        let tmp = path.with_extension("tmp");
        std::fs::write(&tmp, table.to_text())?;
        std::fs::rename(&tmp, &path)?;
        Ok(table)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::OnceLock;

    fn table15() -> &'static DensityTable {
        static T: OnceLock<DensityTable> = OnceLock::new();
        T.get_or_init(|| DensityTable::build(1.5, GridSpec::default()).unwrap())
    }

    fn cauchy() -> &'static DensityTable {
        static T: OnceLock<DensityTable> = OnceLock::new();
        T.get_or_init(|| DensityTable::cauchy_validation(GridSpec::default()).unwrap())
    }

    #[test]
    fn peak_matches_closed_form() {
        let t = table15();
        assert!((t.density(0.0) - DensityTable::closed_form_peak(1.5)).abs() < 1e-13);
    }

    #[test]
    fn cauchy_mode_matches_closed_form_pointwise() {
        let t = cauchy();
        for &z in &[0.0, 0.37, 1.0, 2.5, 7.3, 19.9, 39.0, 55.0, 300.0] {
            let exact = 1.0 / (PI * (1.0 + z * z));
            let d1 = -2.0 * z / (PI * (1.0 + z * z).powi(2));
            let d2 = (6.0 * z * z - 2.0) / (PI * (1.0 + z * z).powi(3));
            assert!((t.density(z) - exact).abs() < 1e-8, "p at {z}");
            assert!((t.derivative(z) - d1).abs() < 1e-8, "p' at {z}");
            assert!((t.second_derivative(z) - d2).abs() < 1e-8, "p'' at {z}");
            assert!((t.cdf(z) - (0.5 + z.atan() / PI)).abs() < 1e-9, "cdf at {z}");
        }
    }

    #[test]
    fn cauchy_constants() {
        let t = cauchy();
        assert!((t.c_alpha().unwrap() - 0.5).abs() < 1e-8);
        // closed form: (1/π) ∫ (6z²-2)² / (1+z²)^5 dz = 1
        let curv = t.curvature_information().unwrap();
        assert!((curv - 1.0).abs() < 1e-7, "{curv}");
        assert!((t.c_tilde_alpha().unwrap() - std::f64::consts::SQRT_2).abs() < 1e-7);
    }

    #[test]
    fn symmetry_and_normalization() {
        let t = table15();
        let n = t.grid().len();
        for i in 0..n {
            assert_eq!(t.grid()[i], -t.grid()[n - 1 - i]);
            assert_eq!(t.p_values()[i], t.p_values()[n - 1 - i]);
            assert_eq!(t.dp_values()[i], -t.dp_values()[n - 1 - i]);
            assert!(t.p_values()[i] > 0.0);
        }
        assert!((t.mass() - 1.0).abs() < 1e-6);
        assert!((t.cdf(t.tail_cut() + 1e-9) - t.cdf(t.tail_cut() - 1e-9)).abs() < 1e-10);
        assert_eq!(t.cdf(0.0), 0.5);
    }

    #[test]
    fn derivatives_agree_with_finite_differences() {
        let rule = InversionRule::new(1.5, 40.0, false);
        let d = 1e-4;
        for &z in &[0.3, 1.1, 4.0, 12.5, 33.0] {
            let (lo, mid, hi) = (rule.eval(z - d), rule.eval(z), rule.eval(z + d));
            assert!(((hi.0 - lo.0) / (2.0 * d) - mid.1).abs() < 1e-9, "p' at {z}");
            assert!(((hi.1 - lo.1) / (2.0 * d) - mid.2).abs() < 1e-9, "p'' at {z}");
        }
        let t = table15();
        for &z in &[0.3, 1.1, 4.0, 12.5] {
            let (a, b, c) = rule.eval(z);
            assert!((t.density(z) - a).abs() < 1e-9);
            assert!((t.derivative(z) - b).abs() < 1e-9);
            assert!((t.second_derivative(z) - c).abs() < 1e-8);
        }
    }

    #[test]
    fn quantile_inverts_cdf() {
        let t = table15();
        for &u in &[1e-6, 1e-3, 0.01, 0.2, 0.5, 0.7, 0.999, 1.0 - 1e-7] {
            let z = t.quantile(u);
            assert!((t.cdf(z) - u).abs() < 1e-12, "u {u} z {z}");
        }
    }

    #[test]
    fn constants_match_reference_quadrature() {
        // reference values from an independent adaptive quadrature
        let t = table15();
        assert!((t.c_alpha().unwrap() - 0.4281).abs() < 1e-4);
        assert!((t.c_tilde_alpha().unwrap() - 0.8740).abs() < 1e-4);
    }

    #[test]
    fn text_round_trip_is_exact() {
        let t = DensityTable::build(1.7, GridSpec::new(30.0, 2049).unwrap()).unwrap();
        let text = t.to_text();
        let back = DensityTable::read_from(text.as_bytes()).unwrap();
        assert_eq!(back.to_text(), text);
        assert_eq!(back.cdf(0.83), t.cdf(0.83));
    }

    #[test]
    fn rejects_coarse_or_even_grids() {
        assert!(GridSpec::new(40.0, 1001).is_err());
        assert!(GridSpec::new(40.0, 4096).is_err());
        assert!(DensityTable::build(2.0, GridSpec::default()).is_err());
    }

    #[test]
    fn short_range_is_reported_as_tail_mismatch() {
        let err = DensityTable::build(1.9, GridSpec::new(1.0, 1025).unwrap()).unwrap_err();
        assert!(matches!(err, StableError::TailMismatch { .. }), "{err}");
    }
}
