//! Nonlocal Kolmogorov equation `λU - ⟨B, DU⟩ - 𝓛U = F` on at most three
//! truncated coordinates, solved as the fixed point
//! `U = ∫_0^∞ e^{-λt} R_t(⟨B, DU⟩ + F) dt`.
//!
//! The resolvent uses one set of Latin-hypercube stable draws for every grid
//! node, time node and Picard iteration, so the discrete Picard map is a
//! fixed affine map and its iterates are smooth in `x`.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::functions::Field;
use crate::grid::{empirical_norm, Axis, EmpiricalNorm, GridError, GridFunction};
use crate::mehler::OuCoefficients;
use crate::quadrature::GaussLegendre;
use crate::rng::{map_ordered, StreamKey};
use crate::spectral::{CLambda, SpectralError, SpectralModel};
use crate::stable::{levy_intensity, DensityTable, StableError};

#[derive(Debug, Error)]
pub enum KolmogorovError {
    #[error("lambda must be positive, got {0}")]
    NonPositiveLambda(f64),
    #[error("time quadrature invalid: {0}")]
    Quadrature(String),
    #[error("at least 16 stratified samples required, got {0}")]
    TooFewSamples(usize),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("contraction factor 2 c_α C_λ ‖B‖_β = {bound} is not below 1; increase lambda")]
    NotContractive { bound: f64 },
    #[error("Picard iteration is not contracting: ratio {ratio} at iteration {iteration}")]
    NonContraction { ratio: f64, iteration: usize },
    #[error("point {x:?} lies outside the grid extent")]
    Outside { x: Vec<f64> },
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Stable(#[from] StableError),
}

/// Log-spaced trapezoid rule in `ln t` on `[t_min, horizon/λ]`, with the
/// segments `[0, t_min]` and `[t_max, ∞)` folded into the end nodes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeQuadrature {
    pub nodes: usize,
    pub t_min: f64,
    pub horizon: f64,
}

impl Default for TimeQuadrature {
    fn default() -> Self {
        Self { nodes: 200, t_min: 1e-4, horizon: 40.0 }
    }
}

impl TimeQuadrature {
    pub fn t_max(&self, lambda: f64) -> f64 {
        self.horizon / lambda
    }

    /// Nodes `t_i` and weights including the factor `e^{-λ t_i}`.
    pub fn rule(&self, lambda: f64) -> Result<Vec<(f64, f64)>, KolmogorovError> {
        if !(lambda > 0.0) {
            return Err(KolmogorovError::NonPositiveLambda(lambda));
        }
        let t_max = self.t_max(lambda);
        if self.nodes < 2 || !(self.t_min > 0.0) || !(t_max > self.t_min) {
            return Err(KolmogorovError::Quadrature(format!(
                "{} nodes on [{}, {}]",
                self.nodes, self.t_min, t_max
            )));
        }
        let (a, b) = (self.t_min.ln(), t_max.ln());
        let ds = (b - a) / (self.nodes - 1) as f64;
        let mut out: Vec<(f64, f64)> = (0..self.nodes)
            .map(|i| {
                let t = (a + i as f64 * ds).exp();
                let end = i == 0 || i + 1 == self.nodes;
                (t, if end { 0.5 } else { 1.0 } * ds * t * (-lambda * t).exp())
            })
            .collect();
        out[0].1 += -(-lambda * self.t_min).exp_m1() / lambda;
        out[self.nodes - 1].1 += (-lambda * t_max).exp() / lambda;
        Ok(out)
    }

    /// `‖g‖₀ (t_min + e^{-λ t_max}/λ)`: mass of the time integral outside
    /// the quadrature interval.
    pub fn truncation_bound(&self, lambda: f64, sup_g: f64) -> f64 {
        sup_g * (self.t_min + (-lambda * self.t_max(lambda)).exp() / lambda)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResolventConfig {
    pub lambda: f64,
    pub quadrature: TimeQuadrature,
    /// Stratified draws of the stable vector per time node.
    pub samples: usize,
    /// Tolerance for the reported truncation bound.
    pub tolerance: f64,
}

impl ResolventConfig {
    pub fn new(lambda: f64) -> Self {
        Self { lambda, quadrature: TimeQuadrature::default(), samples: 2048, tolerance: 1e-3 }
    }
}

struct TimeNode {
    weight: f64,
    coef: OuCoefficients,
}

/// Discretized `g ↦ ∫ e^{-λt} R_t g dt` with frozen draws.
pub struct ResolventOperator {
    config: ResolventConfig,
    dim: usize,
    nodes: Vec<TimeNode>,
    /// `samples × dim`, row-major.
    draws: Vec<f64>,
}

impl ResolventOperator {
    pub fn new(model: &SpectralModel, table: &DensityTable, config: ResolventConfig, key: StreamKey) -> Result<Self, KolmogorovError> {
        if table.alpha() != model.alpha() {
            return Err(KolmogorovError::Dimension(format!(
                "density table alpha {} vs model alpha {}",
                table.alpha(),
                model.alpha()
            )));
        }
        if config.samples < 16 {
            return Err(KolmogorovError::TooFewSamples(config.samples));
        }
        let rule = config.quadrature.rule(config.lambda)?;
        let nodes = rule
            .into_iter()
            .map(|(t, weight)| {
                OuCoefficients::new(model, t).map(|coef| TimeNode { weight, coef }).map_err(|e| {
                    KolmogorovError::Quadrature(e.to_string())
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        let dim = model.truncation();
        let m = config.samples;
        let mut draws = vec![0.0; m * dim];
        let mut rng = key.named("resolvent-lhs").rng();
        for k in 0..dim {
            let mut perm: Vec<usize> = (0..m).collect();
            perm.shuffle(&mut rng);
            for (j, p) in perm.into_iter().enumerate() {
                let v: f64 = rng.random::<f64>().max(1e-12);
                draws[j * dim + k] = table.quantile((p as f64 + v) / m as f64);
            }
        }
        Ok(Self { config, dim, nodes, draws })
    }

    pub fn config(&self) -> &ResolventConfig {
        &self.config
    }

    /// Sum of the time weights; equals `1/λ` up to quadrature error.
    pub fn total_weight(&self) -> f64 {
        self.nodes.iter().map(|n| n.weight).sum()
    }

    /// Resolvent of `g` at one point.
    pub fn apply_at<F: Field + ?Sized>(&self, g: &F, x: &[f64], out: &mut [f64]) {
        let m = self.config.samples;
        let inv_m = 1.0 / m as f64;
        out.iter_mut().for_each(|o| *o = 0.0);
        let mut y = vec![0.0; self.dim];
        if g.codim() == 1 {
            for node in &self.nodes {
                let mut acc = 0.0;
                for j in 0..m {
                    node.coef.state(x, &self.draws[j * self.dim..(j + 1) * self.dim], &mut y);
                    acc += g.eval_scalar(&y);
                }
                out[0] += node.weight * acc * inv_m;
            }
            return;
        }
        let mut val = vec![0.0; g.codim()];
        let mut acc = vec![0.0; g.codim()];
        for node in &self.nodes {
            acc.iter_mut().for_each(|a| *a = 0.0);
            for j in 0..m {
                node.coef.state(x, &self.draws[j * self.dim..(j + 1) * self.dim], &mut y);
                g.eval_into(&y, &mut val);
                for (a, v) in acc.iter_mut().zip(&val) {
                    *a += v;
                }
            }
            for (o, a) in out.iter_mut().zip(&acc) {
                *o += node.weight * a * inv_m;
            }
        }
    }

    /// Resolvent of `g` at every node of `axes`.
    pub fn apply<F: Field + ?Sized>(&self, g: &F, axes: &[Axis]) -> Result<GridFunction, KolmogorovError> {
        if g.dim() != self.dim || axes.len() != self.dim {
            return Err(KolmogorovError::Dimension(format!(
                "model has {} modes, source has {}, grid has {}",
                self.dim,
                g.dim(),
                axes.len()
            )));
        }
        let codim = g.codim();
        let mut out = GridFunction::zeros(axes.to_vec(), codim)?;
        let idx: Vec<usize> = (0..out.len()).collect();
        let rows = map_ordered(&idx, |&i| {
            let x = out.node_coords(i);
            let mut v = vec![0.0; codim];
            self.apply_at(g, &x, &mut v);
            v
        });
        out.values_mut().copy_from_slice(&rows.concat());
        Ok(out)
    }
}

/// Resolvent output with its time-truncation report.
#[derive(Debug, Clone, PartialEq)]
pub struct Resolvent {
    pub u: GridFunction,
    pub truncation_bound: f64,
    pub within_tolerance: bool,
}

/// `U(x) = ∫_0^∞ e^{-λt} R_t g(x) dt` on the nodes of `axes`.
pub fn semigroup_resolvent<F: Field + ?Sized>(
    g: &F,
    model: &SpectralModel,
    table: &DensityTable,
    axes: &[Axis],
    config: ResolventConfig,
    key: StreamKey,
) -> Result<Resolvent, KolmogorovError> {
    let op = ResolventOperator::new(model, table, config, key)?;
    let u = op.apply(g, axes)?;
    let sup = g.sup_bound().unwrap_or_else(|| u.sup_norm() * config.lambda);
    let truncation_bound = config.quadrature.truncation_bound(config.lambda, sup);
    Ok(Resolvent { u, truncation_bound, within_tolerance: truncation_bound <= config.tolerance })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PicardConfig {
    pub lambda: f64,
    /// Regularity exponent `γ` of the model.
    pub gamma: f64,
    pub theta: f64,
    /// Hölder exponent of `B`.
    pub beta: f64,
    /// `‖B‖_β` used in the contraction check.
    pub drift_norm: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub quadrature: TimeQuadrature,
    pub samples: usize,
}

impl PicardConfig {
    pub fn norm_index(&self) -> f64 {
        self.gamma + self.theta
    }

    fn resolvent(&self) -> ResolventConfig {
        ResolventConfig { lambda: self.lambda, quadrature: self.quadrature, samples: self.samples, tolerance: f64::INFINITY }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PicardState {
    pub iterate: GridFunction,
    pub iteration: usize,
    /// `‖U_n - U_{n-1}‖` in the empirical `(γ+θ)`-norm, starting at `n = 1`.
    pub successive_norms: Vec<f64>,
    pub lambda: f64,
    pub theta: f64,
    pub gamma: f64,
    pub beta: f64,
    pub c_alpha: f64,
    /// Contraction integral of the truncated problem.
    pub c_lambda: f64,
    /// Contraction integral with `Λ_t` taken over all modes, when finite.
    pub c_lambda_full: Option<f64>,
    /// `2 c_α C_λ ‖B‖_β` with the truncated integral.
    pub contraction_bound: f64,
    pub converged: bool,
}

impl PicardState {
    pub fn norm_index(&self) -> f64 {
        self.gamma + self.theta
    }

    /// Successive-norm ratios `d_{n+1} / d_n` over nonzero differences.
    pub fn ratios(&self) -> Vec<f64> {
        self.successive_norms.windows(2).filter(|w| w[0] > 0.0 && w[1] > 0.0).map(|w| w[1] / w[0]).collect()
    }

    /// Geometric mean of the ratios after the second iteration.
    pub fn fitted_ratio(&self) -> Option<f64> {
        let r: Vec<f64> = self.ratios().into_iter().skip(1).collect();
        if r.is_empty() {
            return None;
        }
        Some((r.iter().map(|v| v.ln()).sum::<f64>() / r.len() as f64).exp())
    }
}

/// `F + DU · B` at every node.
fn picard_source(f: &GridFunction, b: &GridFunction, u: &GridFunction) -> GridFunction {
    let jac = u.nodal_jacobian();
    let (cd, d) = (u.codim(), u.dims());
    let mut s = f.clone();
    for node in 0..s.len() {
        let j = jac.node_value(node);
        let bv = b.node_value(node);
        let vals = &mut s.values_mut()[node * cd..(node + 1) * cd];
        for c in 0..cd {
            vals[c] += (0..d).map(|k| j[c * d + k] * bv[k]).sum::<f64>();
        }
    }
    s
}

/// Picard iteration `U_0 = 0`, `U_n = resolvent(⟨B, DU_{n-1}⟩ + F)`.
pub fn solve_picard(
    f: &GridFunction,
    b: &GridFunction,
    model: &SpectralModel,
    table: &DensityTable,
    config: PicardConfig,
    key: StreamKey,
) -> Result<PicardState, KolmogorovError> {
    if !f.same_grid(b) {
        return Err(KolmogorovError::Dimension("F and B live on different grids".into()));
    }
    if b.codim() != b.dims() || f.dims() != model.truncation() {
        return Err(KolmogorovError::Dimension(format!(
            "B must map R^{} to itself and the model must have {} modes",
            f.dims(),
            f.dims()
        )));
    }
    let c_alpha = table.c_alpha()?;
    let q = config.gamma + config.theta - config.beta;
    let c_lambda = model.c_lambda_truncated(config.lambda, q)?;
    let c_lambda_full = match model.c_lambda(config.lambda, q)? {
        CLambda::Finite { value, .. } => Some(value),
        CLambda::Divergent { .. } => None,
    };
    let contraction_bound = 2.0 * c_alpha * c_lambda * config.drift_norm;
    if contraction_bound >= 1.0 {
        return Err(KolmogorovError::NotContractive { bound: contraction_bound });
    }
    let op = ResolventOperator::new(model, table, config.resolvent(), key)?;
    let index = config.norm_index();
    let mut u = GridFunction::zeros(f.axes().to_vec(), f.codim())?;
    let mut prev_source: Option<GridFunction> = None;
    let mut norms = Vec::new();
    let mut rising = 0;
    let mut converged = false;
    let mut iteration = 0;
    while iteration < config.max_iter {
        let source = picard_source(f, b, &u);
        if prev_source.as_ref() == Some(&source) {
            converged = true;
            break;
        }
        let next = op.apply(&source, f.axes())?;
        let diff = GridFunction::from_values(
            f.axes().to_vec(),
            f.codim(),
            next.values().iter().zip(u.values()).map(|(a, b)| a - b).collect(),
        )?;
        let d = empirical_norm(&diff, index).total();
        iteration += 1;
        if let Some(&last) = norms.last() {
            if last > 0.0 && d / last >= 1.0 {
                rising += 1;
                if rising >= 3 {
                    return Err(KolmogorovError::NonContraction { ratio: d / last, iteration });
                }
            } else {
                rising = 0;
            }
        }
        norms.push(d);
        u = next;
        prev_source = Some(source);
        if d < config.tol {
            converged = true;
            break;
        }
    }
    Ok(PicardState {
        iterate: u,
        iteration,
        successive_norms: norms,
        lambda: config.lambda,
        theta: config.theta,
        gamma: config.gamma,
        beta: config.beta,
        c_alpha,
        c_lambda,
        c_lambda_full,
        contraction_bound,
        converged,
    })
}

/// Generator value split into its drift and jump parts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorValue {
    pub value: Vec<f64>,
    pub drift: Vec<f64>,
    pub jump: Vec<f64>,
    /// Set when `x` is within unit distance of the extent boundary, where
    /// the compensated region already sees the constant extension.
    pub flagged: bool,
}

/// `𝓛U(x) = ⟨Ax, DU(x)⟩ + Σ_k β_k^α ∫ [U(x + z e_k) - U(x) - ∂_k U(x) z 1_{|z|≤1}] ν(dz)`
/// with `ν(dz) = c |z|^{-1-α} dz` the Lévy measure of the standard law.
pub struct Generator<'a> {
    u: &'a GridFunction,
    jacobian: GridFunction,
    rates: Vec<f64>,
    jump_weights: Vec<f64>,
    alpha: f64,
    levy: f64,
    gl: GaussLegendre,
}

impl<'a> Generator<'a> {
    pub fn new(u: &'a GridFunction, model: &SpectralModel) -> Result<Self, KolmogorovError> {
        if u.dims() != model.truncation() {
            return Err(KolmogorovError::Dimension(format!("grid has {} axes, model {} modes", u.dims(), model.truncation())));
        }
        let alpha = model.alpha();
        Ok(Self {
            u,
            jacobian: u.nodal_jacobian(),
            rates: model.gammas(),
            jump_weights: model.betas().iter().map(|b| b.powf(alpha)).collect(),
            alpha,
            levy: levy_intensity(alpha),
            gl: GaussLegendre::new(16),
        })
    }

    /// Interpolated Jacobian, row-major `codim × dims`.
    pub fn jacobian_at(&self, x: &[f64]) -> Vec<f64> {
        self.jacobian.eval(x)
    }

    /// `U` on the line `x + (s - x_k) e_k`: cubic Lagrange interpolation along
    /// axis `k` (multilinear across the others), constant beyond the extent.
    fn line_value(&self, p: &mut [f64], k: usize, s: f64, out: &mut [f64], tmp: &mut [f64]) {
        let axis = self.u.axes()[k];
        let (i, t, outside) = axis.locate(s);
        if outside || i == 0 || i + 2 >= axis.points {
            p[k] = s;
            self.u.eval_flagged(p, out);
            return;
        }
        let w = [
            -t * (t - 1.0) * (t - 2.0) / 6.0,
            (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0,
            -(t + 1.0) * t * (t - 2.0) / 2.0,
            (t + 1.0) * t * (t - 1.0) / 6.0,
        ];
        out.iter_mut().for_each(|o| *o = 0.0);
        for (j, wj) in w.iter().enumerate() {
            p[k] = axis.node(i + j - 1);
            self.u.eval_flagged(p, tmp);
            for (o, v) in out.iter_mut().zip(tmp.iter()) {
                *o += wj * v;
            }
        }
    }

    /// `∫_{from}^∞ [φ(z) + φ(-z) - 2φ(0)] c z^{-1-α} dz` along axis `k`, plus
    /// (when `taylor`) the second-order Taylor part on `|z| < from`.
    fn symmetric_integral(&self, x: &[f64], k: usize, from: f64, taylor: bool, out: &mut [f64]) {
        let cd = self.u.codim();
        let axis = self.u.axes()[k];
        let (alpha, c) = (self.alpha, self.levy);
        let mut p = x.to_vec();
        let mut buf = vec![0.0; cd];
        let mut tmp = vec![0.0; cd];
        let mut centre = vec![0.0; cd];
        self.line_value(&mut p, k, x[k], &mut centre, &mut tmp);
        // φ(z) + φ(-z) - 2φ(0) accumulated with weight `w`
        let mut sym = |z: f64, w: f64, out: &mut [f64]| {
            self.line_value(&mut p, k, x[k] + z, &mut buf, &mut tmp);
            for i in 0..cd {
                out[i] += w * (buf[i] - centre[i]);
            }
            self.line_value(&mut p, k, x[k] - z, &mut buf, &mut tmp);
            for i in 0..cd {
                out[i] += w * (buf[i] - centre[i]);
            }
        };
        out.iter_mut().for_each(|o| *o = 0.0);
        if taylor {
            sym(from, c * from.powf(2.0 - alpha) / (2.0 - alpha) / (from * from), out);
        }
        let far = (x[k] - axis.lower).max(axis.upper - x[k]);
        let mut panels = Vec::new();
        let mut a = from;
        while a < 1.0 && a < far {
            let b = (2.0 * a).min(1.0).min(far);
            panels.push((a, b));
            a = b;
        }
        while a < far {
            let b = (a + (0.25 * a).min(1.0)).min(far);
            panels.push((a, b));
            a = b;
        }
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        for (a, b) in panels {
            nodes.clear();
            weights.clear();
            self.gl.push_panel(a, b, &mut nodes, &mut weights);
            for (z, w) in nodes.iter().zip(&weights) {
                sym(*z, w * c * z.powf(-1.0 - alpha), out);
            }
        }
        // both sides constant beyond the far edge
        let z_tail = far.max(from);
        sym(z_tail + 1.0 + axis.upper - axis.lower, c * z_tail.powf(-alpha) / alpha, out);
    }

    /// One-dimensional jump integral along axis `k`.
    fn jump_integral(&self, x: &[f64], k: usize, out: &mut [f64]) {
        let h = self.u.axes()[k].spacing().min(1.0);
        self.symmetric_integral(x, k, h, true, out);
    }

    /// `∫_{|y| > threshold} [U(x + y e_k) - U(x)] c |y|^{-1-α} dy`: the
    /// compensator of jumps above `threshold` along axis `k`.
    pub fn jump_tail(&self, x: &[f64], k: usize, threshold: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.u.codim()];
        self.symmetric_integral(x, k, threshold, false, &mut out);
        out
    }

    pub fn u(&self) -> &GridFunction {
        self.u
    }

    pub fn apply(&self, x: &[f64]) -> Result<GeneratorValue, KolmogorovError> {
        if x.len() != self.u.dims() || !self.u.contains(x) {
            return Err(KolmogorovError::Outside { x: x.to_vec() });
        }
        let (cd, d) = (self.u.codim(), self.u.dims());
        let jac = self.jacobian_at(x);
        let drift: Vec<f64> = (0..cd).map(|c| (0..d).map(|k| -self.rates[k] * x[k] * jac[c * d + k]).sum()).collect();
        let mut jump = vec![0.0; cd];
        let mut part = vec![0.0; cd];
        for k in 0..d {
            self.jump_integral(x, k, &mut part);
            for c in 0..cd {
                jump[c] += self.jump_weights[k] * part[c];
            }
        }
        let value = drift.iter().zip(&jump).map(|(a, b)| a + b).collect();
        Ok(GeneratorValue { value, drift, jump, flagged: self.u.edge_distance(x) < 1.0 })
    }
}

/// `𝓛U(x)` for a single point.
pub fn generator_apply(u: &GridFunction, model: &SpectralModel, x: &[f64]) -> Result<GeneratorValue, KolmogorovError> {
    Generator::new(u, model)?.apply(x)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeResidual {
    pub x: Vec<f64>,
    pub residual: Vec<f64>,
    pub norm: f64,
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub probes: Vec<ProbeResidual>,
    /// Over unflagged probes.
    pub max: f64,
    pub mean: f64,
    pub excluded: usize,
}

/// `λU - ⟨B, DU⟩ - 𝓛U - F` at each probe. Probes outside the extent or
/// within unit distance of its boundary are flagged and excluded.
pub fn residual<F: Field + ?Sized, B: Field + ?Sized>(
    u: &GridFunction,
    f: &F,
    b: &B,
    model: &SpectralModel,
    lambda: f64,
    probes: &[Vec<f64>],
) -> Result<ResidualReport, KolmogorovError> {
    let gen = Generator::new(u, model)?;
    let (cd, d) = (u.codim(), u.dims());
    let rows = map_ordered(probes, |x| -> Result<ProbeResidual, KolmogorovError> {
        if x.len() != d {
            return Err(KolmogorovError::Dimension(format!("probe of length {}", x.len())));
        }
        if !u.contains(x) {
            return Ok(ProbeResidual { x: x.clone(), residual: vec![], norm: f64::NAN, flagged: true });
        }
        let g = gen.apply(x)?;
        let jac = gen.jacobian_at(x);
        let uv = u.eval(x);
        let fv = f.eval(x);
        let bv = b.eval(x);
        let res: Vec<f64> = (0..cd)
            .map(|c| lambda * uv[c] - (0..d).map(|k| jac[c * d + k] * bv[k]).sum::<f64>() - g.value[c] - fv[c])
            .collect();
        let norm = res.iter().map(|v| v * v).sum::<f64>().sqrt();
        Ok(ProbeResidual { x: x.clone(), residual: res, norm, flagged: g.flagged })
    });
    let probes: Vec<ProbeResidual> = rows.into_iter().collect::<Result<_, _>>()?;
    let kept: Vec<f64> = probes.iter().filter(|p| !p.flagged).map(|p| p.norm).collect();
    let max = kept.iter().cloned().fold(0.0, f64::max);
    let mean = if kept.is_empty() { 0.0 } else { kept.iter().sum::<f64>() / kept.len() as f64 };
    Ok(ResidualReport { excluded: probes.len() - kept.len(), probes, max, mean })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    /// Empirical `(γ+θ)`-norm of `U`.
    pub u_norm: EmpiricalNorm,
    /// Empirical `β`-norm of `F`.
    pub f_norm: EmpiricalNorm,
    pub ratio: f64,
    pub c_lambda: f64,
    /// `‖U‖_{γ+θ} ≤ C_λ ‖F‖_β` for the surrogates.
    pub estimate_holds: bool,
    pub triples: usize,
    pub violations: usize,
    pub holding_fraction: f64,
}

/// Double increment `|U(x+z) - U(x) - U(y+z) + U(y)|` and its bound
/// `|x-y| |z|^{γ+θ-1} ‖U‖_{γ+θ}` for one triple.
pub fn double_increment(u: &GridFunction, x: &[f64], y: &[f64], z: &[f64], norm: f64, index: f64) -> (f64, f64) {
    let shift = |p: &[f64]| p.iter().zip(z).map(|(a, b)| a + b).collect::<Vec<f64>>();
    let (a, b, c, d) = (u.eval(&shift(x)), u.eval(x), u.eval(&shift(y)), u.eval(y));
    let lhs = (0..u.codim()).map(|i| (a[i] - b[i] - c[i] + d[i]).powi(2)).sum::<f64>().sqrt();
    let dist = x.iter().zip(y).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
    let zn = z.iter().map(|v| v * v).sum::<f64>().sqrt();
    (lhs, dist * zn.powf(index - 1.0) * norm)
}

/// Compare the empirical norms of `U` and `F`, and sample the double-increment
/// inequality on random triples with `|z| ≤ 1` kept inside the extent.
pub fn verify_estimates(state: &PicardState, f: &GridFunction, triples: usize, key: StreamKey) -> EstimateReport {
    let u = &state.iterate;
    let index = state.norm_index();
    let u_norm = empirical_norm(u, index);
    let f_norm = empirical_norm(f, state.beta);
    let total = u_norm.total();
    let mut rng = key.named("double-increment").rng();
    let d = u.dims();
    let mut violations = 0;
    for _ in 0..triples {
        let draw_point = |rng: &mut rand_chacha::ChaCha8Rng| -> Vec<f64> {
            u.axes()
                .iter()
                .map(|a| {
                    let margin = (1.0f64).min(0.25 * (a.upper - a.lower));
                    rng.random_range(a.lower + margin..a.upper - margin)
                })
                .collect()
        };
        let x = draw_point(&mut rng);
        let y = draw_point(&mut rng);
        let dir: Vec<f64> = (0..d).map(|_| rng.random::<f64>() - 0.5).collect();
        let len = dir.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-300);
        let radius = rng.random::<f64>().powf(1.0 / d as f64);
        let margin = u.axes().iter().map(|a| (1.0f64).min(0.25 * (a.upper - a.lower))).fold(f64::INFINITY, f64::min);
        let z: Vec<f64> = dir.iter().map(|v| v / len * radius * margin).collect();
        let (lhs, rhs) = double_increment(u, &x, &y, &z, total, index);
        if lhs > rhs * (1.0 + 1e-12) {
            violations += 1;
        }
    }
    let ratio = if f_norm.total() > 0.0 { total / f_norm.total() } else { 0.0 };
    EstimateReport {
        u_norm,
        f_norm,
        ratio,
        c_lambda: state.c_lambda,
        estimate_holds: total <= state.c_lambda * f_norm.total(),
        triples,
        violations,
        holding_fraction: if triples == 0 { 1.0 } else { 1.0 - violations as f64 / triples as f64 },
    }
}
