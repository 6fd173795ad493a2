//! Pathwise checks of the Itô formula and of the Zvonkin mild identity along
//! skeleton-driven paths.

use serde::{Deserialize, Serialize};

use super::{phi, PathSample, SimConfig, SimError};
use crate::functions::{Field, TestFunction, TestKind};
use crate::grid::GridFunction;
use crate::kolmogorov::Generator;
use crate::quadrature::{graded_breaks, GaussLegendre};
use crate::spectral::SpectralModel;
use crate::stable::levy_intensity;

/// `f(X_t) - f(x)` against its Itô decomposition at every step time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItoSeries {
    pub times: Vec<f64>,
    pub change: Vec<f64>,
    /// Left-point quadrature of `(𝓛f + ⟨B, Df⟩)(X_s)`.
    pub integral: Vec<f64>,
    /// Compensated big jumps plus the Gaussian surrogate term.
    pub martingale: Vec<f64>,
}

impl ItoSeries {
    /// `change - integral`: zero mean across replicates.
    pub fn residual(&self) -> Vec<f64> {
        self.change.iter().zip(&self.integral).map(|(c, i)| c - i).collect()
    }

    /// `change - integral - martingale`: small on every path.
    pub fn pathwise(&self) -> Vec<f64> {
        (0..self.times.len()).map(|i| self.change[i] - self.integral[i] - self.martingale[i]).collect()
    }

    pub fn terminal_residual(&self) -> f64 {
        self.change.last().unwrap() - self.integral.last().unwrap()
    }

    pub fn terminal_pathwise(&self) -> f64 {
        self.change.last().unwrap() - self.integral.last().unwrap() - self.martingale.last().unwrap()
    }
}

/// `∫_0^ε (cos(az) - 1) z^{-1-α} dz`, Taylor term split off analytically.
fn small_cos_integral(a: f64, epsilon: f64, alpha: f64) -> f64 {
    let gl = GaussLegendre::new(16);
    let smooth = gl.composite(&graded_breaks(0.0, epsilon, 30), |z| {
        let az = a * z;
        // cos(az) - 1 + (az)²/2 without cancellation for small az
        let r = if az.abs() < 1e-3 { az.powi(4) / 24.0 - az.powi(6) / 720.0 } else { az.cos() - 1.0 + 0.5 * az * az };
        r * z.powf(-1.0 - alpha)
    });
    smooth - 0.5 * a * a * epsilon.powf(2.0 - alpha) / (2.0 - alpha)
}

/// `∫_{|z|>ε} (cos(az) - 1) ν(dz)` for the standard law.
fn big_jump_cos_mean(a: f64, epsilon: f64, alpha: f64) -> f64 {
    -a.abs().powf(alpha) - 2.0 * levy_intensity(alpha) * small_cos_integral(a, epsilon, alpha)
}

/// Itô decomposition of `f(X_t)` for a cosine or constant test function.
pub fn ito_residual(path: &PathSample, f: &TestFunction, config: &SimConfig) -> Result<ItoSeries, SimError> {
    let epsilon = path.epsilon.ok_or(SimError::NeedsSkeleton("Itô residual"))?;
    let model = &config.model;
    let n = model.truncation();
    if f.dim() != n {
        return Err(SimError::Config(format!("test function dim {} vs {n} modes", f.dim())));
    }
    let (weights, phase) = match f.kind() {
        TestKind::CosLinear { weights, phase } => (weights.clone(), *phase),
        TestKind::Constant { .. } => (vec![0.0; n], 0.0),
        other => return Err(SimError::Unsupported(format!("{other:?}"))),
    };
    let alpha = model.alpha();
    let gammas = model.gammas();
    let betas = model.betas();
    let dt = path.dt();
    let symbol: f64 = (0..n).map(|k| (weights[k] * betas[k]).abs().powf(alpha)).sum();
    let compensator: f64 = (0..n).map(|k| big_jump_cos_mean(weights[k] * betas[k], epsilon, alpha)).sum();

    let steps = path.states.len() - 1;
    let mut change = Vec::with_capacity(steps + 1);
    let mut integral = vec![0.0];
    let mut martingale = vec![0.0];
    let f0 = f.value(&path.states[0]);
    for s in &path.states {
        change.push(f.value(s) - f0);
    }
    let mut drift = vec![0.0; n];
    let mut events = path.event_log.iter().peekable();
    for step in 0..steps {
        let x = &path.states[step];
        config.drift.eval_into(x, &mut drift);
        let theta: f64 = weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + phase;
        let (sin, cos) = theta.sin_cos();
        let transport: f64 = (0..n).map(|k| weights[k] * (-gammas[k] * x[k] + drift[k])).sum();
        let generator = -sin * transport - cos * symbol;
        integral.push(integral[step] + generator * dt);

        let mut m = -sin * weights.iter().zip(&path.gaussian[step]).map(|(w, g)| w * g).sum::<f64>();
        m -= dt * cos * compensator;
        let mut pre = x.clone();
        while let Some(e) = events.next_if(|e| e.step == step) {
            let before = f.value(&pre);
            pre[e.mode] += betas[e.mode] * e.size;
            m += f.value(&pre) - before;
        }
        martingale.push(martingale[step] + m);
    }
    Ok(ItoSeries { times: path.times.clone(), change, integral, martingale })
}

/// Vector residual of the Zvonkin mild identity at every step time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZvonkinSeries {
    pub times: Vec<f64>,
    pub residuals: Vec<Vec<f64>>,
    pub norms: Vec<f64>,
    /// First step at which the path left the extent of `U`.
    pub exited: Option<usize>,
}

impl ZvonkinSeries {
    pub fn terminal_norm(&self) -> f64 {
        *self.norms.last().unwrap()
    }

    pub fn sup_norm(&self) -> f64 {
        self.norms.iter().copied().fold(0.0, f64::max)
    }
}

/// `Σ_k β_k^α ∫_{|z|>ε} [U(x + β_k z e_k) - U(x)] ν(dz)` on the nodes of `U`.
pub fn jump_compensator(u: &GridFunction, model: &SpectralModel, epsilon: f64) -> Result<GridFunction, SimError> {
    let generator = Generator::new(u, model)?;
    let alpha = model.alpha();
    let betas = model.betas();
    let out = GridFunction::from_fn(u.axes().to_vec(), u.codim(), |x, out| {
        out.iter_mut().for_each(|o| *o = 0.0);
        for (k, b) in betas.iter().enumerate() {
            let tail = generator.jump_tail(x, k, b * epsilon);
            for (o, t) in out.iter_mut().zip(tail) {
                *o += b.powf(alpha) * t;
            }
        }
    })
    .map_err(crate::kolmogorov::KolmogorovError::from)?;
    Ok(out)
}

/// Residual of
/// `X_t + U(X_t) = e^{tA}(x + U(x)) + ∫ e^{(t-s)A}(λU - AU)(X_s) ds + Z_A(t) + ∫ e^{(t-s)A} dM^U_s`
/// where `M^U` collects the compensated jumps of `U(X)` and the Gaussian
/// surrogate term `DU · dG`. `U` should solve the Kolmogorov equation with
/// `F = B`.
pub fn zvonkin_identity_residual(
    path: &PathSample,
    u: &GridFunction,
    config: &SimConfig,
    lambda: f64,
) -> Result<ZvonkinSeries, SimError> {
    let epsilon = path.epsilon.ok_or(SimError::NeedsSkeleton("Zvonkin residual"))?;
    let model = &config.model;
    let n = model.truncation();
    if u.dims() != n || u.codim() != n {
        return Err(SimError::Config(format!("U maps R^{} to R^{}, model has {n} modes", u.dims(), u.codim())));
    }
    let gammas = model.gammas();
    let betas = model.betas();
    let dt = path.dt();
    let compensator = jump_compensator(u, model, epsilon)?;
    let jacobian = u.nodal_jacobian();
    let decay: Vec<f64> = gammas.iter().map(|g| (-g * dt).exp()).collect();
    let half: Vec<f64> = gammas.iter().map(|g| (-0.5 * g * dt).exp()).collect();
    let weight: Vec<f64> = gammas.iter().map(|&g| phi(g, dt)).collect();

    let mut exited = None;
    let mut eval = |x: &[f64], out: &mut [f64], step: usize| {
        if u.eval_flagged(x, out) && exited.is_none() {
            exited = Some(step);
        }
    };
    let x0 = &path.states[0];
    let mut u0 = vec![0.0; n];
    eval(x0, &mut u0, 0);
    let start: Vec<f64> = x0.iter().zip(&u0).map(|(a, b)| a + b).collect();

    let mut drift_conv = vec![0.0; n];
    let mut noise_conv = vec![0.0; n];
    let mut mart_conv = vec![0.0; n];
    let mut residuals = vec![vec![0.0; n]];
    let mut ux = vec![0.0; n];
    let mut cx = vec![0.0; n];
    let mut jac = vec![0.0; n * n];
    let mut a = vec![0.0; n];
    let mut b = vec![0.0; n];
    let mut events = path.event_log.iter().peekable();
    for step in 0..path.states.len() - 1 {
        let x = &path.states[step];
        let t1 = path.times[step + 1];
        eval(x, &mut ux, step);
        compensator.eval_flagged(x, &mut cx);
        jacobian.eval_flagged(x, &mut jac);
        let g = &path.gaussian[step];
        for c in 0..n {
            let source = lambda * ux[c] + gammas[c] * ux[c];
            drift_conv[c] = decay[c] * drift_conv[c] + weight[c] * source;
            noise_conv[c] = decay[c] * noise_conv[c] + path.noise[step][c];
            let small: f64 = (0..n).map(|k| jac[c * n + k] * g[k]).sum();
            mart_conv[c] = decay[c] * mart_conv[c] + half[c] * small - weight[c] * cx[c];
        }
        let mut pre = x.clone();
        while let Some(e) = events.next_if(|e| e.step == step) {
            eval(&pre, &mut a, step);
            pre[e.mode] += betas[e.mode] * e.size;
            eval(&pre, &mut b, step);
            for c in 0..n {
                mart_conv[c] += (-gammas[c] * (t1 - e.time)).exp() * (b[c] - a[c]);
            }
        }
        let x1 = &path.states[step + 1];
        eval(x1, &mut ux, step + 1);
        let r = (0..n)
            .map(|c| {
                let lhs = x1[c] + ux[c];
                let rhs = (-gammas[c] * t1).exp() * start[c] + drift_conv[c] + noise_conv[c] + mart_conv[c];
                lhs - rhs
            })
            .collect();
        residuals.push(r);
    }
    let norms = residuals.iter().map(|r| r.iter().map(|v| v * v).sum::<f64>().sqrt()).collect();
    Ok(ZvonkinSeries { times: path.times.clone(), residuals, norms, exited })
}
