//! Galerkin-truncated paths of `dX = (AX + B(X)) dt + dZ` by exponential
//! Euler, with either exact stochastic-convolution increments or a shared
//! [`NoiseSkeleton`].

mod residuals;
mod skeleton;

pub use residuals::{ito_residual, jump_compensator, zvonkin_identity_residual, ItoSeries, ZvonkinSeries};
pub use skeleton::{from_fixed, to_fixed, NoiseSkeleton, DEFAULT_JUMP_BUDGET, QUANTUM_BITS};

use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::functions::{Drift, Field};
use crate::kolmogorov::KolmogorovError;
use crate::rng::{map_ordered, StreamKey};
use crate::spectral::{admissible_beta_interval, ou_scale_raw, SpectralError, SpectralModel};
use crate::stable::{standard_variate, StableError};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    Config(String),
    #[error("{steps} steps are not compatible with {base_cells} base cells")]
    IncompatibleGrid { steps: usize, base_cells: usize },
    #[error("drift exponent {beta} outside the admissible interval ({lower}, {upper})")]
    Inadmissible { beta: f64, lower: f64, upper: f64 },
    #[error("{0} requires skeleton noise")]
    NeedsSkeleton(&'static str),
    #[error("unsupported test function for this residual: {0}")]
    Unsupported(String),
    #[error(transparent)]
    Stable(#[from] StableError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Kolmogorov(#[from] KolmogorovError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum NoiseMode {
    /// No noise: the deterministic mild flow.
    Zero,
    ExactIncrement,
    Skeleton { epsilon: Option<f64>, base_cells: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub model: SpectralModel,
    pub drift: Drift,
    pub x0: Vec<f64>,
    pub dt: f64,
    pub horizon: f64,
    pub noise: NoiseMode,
    pub seed: u64,
}

impl SimConfig {
    pub fn steps(&self) -> Result<usize, SimError> {
        if !(self.dt > 0.0 && self.horizon > 0.0) {
            return Err(SimError::Config(format!("dt {} and horizon {} must be positive", self.dt, self.horizon)));
        }
        let n = (self.horizon / self.dt).round();
        if n < 1.0 || ((n * self.dt - self.horizon).abs() > 1e-9 * self.horizon) {
            return Err(SimError::Config(format!("dt {} does not divide horizon {}", self.dt, self.horizon)));
        }
        Ok(n as usize)
    }

    fn validate(&self) -> Result<usize, SimError> {
        let n = self.model.truncation();
        if self.x0.len() != n || self.drift.dim() != n {
            return Err(SimError::Config(format!(
                "model has {n} modes, x0 has {}, drift has {}",
                self.x0.len(),
                self.drift.dim()
            )));
        }
        self.steps()
    }

    /// SHA-256 of the JSON encoding, hex.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(json.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn stream(&self) -> StreamKey {
        StreamKey::new(self.seed)
    }

    /// The skeleton this config would draw for replicate `replicate`.
    pub fn skeleton(&self, replicate: u64) -> Result<NoiseSkeleton, SimError> {
        match self.noise {
            NoiseMode::Skeleton { epsilon, base_cells } => NoiseSkeleton::new(
                self.model.truncation(),
                self.model.alpha(),
                self.horizon,
                epsilon,
                base_cells,
                self.stream().named("skeleton").child(replicate),
            ),
            _ => Err(SimError::NeedsSkeleton("skeleton construction")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JumpEvent {
    pub step: usize,
    pub mode: usize,
    pub time: f64,
    /// Jump of the standard driving law; mode `k` moves by `β_k · size`.
    pub size: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathSample {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    /// Total noise added to each mode in each step.
    pub noise: Vec<Vec<f64>>,
    /// Small-jump surrogate part of `noise`, undamped (skeleton mode only).
    pub gaussian: Vec<Vec<f64>>,
    pub event_log: Vec<JumpEvent>,
    pub epsilon: Option<f64>,
    pub config_hash: String,
}

impl PathSample {
    pub fn terminal(&self) -> &[f64] {
        self.states.last().expect("path has at least the initial state")
    }

    pub fn dt(&self) -> f64 {
        self.times[1] - self.times[0]
    }
}

/// Exact draw of `∫_0^{dt} e^{-γ_k (dt - s)} dZ^k_s`: `c_k(dt) S`.
pub fn convolution_increment<R: Rng + ?Sized>(model: &SpectralModel, k: usize, dt: f64, rng: &mut R) -> Result<f64, SimError> {
    let scale = model.ou_scale(k, dt)?;
    Ok(scale * standard_variate(model.alpha(), rng))
}

/// `(1 - e^{-γ dt}) / γ`, equal to `dt` at `γ = 0`.
#[inline]
pub(crate) fn phi(gamma: f64, dt: f64) -> f64 {
    if gamma == 0.0 {
        dt
    } else {
        -(-gamma * dt).exp_m1() / gamma
    }
}

pub fn simulate_path(config: &SimConfig) -> Result<PathSample, SimError> {
    match config.noise {
        NoiseMode::Skeleton { .. } => {
            let sk = config.skeleton(0)?;
            simulate_with_skeleton(config, &sk)
        }
        _ => simulate_inner(config, None),
    }
}

/// Simulate on a given skeleton; `config.noise` is ignored.
pub fn simulate_with_skeleton(config: &SimConfig, skeleton: &NoiseSkeleton) -> Result<PathSample, SimError> {
    if skeleton.modes() != config.model.truncation() || (skeleton.horizon() - config.horizon).abs() > 1e-12 * config.horizon {
        return Err(SimError::Config("skeleton does not match the model or horizon".into()));
    }
    simulate_inner(config, Some(skeleton))
}

fn simulate_inner(config: &SimConfig, skeleton: Option<&NoiseSkeleton>) -> Result<PathSample, SimError> {
    let steps = config.validate()?;
    let n = config.model.truncation();
    let dt = config.dt;
    let gammas = config.model.gammas();
    let betas = config.model.betas();
    let alpha = config.model.alpha();
    let decay: Vec<f64> = gammas.iter().map(|g| (-g * dt).exp()).collect();
    let half: Vec<f64> = gammas.iter().map(|g| (-0.5 * g * dt).exp()).collect();
    let drift_w: Vec<f64> = gammas.iter().map(|&g| phi(g, dt)).collect();
    let scales: Vec<f64> = (0..n).map(|k| ou_scale_raw(alpha, gammas[k], betas[k], dt)).collect();

    let mut noise = vec![vec![0.0; n]; steps];
    let mut gaussian = Vec::new();
    let mut event_log = Vec::new();
    match (config.noise, skeleton) {
        (_, Some(sk)) => {
            gaussian = vec![vec![0.0; n]; steps];
            for k in 0..n {
                let g = sk.step_increments(k, steps)?;
                for (s, v) in g.into_iter().enumerate() {
                    gaussian[s][k] = betas[k] * v;
                    noise[s][k] = half[k] * betas[k] * v;
                }
                for &(time, size) in sk.jumps(k) {
                    let step = (((time / dt).ceil() as usize).max(1) - 1).min(steps - 1);
                    let end = (step + 1) as f64 * dt;
                    noise[step][k] += betas[k] * size * (-gammas[k] * (end - time)).exp();
                    event_log.push(JumpEvent { step, mode: k, time, size });
                }
            }
            event_log.sort_by(|a, b| a.time.total_cmp(&b.time).then(a.mode.cmp(&b.mode)));
        }
        (NoiseMode::ExactIncrement, None) => {
            for k in 0..n {
                let mut rng = config.stream().named("increments").child(k as u64).rng();
                for row in noise.iter_mut() {
                    row[k] = scales[k] * standard_variate(alpha, &mut rng);
                }
            }
        }
        (NoiseMode::Zero, None) => {}
        (NoiseMode::Skeleton { .. }, None) => return Err(SimError::NeedsSkeleton("skeleton mode")),
    }

    let mut states = Vec::with_capacity(steps + 1);
    let mut x = config.x0.clone();
    let mut b = vec![0.0; n];
    states.push(x.clone());
    for row in &noise {
        config.drift.eval_into(&x, &mut b);
        for k in 0..n {
            x[k] = decay[k] * x[k] + drift_w[k] * b[k] + row[k];
        }
        states.push(x.clone());
    }
    Ok(PathSample {
        times: (0..=steps).map(|i| i as f64 * dt).collect(),
        states,
        noise,
        gaussian,
        event_log,
        epsilon: skeleton.map(|s| s.epsilon()),
        config_hash: config.hash(),
    })
}

/// Largest Euclidean distance between two paths over the coarse path's times.
pub fn sup_distance(coarse: &PathSample, fine: &PathSample) -> Result<f64, SimError> {
    let (nc, nf) = (coarse.states.len() - 1, fine.states.len() - 1);
    if nc == 0 || nf % nc != 0 {
        return Err(SimError::IncompatibleGrid { steps: nf, base_cells: nc });
    }
    let r = nf / nc;
    Ok((0..=nc)
        .map(|i| {
            coarse.states[i].iter().zip(&fine.states[i * r]).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
        })
        .fold(0.0, f64::max))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinementReport {
    /// Compared step sizes, coarse to fine.
    pub dts: Vec<f64>,
    pub reference_dt: f64,
    /// `distances[replicate][level]` against the reference path.
    pub distances: Vec<Vec<f64>>,
    pub medians: Vec<f64>,
    pub medians_strictly_decreasing: bool,
    /// Fraction of replicates whose distances strictly decrease per level.
    pub monotone_fraction: f64,
    /// Least-squares slope of `log median` against `log dt`.
    pub observed_order: f64,
    /// `Σ_m (1 - e^{-2Tγ_m}) / (2γ_m)`, partial sum with tail estimate.
    pub gronwall_sum: f64,
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Simulate every level plus a finer reference on one shared skeleton per
/// replicate and report sup-distances to the reference.
///
/// `levels` are step sizes from coarse to fine; the reference uses
/// `reference_dt`. The coarsest level fixes the base cells. When
/// `gamma_exponent` is given the drift exponent must lie in the admissible
/// interval for it.
pub fn shared_noise_refinement_experiment(
    config: &SimConfig,
    levels: &[f64],
    reference_dt: f64,
    replicates: usize,
    gamma_exponent: Option<f64>,
) -> Result<RefinementReport, SimError> {
    if levels.is_empty() || replicates == 0 {
        return Err(SimError::Config("need at least one level and one replicate".into()));
    }
    if !levels.windows(2).all(|w| w[1] < w[0]) || reference_dt >= *levels.last().unwrap() {
        return Err(SimError::Config("levels must decrease strictly and end above the reference step".into()));
    }
    if let Some(g) = gamma_exponent {
        let iv = admissible_beta_interval(g, config.model.alpha());
        let beta = config.drift.exponent();
        if !iv.contains(beta) {
            return Err(SimError::Inadmissible { beta, lower: iv.lower, upper: iv.upper });
        }
    }
    let base = SimConfig { dt: levels[0], ..config.clone() };
    let base_cells = base.steps()?;
    let epsilon = match config.noise {
        NoiseMode::Skeleton { epsilon, .. } => epsilon,
        _ => return Err(SimError::NeedsSkeleton("refinement experiment")),
    };
    let cfg = SimConfig { noise: NoiseMode::Skeleton { epsilon, base_cells }, ..config.clone() };
    let mut all: Vec<f64> = levels.to_vec();
    all.push(reference_dt);
    for &dt in &all {
        let steps = SimConfig { dt, ..cfg.clone() }.steps()?;
        if !(steps % base_cells == 0 && (steps / base_cells).is_power_of_two()) {
            return Err(SimError::IncompatibleGrid { steps, base_cells });
        }
    }
    let reps: Vec<u64> = (0..replicates as u64).collect();
    let rows = map_ordered(&reps, |&r| -> Result<Vec<f64>, SimError> {
        let sk = cfg.skeleton(r)?;
        let reference = simulate_with_skeleton(&SimConfig { dt: reference_dt, ..cfg.clone() }, &sk)?;
        levels
            .iter()
            .map(|&dt| sup_distance(&simulate_with_skeleton(&SimConfig { dt, ..cfg.clone() }, &sk)?, &reference))
            .collect()
    });
    let distances: Vec<Vec<f64>> = rows.into_iter().collect::<Result<_, _>>()?;
    let medians: Vec<f64> = (0..levels.len())
        .map(|l| median(&mut distances.iter().map(|row| row[l]).collect::<Vec<f64>>()))
        .collect();
    let strictly = |v: &[f64]| v.windows(2).all(|w| w[1] < w[0]);
    let monotone = distances.iter().filter(|row| strictly(row)).count();
    let pts: Vec<(f64, f64)> =
        levels.iter().zip(&medians).filter(|(_, m)| **m > 0.0).map(|(d, m)| (d.ln(), m.ln())).collect();
    let observed_order = if pts.len() >= 2 {
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / pts.len() as f64;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / pts.len() as f64;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        sxy / sxx
    } else {
        f64::NAN
    };
    Ok(RefinementReport {
        dts: levels.to_vec(),
        reference_dt,
        medians_strictly_decreasing: strictly(&medians),
        monotone_fraction: monotone as f64 / replicates as f64,
        observed_order,
        gronwall_sum: {
            let g = cfg.model.gronwall_sum(cfg.horizon);
            g.estimate().unwrap_or(g.partial)
        },
        distances,
        medians,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::reaction_diffusion_preset;

    fn config(noise: NoiseMode, drift: &str) -> SimConfig {
        let model = SpectralModel::explicit(1.5, vec![2.0], vec![1.0]).unwrap();
        SimConfig {
            model,
            drift: Drift::from_name(drift, 1, 0.5, 0.9).unwrap(),
            x0: vec![1.3],
            dt: 0.0125,
            horizon: 1.0,
            noise,
            seed: 7,
        }
    }

    #[test]
    fn zero_noise_zero_drift_is_linear_flow() {
        let p = simulate_path(&config(NoiseMode::Zero, "zero")).unwrap();
        for (t, s) in p.times.iter().zip(&p.states) {
            assert!((s[0] - 1.3 * (-2.0 * t).exp()).abs() < 1e-13);
        }
        assert_eq!(p.states[0], vec![1.3]);
    }

    #[test]
    fn constant_drift_is_exact_for_any_step() {
        for dt in [0.5, 0.1, 0.01] {
            let mut c = config(NoiseMode::Zero, "constant");
            c.dt = dt;
            let p = simulate_path(&c).unwrap();
            let t = 1.0f64;
            // constant profile value 0.5
            let exact = 1.3 * (-2.0f64 * t).exp() + 0.5 * (1.0 - (-2.0f64 * t).exp()) / 2.0;
            assert!((p.terminal()[0] - exact).abs() < 1e-13, "dt {dt}");
        }
    }

    #[test]
    fn skeleton_events_logged_once() {
        let c = config(NoiseMode::Skeleton { epsilon: None, base_cells: 10 }, "lipschitz");
        let sk = c.skeleton(0).unwrap();
        let p = simulate_with_skeleton(&c, &sk).unwrap();
        assert_eq!(p.event_log.len(), sk.jumps(0).len());
        for e in &p.event_log {
            assert!(p.times[e.step] < e.time && e.time <= p.times[e.step + 1] + 1e-12);
        }
    }

    #[test]
    fn identical_steps_give_zero_distance_and_identical_paths() {
        let c = config(NoiseMode::Skeleton { epsilon: None, base_cells: 10 }, "holder-cusp");
        let sk = c.skeleton(3).unwrap();
        let a = simulate_with_skeleton(&c, &sk).unwrap();
        let b = simulate_with_skeleton(&c, &sk).unwrap();
        assert_eq!(a, b);
        assert_eq!(sup_distance(&a, &b).unwrap(), 0.0);
    }

    #[test]
    fn increments_shrink_like_dt_to_one_over_alpha() {
        let m = SpectralModel::explicit(1.5, vec![1.0], vec![2.0]).unwrap();
        let (a, b) = (m.ou_scale(1, 1e-6).unwrap(), 2.0 * 1e-6f64.powf(1.0 / 1.5));
        assert!((a / b - 1.0).abs() < 1e-5);
        let stiff = SpectralModel::explicit(1.5, vec![1e6], vec![2.0]).unwrap();
        let limit = 2.0 * (1.5f64 * 1e6).powf(-1.0 / 1.5);
        assert!((stiff.ou_scale(1, 1.0).unwrap() / limit - 1.0).abs() < 1e-12);
        let mut rng = StreamKey::new(1).rng();
        assert!(convolution_increment(&m, 1, 0.1, &mut rng).unwrap().is_finite());
    }

    #[test]
    fn refinement_rejects_bad_ladders_and_inadmissible_drift() {
        let c = config(NoiseMode::Skeleton { epsilon: None, base_cells: 10 }, "lipschitz");
        assert!(shared_noise_refinement_experiment(&c, &[0.1, 0.03], 0.01, 2, None).is_err());
        assert!(shared_noise_refinement_experiment(&c, &[0.1, 0.05], 0.1, 2, None).is_err());
        let (model, budget) = reaction_diffusion_preset(1, 1.8, 0.35, 1).unwrap();
        let mut bad = c.clone();
        bad.model = model;
        bad.drift = Drift::from_name("holder-cusp", 1, 0.5, 0.5).unwrap();
        let e = shared_noise_refinement_experiment(&bad, &[0.1, 0.05], 0.025, 2, Some(budget.gamma)).unwrap_err();
        assert!(matches!(e, SimError::Inadmissible { .. }));
    }

    #[test]
    fn lipschitz_ladder_is_cauchy() {
        let c = config(NoiseMode::Skeleton { epsilon: None, base_cells: 8 }, "lipschitz");
        let c = SimConfig { horizon: 0.8, ..c };
        let r = shared_noise_refinement_experiment(&c, &[0.1, 0.05, 0.025], 0.00625, 20, None).unwrap();
        assert!(r.medians_strictly_decreasing, "{:?}", r.medians);
    }

    #[test]
    fn hash_changes_with_seed() {
        let a = config(NoiseMode::Zero, "zero");
        let b = SimConfig { seed: 8, ..a.clone() };
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash(), a.clone().hash());
        assert_eq!(a.hash().len(), 64);
    }
}
