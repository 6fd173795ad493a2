//! Browser demo: three operations on the core library, each returning JSON
//! for `www/main.js`. The plain functions are the tested surface; the
//! `wasm_bindgen` wrappers only serialize.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use levy_spde::functions::Drift;
use levy_spde::rng::StreamKey;
use levy_spde::simulator::{simulate_with_skeleton, NoiseMode, SimConfig};
use levy_spde::spectral::{lambda_t_envelope, reaction_diffusion_preset, reaction_diffusion_r_interval};
use levy_spde::stable::{sample_standard, DensityTable, GridSpec, StableLaw};

/// Plot window and resolution of the density view.
const DENSITY_WINDOW: f64 = 8.0;
const DENSITY_POINTS: usize = 161;
const HISTOGRAM_BINS: usize = 64;
/// Smaller than the CLI table; the browser rebuilds it on every request.
const TABLE_HALF_WIDTH: f64 = 20.0;
const TABLE_POINTS: usize = 4097;
/// Largest request the page may make, to keep the tab responsive.
const MAX_DRAWS: usize = 500_000;
const MAX_STEPS: usize = 20_000;
const MAX_MODES: usize = 16;

#[derive(Debug, Clone, Serialize)]
pub struct DensityView {
    pub alpha: f64,
    pub x: Vec<f64>,
    pub density: Vec<f64>,
    pub bin_centers: Vec<f64>,
    /// Normalized so the bars integrate to the share of draws inside the window.
    pub histogram: Vec<f64>,
    pub draws: usize,
    pub c_alpha: f64,
}

/// Tabulated stable density against a histogram of CMS draws.
pub fn density_view(alpha: f64, draws: usize, seed: u64) -> Result<DensityView, String> {
    if draws == 0 || draws > MAX_DRAWS {
        return Err(format!("draws must be in 1..={MAX_DRAWS}"));
    }
    let spec = GridSpec::new(TABLE_HALF_WIDTH, TABLE_POINTS).map_err(|e| e.to_string())?;
    let table = DensityTable::build(alpha, spec).map_err(|e| e.to_string())?;
    let law = StableLaw::standard(alpha).map_err(|e| e.to_string())?;
    let samples = sample_standard(&law, draws, StreamKey::new(seed).named("web-density")).map_err(|e| e.to_string())?;

    let x: Vec<f64> = (0..DENSITY_POINTS)
        .map(|i| -DENSITY_WINDOW + 2.0 * DENSITY_WINDOW * i as f64 / (DENSITY_POINTS - 1) as f64)
        .collect();
    let density = x.iter().map(|z| table.density(*z)).collect();
    let width = 2.0 * DENSITY_WINDOW / HISTOGRAM_BINS as f64;
    let mut counts = vec![0usize; HISTOGRAM_BINS];
    for s in &samples {
        let k = ((s + DENSITY_WINDOW) / width).floor();
        if k >= 0.0 && (k as usize) < HISTOGRAM_BINS {
            counts[k as usize] += 1;
        }
    }
    Ok(DensityView {
        alpha,
        x,
        density,
        bin_centers: (0..HISTOGRAM_BINS).map(|k| -DENSITY_WINDOW + (k as f64 + 0.5) * width).collect(),
        histogram: counts.iter().map(|c| *c as f64 / (draws as f64 * width)).collect(),
        draws,
        c_alpha: table.c_alpha().map_err(|e| e.to_string())?,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct PathView {
    pub times: Vec<f64>,
    /// `modes[k][i]` is mode `k+1` at `times[i]`.
    pub modes: Vec<Vec<f64>>,
    pub big_jumps: usize,
    pub drift_exponent: f64,
    pub admissible: (f64, f64),
}

/// One skeleton path of the reaction–diffusion model with the reaction drift.
pub fn path_view(alpha: f64, r: f64, modes: usize, amplitude: f64, dt: f64, seed: u64) -> Result<PathView, String> {
    if modes == 0 || modes > MAX_MODES {
        return Err(format!("modes must be in 1..={MAX_MODES}"));
    }
    if dt.is_nan() || dt <= 0.0 || (1.0 / dt).round() as usize > MAX_STEPS {
        return Err(format!("dt must be positive with at most {MAX_STEPS} steps on [0, 1]"));
    }
    let (model, budget) = reaction_diffusion_preset(1, alpha, r, modes).map_err(|e| e.to_string())?;
    let drift = Drift::from_name("reaction", modes, amplitude, budget.beta).map_err(|e| e.to_string())?;
    let steps = (1.0 / dt).round() as usize;
    let config = SimConfig {
        model,
        drift,
        x0: vec![0.0; modes],
        dt: 1.0 / steps as f64,
        horizon: 1.0,
        noise: NoiseMode::Skeleton { epsilon: None, base_cells: steps },
        seed,
    };
    let skeleton = config.skeleton(0).map_err(|e| e.to_string())?;
    let path = simulate_with_skeleton(&config, &skeleton).map_err(|e| e.to_string())?;
    let by_mode = (0..modes).map(|k| path.states.iter().map(|x| x[k]).collect()).collect();
    Ok(PathView {
        times: path.times,
        modes: by_mode,
        big_jumps: path.event_log.len(),
        drift_exponent: budget.beta,
        admissible: (budget.beta_interval.lower, budget.beta_interval.upper),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct LambdaView {
    pub times: Vec<f64>,
    pub lambda_t: Vec<f64>,
    pub envelope: Vec<f64>,
    pub r_range: (f64, f64),
    pub gamma_exponent: f64,
    pub beta_range: (f64, f64),
}

/// `Λ_t` of the reaction–diffusion model on log-spaced times, with its envelope.
pub fn lambda_view(p: u32, alpha: f64, r: f64) -> Result<LambdaView, String> {
    let (model, budget) = reaction_diffusion_preset(p, alpha, r, 1).map_err(|e| e.to_string())?;
    let envelope = lambda_t_envelope(r, alpha).map_err(|e| e.to_string())?;
    let times: Vec<f64> = (0..=120).map(|i| 10f64.powf(-4.0 + 6.0 * i as f64 / 120.0)).collect();
    let lambda_t = times.iter().map(|t| model.lambda_t(*t).map(|v| v.value)).collect::<Result<Vec<_>, _>>().map_err(|e| e.to_string())?;
    Ok(LambdaView {
        envelope: times.iter().map(|t| envelope(*t)).collect(),
        times,
        lambda_t,
        r_range: reaction_diffusion_r_interval(p as f64, alpha),
        gamma_exponent: budget.gamma,
        beta_range: (budget.beta_interval.lower, budget.beta_interval.upper),
    })
}

fn to_js<T: Serialize>(v: Result<T, String>) -> Result<String, JsValue> {
    let v = v.map_err(|e| JsValue::from_str(&e))?;
    serde_json::to_string(&v).map_err(|e| JsValue::from_str(&e.to_string()))
}

#[wasm_bindgen(js_name = densityView)]
pub fn density_view_js(alpha: f64, draws: usize, seed: u32) -> Result<String, JsValue> {
    to_js(density_view(alpha, draws, seed as u64))
}

#[wasm_bindgen(js_name = pathView)]
pub fn path_view_js(alpha: f64, r: f64, modes: usize, amplitude: f64, dt: f64, seed: u32) -> Result<String, JsValue> {
    to_js(path_view(alpha, r, modes, amplitude, dt, seed as u64))
}

#[wasm_bindgen(js_name = lambdaView)]
pub fn lambda_view_js(p: u32, alpha: f64, r: f64) -> Result<String, JsValue> {
    to_js(lambda_view(p, alpha, r))
}

/// Admissible `r` range of the reaction–diffusion preset, for the page's slider.
#[wasm_bindgen(js_name = rRange)]
pub fn r_range_js(p: u32, alpha: f64) -> Vec<f64> {
    let (lo, hi) = reaction_diffusion_r_interval(p as f64, alpha);
    vec![lo, hi]
}
