//! Named presets, drifts and test functions.

use clap::Args;
use serde::{Deserialize, Serialize};

use levy_spde::functions::{Drift, TestFunction, DRIFT_NAMES, TEST_FUNCTION_NAMES};
use levy_spde::spectral::{reaction_diffusion_preset, reaction_diffusion_r_interval, RegularityBudget, SpectralModel};

use crate::CliError;

pub const PRESET_NAMES: [&str; 2] = ["rd", "single"];

/// Spectral model selection shared by every subcommand.
#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelSpec {
    /// Model preset: `rd` (γ_n = n^{2p}, β_n = γ_n^{-r}) or `single` (one
    /// mode). The default depends on the subcommand.
    #[arg(long)]
    pub preset: Option<String>,
    #[arg(long, default_value_t = 1.8)]
    pub alpha: f64,
    /// Power of the Laplacian in the `rd` family.
    #[arg(long, default_value_t = 1)]
    pub p: u32,
    /// Amplitude decay exponent of the `rd` family; default is the middle
    /// of the admissible range.
    #[arg(long)]
    pub r: Option<f64>,
    /// Galerkin truncation level.
    #[arg(long, default_value_t = 1)]
    pub modes: usize,
    /// Eigenvalue magnitude of the `single` preset.
    #[arg(long, default_value_t = 1.0)]
    pub gamma: f64,
    /// Noise amplitude of the `single` preset.
    #[arg(long = "noise-amplitude", default_value_t = 1.0)]
    pub noise_amplitude: f64,
}

impl Default for ModelSpec {
    fn default() -> Self {
        crate::commands::clap_defaults()
    }
}

/// A built model with its regularity bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct Preset {
    pub model: SpectralModel,
    pub budget: RegularityBudget,
    /// Closed-form regularity exponent, where the preset has one.
    pub gamma_formula: Option<f64>,
}

impl ModelSpec {
    /// Fill the preset and `r` so the recorded parameters are explicit.
    pub fn resolve(&mut self, default_preset: &str) {
        let preset = self.preset.get_or_insert_with(|| default_preset.to_string());
        if preset == "rd" && self.r.is_none() {
            let (lo, hi) = reaction_diffusion_r_interval(self.p as f64, self.alpha);
            self.r = Some(0.5 * (lo + hi));
        }
    }

    pub fn preset_name(&self) -> &str {
        self.preset.as_deref().unwrap_or("rd")
    }

    pub fn build(&self) -> Result<Preset, CliError> {
        match self.preset_name() {
            "rd" => {
                let r = self.r.ok_or_else(|| CliError::Usage("preset rd needs --r".into()))?;
                let (model, budget) = reaction_diffusion_preset(self.p, self.alpha, r, self.modes)?;
                let gamma_formula = Some(self.alpha / (self.alpha * r + 1.0));
                Ok(Preset { model, budget, gamma_formula })
            }
            "single" => {
                if self.modes != 1 {
                    return Err(CliError::Usage(format!("preset single has one mode, got --modes {}", self.modes)));
                }
                let model = SpectralModel::explicit(self.alpha, vec![self.gamma], vec![self.noise_amplitude])?;
                // Λ_t stays bounded, so the regularity exponent is α
                let budget = RegularityBudget::midpoint(self.alpha, self.alpha)
                    .ok_or_else(|| CliError::Usage(format!("no Hölder budget for alpha {}", self.alpha)))?;
                Ok(Preset { model, budget, gamma_formula: Some(self.alpha) })
            }
            other => Err(CliError::Usage(format!("unknown preset '{other}'; available: {}", PRESET_NAMES.join(", ")))),
        }
    }
}

pub fn drift(name: &str, dim: usize, amplitude: f64, exponent: f64) -> Result<Drift, CliError> {
    Drift::from_name(name, dim, amplitude, exponent).map_err(|e| CliError::Usage(e.to_string()))
}

/// Test function lookup; `weights` overrides the default `e_1` of `cos-linear`.
pub fn test_function(name: &str, dim: usize, exponent: f64, weights: Option<&[f64]>, phase: f64) -> Result<TestFunction, CliError> {
    match (name, weights) {
        ("cos-linear" | "cos", Some(w)) => {
            if w.len() != dim {
                return Err(CliError::Usage(format!("{} weights for {dim} modes", w.len())));
            }
            Ok(TestFunction::cos_linear(w.to_vec(), phase))
        }
        ("cos-linear" | "cos", None) => {
            let mut w = vec![0.0; dim];
            w[0] = 1.0;
            Ok(TestFunction::cos_linear(w, phase))
        }
        _ => TestFunction::from_name(name, dim, exponent).map_err(|e| CliError::Usage(e.to_string())),
    }
}

/// Names by registry kind, for usage messages.
pub fn names(kind: &str) -> Option<&'static [&'static str]> {
    match kind {
        "preset" => Some(&PRESET_NAMES),
        "drift" => Some(&DRIFT_NAMES),
        "testfn" => Some(&TEST_FUNCTION_NAMES),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rd_preset_carries_the_closed_form_exponent() {
        let p = ModelSpec { r: Some(0.35), ..ModelSpec::default() }.build().unwrap();
        assert!((p.budget.gamma - 1.8 / 1.63).abs() < 1e-12);
        assert_eq!(p.gamma_formula, Some(p.budget.gamma));
    }

    #[test]
    fn resolve_fills_the_middle_of_the_r_range() {
        let mut spec = ModelSpec::default();
        spec.resolve("rd");
        let r = spec.r.unwrap();
        assert!((r - 0.5 * (1.0 / 3.6 + 0.8 / 1.8)).abs() < 1e-15);
        assert!(spec.build().is_ok());
    }

    #[test]
    fn unknown_names_are_usage_errors() {
        let spec = ModelSpec { preset: Some("nope".into()), ..ModelSpec::default() };
        assert!(matches!(spec.build(), Err(CliError::Usage(m)) if m.contains("rd, single")));
        assert!(matches!(drift("nope", 1, 1.0, 0.5), Err(CliError::Usage(m)) if m.contains("holder-power")));
        assert!(matches!(test_function("nope", 1, 0.5, None, 0.0), Err(CliError::Usage(_))));
    }

    #[test]
    fn zero_drift_and_holder_power_metadata() {
        let z = drift("zero", 2, 1.0, 0.5).unwrap();
        assert!(z.is_zero());
        let f = test_function("holder-power", 1, 0.4, None, 0.0).unwrap();
        let meta = f.holder().unwrap();
        assert_eq!((meta.exponent, meta.norm), (0.4, 2.0));
    }
}
