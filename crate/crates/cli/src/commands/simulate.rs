//! `simulate`: one path of the truncated SPDE, its jump log, and optional
//! Itô or Zvonkin residual series.

use std::path::PathBuf;

use clap::Args;
use serde::{Deserialize, Serialize};

use levy_spde::grid::GridFunction;
use levy_spde::simulator::{ito_residual, simulate_path, simulate_with_skeleton, zvonkin_identity_residual, NoiseMode, PathSample, SimConfig};

use super::kolmogorov::{DriftSpec, SolverSpec};
use super::{clap_defaults, point, Subcmd, TableSpec};
use crate::records::Records;
use crate::registry::{test_function, ModelSpec, Preset};
use crate::{row, CliError, Context, Outcome};

/// Path and noise options shared with `experiment`.
#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PathSpec {
    /// Initial state; a single value is broadcast to every mode.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true, default_values_t = [0.3])]
    pub x0: Vec<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub horizon: f64,
    /// Noise: `skeleton` (shared jump skeleton), `exact` (exact OU increments) or `zero`.
    #[arg(long, default_value = "skeleton")]
    pub noise: String,
    /// Big-jump threshold; default from the expected-jump budget.
    #[arg(long)]
    pub epsilon: Option<f64>,
}

impl Default for PathSpec {
    fn default() -> Self {
        clap_defaults()
    }
}

impl PathSpec {
    pub fn config(&self, preset: &Preset, drift: levy_spde::functions::Drift, dt: f64, base_cells: usize, seed: u64) -> Result<SimConfig, CliError> {
        let noise = match self.noise.as_str() {
            "skeleton" => NoiseMode::Skeleton { epsilon: self.epsilon, base_cells },
            "exact" => NoiseMode::ExactIncrement,
            "zero" => NoiseMode::Zero,
            other => return Err(CliError::Usage(format!("unknown noise '{other}'; available: skeleton, exact, zero"))),
        };
        Ok(SimConfig {
            model: preset.model.clone(),
            x0: point(&self.x0, preset.model.truncation(), "x0")?,
            drift,
            dt,
            horizon: self.horizon,
            noise,
            seed,
        })
    }
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Params {
    #[command(flatten)]
    pub model: ModelSpec,
    #[command(flatten)]
    pub drift: DriftSpec,
    #[command(flatten)]
    pub path: PathSpec,
    #[arg(long, default_value_t = 0.01)]
    pub dt: f64,
    /// Coarsest skeleton cell count; default one cell per step.
    #[arg(long = "base-cells")]
    pub base_cells: Option<usize>,
    /// Skeleton replicate index.
    #[arg(long, default_value_t = 0)]
    pub replicate: u64,
    /// Residual series: `none`, `ito` or `zvonkin`.
    #[arg(long, default_value = "none")]
    pub residual: String,
    /// Weights of the cosine test function of the Itô residual; default `e_1`.
    #[arg(long, value_delimiter = ',')]
    pub weights: Option<Vec<f64>>,
    /// Precomputed `U` (GridFunction dump) for the Zvonkin residual;
    /// solved inline when absent.
    #[arg(long = "u-grid")]
    pub u_grid: Option<PathBuf>,
    #[command(flatten)]
    pub solver: SolverSpec,
    #[command(flatten)]
    pub table: TableSpec,
    /// Write `plot.csv` with time against the first mode.
    #[arg(long = "emit-plot-data")]
    pub emit_plot_data: bool,
}

impl Default for Params {
    fn default() -> Self {
        clap_defaults()
    }
}

pub fn path_records(path: &PathSample) -> (Records, Records) {
    let n = path.states[0].len();
    let names: Vec<String> = std::iter::once("t".to_string()).chain((1..=n).map(|k| format!("x_{k}"))).collect();
    let cols: Vec<&str> = names.iter().map(String::as_str).collect();
    let mut states = Records::new("path", &cols);
    for (t, x) in path.times.iter().zip(&path.states) {
        let mut r = row![*t];
        r.extend(x.iter().map(crate::records::Cell::cell));
        states.push(r);
    }
    let mut events = Records::new("events", &["step", "mode", "time", "size"]);
    for e in &path.event_log {
        events.push(row![e.step, e.mode, e.time, e.size]);
    }
    (states, events)
}

impl Subcmd for Params {
    const NAME: &'static str = "simulate";

    fn resolve(&mut self) -> Result<(), CliError> {
        self.model.resolve("rd");
        Ok(())
    }

    fn execute(&self, ctx: &mut Context) -> Result<Outcome, CliError> {
        let preset = self.model.build()?;
        let n = preset.model.truncation();
        let budget = self.drift.budget(&preset)?;
        let b = self.drift.build(n, &budget)?;
        let steps = (self.path.horizon / self.dt).round() as usize;
        let config = self.path.config(&preset, b.clone(), self.dt, self.base_cells.unwrap_or(steps.max(1)), ctx.seed)?;
        let path = match config.noise {
            NoiseMode::Skeleton { .. } => simulate_with_skeleton(&config, &config.skeleton(self.replicate)?)?,
            _ => simulate_path(&config)?,
        };
        let mut out = Outcome::new();
        if !budget.beta_interval.contains(b.exponent()) {
            out.note(format!("drift exponent {} is outside the admissible interval; residuals use the preset budget", b.exponent()));
        }
        let (states, events) = path_records(&path);
        ctx.write_records("path.csv", &states)?;
        ctx.write_records("events.csv", &events)?;
        out.note(format!(
            "{} steps, {} big jumps, epsilon {:?}, terminal {:?}",
            path.times.len() - 1,
            path.event_log.len(),
            path.epsilon,
            path.terminal()
        ));

        match self.residual.as_str() {
            "none" => {}
            "ito" => {
                let f = test_function("cos-linear", n, 0.5, self.weights.as_deref(), 0.0)?;
                let s = ito_residual(&path, &f, &config)?;
                let mut rec = Records::new("ito", &["t", "change", "integral", "martingale", "residual", "pathwise"]);
                let (res, pw) = (s.residual(), s.pathwise());
                for i in 0..s.times.len() {
                    rec.push(row![s.times[i], s.change[i], s.integral[i], s.martingale[i], res[i], pw[i]]);
                }
                ctx.write_records("residual.csv", &rec)?;
                out.note(format!("Itô terminal residual {:.4e}, pathwise {:.4e}", s.terminal_residual(), s.terminal_pathwise()));
            }
            "zvonkin" => {
                let u = match &self.u_grid {
                    Some(p) => GridFunction::read_from(std::io::BufReader::new(std::fs::File::open(p)?))?,
                    None => {
                        let table = ctx.table(preset.model.alpha(), self.table.grid()?)?;
                        self.solver.solve_for_drift(&preset.model, &table, &budget, &b, ctx.key().named("picard"))?.iterate
                    }
                };
                let z = zvonkin_identity_residual(&path, &u, &config, self.solver.lambda)?;
                let mut rec = Records::new("zvonkin", &["t", "norm"]);
                for (t, v) in z.times.iter().zip(&z.norms) {
                    rec.push(row![*t, *v]);
                }
                ctx.write_records("residual.csv", &rec)?;
                let left = z.exited.is_none();
                out.check("path stayed on the U grid", left, format!("exit step {:?}", z.exited));
                out.note(format!("Zvonkin terminal residual {:.4e}, sup {:.4e}", z.terminal_norm(), z.sup_norm()));
            }
            other => return Err(CliError::Usage(format!("unknown residual '{other}'; available: none, ito, zvonkin"))),
        }
        if self.emit_plot_data {
            let mut rec = Records::new("path-plot", &["t", "x_1"]);
            for (t, x) in path.times.iter().zip(&path.states) {
                rec.push(row![*t, x[0]]);
            }
            ctx.write_records("plot.csv", &rec)?;
        }
        Ok(out)
    }
}
