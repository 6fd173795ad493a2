//! `kolmogorov`: Picard solve of `λU - ⟨B, DU⟩ - 𝓛U = F` on a grid, with
//! residual probes and the empirical norm estimates.

use clap::Args;
use serde::{Deserialize, Serialize};

use levy_spde::functions::{Drift, Field};
use levy_spde::grid::{Axis, GridFunction};
use levy_spde::kolmogorov::{residual, solve_picard, verify_estimates, PicardConfig, PicardState, TimeQuadrature};
use levy_spde::rng::StreamKey;
use levy_spde::spectral::{RegularityBudget, SpectralModel};
use levy_spde::stable::DensityTable;

use super::{clap_defaults, Subcmd, TableSpec};
use crate::records::Records;
use crate::registry::{drift, test_function, ModelSpec, Preset};
use crate::{row, CliError, Context, Outcome};

/// Share of double-increment triples that must satisfy the bound.
const HOLDING_FRACTION: f64 = 0.99;

/// Drift selection shared by the solver and the simulator.
#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DriftSpec {
    /// Drift from the registry.
    #[arg(long, default_value = "holder-cusp")]
    pub drift: String,
    #[arg(long = "drift-amplitude", default_value_t = 0.3)]
    pub drift_amplitude: f64,
    /// Hölder exponent of the drift; default is the middle of the admissible interval.
    #[arg(long)]
    pub beta: Option<f64>,
}

impl Default for DriftSpec {
    fn default() -> Self {
        clap_defaults()
    }
}

impl DriftSpec {
    /// Budget for the chosen exponent, or the preset's midpoint budget. An
    /// exponent outside the admissible interval keeps the preset budget so
    /// callers can report it as a failed check.
    pub fn budget(&self, preset: &Preset) -> Result<RegularityBudget, CliError> {
        match self.beta {
            None => Ok(preset.budget),
            Some(b) if !preset.budget.beta_interval.contains(b) => Ok(preset.budget),
            Some(b) => RegularityBudget::with_beta(preset.budget.gamma, preset.model.alpha(), b)
                .ok_or_else(|| CliError::Usage(format!("beta {b} leaves no room for theta at gamma {}", preset.budget.gamma))),
        }
    }

    pub fn build(&self, dim: usize, budget: &RegularityBudget) -> Result<Drift, CliError> {
        drift(&self.drift, dim, self.drift_amplitude, self.beta.unwrap_or(budget.beta))
    }
}

/// Grid and Picard controls.
#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverSpec {
    #[arg(long, default_value_t = 16.0)]
    pub lambda: f64,
    /// Grid extent `[-w, w]` per mode.
    #[arg(long = "half-width", default_value_t = 10.0)]
    pub half_width: f64,
    /// Grid points per mode.
    #[arg(long = "grid-points", default_value_t = 161)]
    pub grid_points: usize,
    /// Stratified stable draws per time node of the resolvent.
    #[arg(long = "resolvent-samples", default_value_t = 512)]
    pub resolvent_samples: usize,
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    #[arg(long = "max-iter", default_value_t = 30)]
    pub max_iter: usize,
}

impl Default for SolverSpec {
    fn default() -> Self {
        clap_defaults()
    }
}

impl SolverSpec {
    pub fn axes(&self, dim: usize) -> Result<Vec<Axis>, CliError> {
        (0..dim).map(|_| Ok(Axis::symmetric(self.half_width, self.grid_points)?)).collect()
    }

    pub fn config(&self, budget: &RegularityBudget, drift_norm: f64) -> PicardConfig {
        PicardConfig {
            lambda: self.lambda,
            gamma: budget.gamma,
            theta: budget.theta,
            beta: budget.beta,
            drift_norm,
            tol: self.tol,
            max_iter: self.max_iter,
            quadrature: TimeQuadrature::default(),
            samples: self.resolvent_samples,
        }
    }

    /// Zvonkin solve `F = B`.
    pub fn solve_for_drift(
        &self,
        model: &SpectralModel,
        table: &DensityTable,
        budget: &RegularityBudget,
        b: &Drift,
        key: StreamKey,
    ) -> Result<PicardState, CliError> {
        let grid = GridFunction::from_field(self.axes(model.truncation())?, b)?;
        Ok(solve_picard(&grid, &grid, model, table, self.config(budget, b.holder_norm()), key)?)
    }
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Params {
    #[command(flatten)]
    pub model: ModelSpec,
    #[command(flatten)]
    pub table: TableSpec,
    #[command(flatten)]
    pub drift: DriftSpec,
    #[command(flatten)]
    pub solver: SolverSpec,
    /// Right-hand side: `drift` (the Zvonkin choice `F = B`) or a test function name.
    #[arg(long, default_value = "drift")]
    pub source: String,
    /// Hölder exponent of a `holder-power` source.
    #[arg(long = "source-exponent", default_value_t = 0.5)]
    pub source_exponent: f64,
    /// Residual probes along the diagonal of the grid interior.
    #[arg(long, default_value_t = 21)]
    pub probes: usize,
    /// Random triples for the double-increment check.
    #[arg(long, default_value_t = 10_000)]
    pub triples: usize,
    /// Write `plot.csv` with `U` along the first axis.
    #[arg(long = "emit-plot-data")]
    pub emit_plot_data: bool,
}

impl Default for Params {
    fn default() -> Self {
        clap_defaults()
    }
}

impl Subcmd for Params {
    const NAME: &'static str = "kolmogorov";

    fn resolve(&mut self) -> Result<(), CliError> {
        self.model.resolve("rd");
        Ok(())
    }

    fn execute(&self, ctx: &mut Context) -> Result<Outcome, CliError> {
        let preset = self.model.build()?;
        let model = &preset.model;
        let n = model.truncation();
        let budget = self.drift.budget(&preset)?;
        let b = self.drift.build(n, &budget)?;
        let iv = budget.beta_interval;
        if !iv.contains(b.exponent()) {
            let mut out = Outcome::new();
            out.check("admissible drift exponent", false, format!("beta {} outside ({}, {})", b.exponent(), iv.lower, iv.upper));
            return Ok(out);
        }
        let axes = self.solver.axes(n)?;
        let b_grid = GridFunction::from_field(axes.clone(), &b)?;
        let source: Box<dyn Field> = if self.source == "drift" {
            Box::new(b.clone())
        } else {
            Box::new(test_function(&self.source, n, self.source_exponent, None, 0.0)?)
        };
        let f_grid = GridFunction::from_field(axes.clone(), source.as_ref())?;
        let table = ctx.table(model.alpha(), self.table.grid()?)?;
        let key = ctx.key();
        let cfg = self.solver.config(&budget, b.holder_norm());
        let state = solve_picard(&f_grid, &b_grid, model, &table, cfg, key.named("picard"))?;
        let mut out = Outcome::new();

        let mut picard = Records::new("picard", &["iteration", "successive_norm", "ratio"]);
        for (i, d) in state.successive_norms.iter().enumerate() {
            let ratio = if i > 0 && state.successive_norms[i - 1] > 0.0 { d / state.successive_norms[i - 1] } else { f64::NAN };
            picard.push(row![i + 1, *d, ratio]);
        }
        ctx.write_records("picard.csv", &picard)?;
        ctx.write("u.grid", &state.iterate.to_text())?;

        // probes along the diagonal, one unit inside the extent
        let inner = (self.solver.half_width - 1.0).max(0.0);
        let probes: Vec<Vec<f64>> = (0..self.probes)
            .map(|i| {
                let s = if self.probes > 1 { -inner + 2.0 * inner * i as f64 / (self.probes - 1) as f64 } else { 0.0 };
                vec![s; n]
            })
            .collect();
        let res = residual(&state.iterate, source.as_ref(), &b, model, self.solver.lambda, &probes)?;
        let mut rrec = Records::new("residual", &["probe", "coordinate", "norm", "flagged"]);
        for (i, p) in res.probes.iter().enumerate() {
            rrec.push(row![i, p.x[0], p.norm, p.flagged]);
        }
        ctx.write_records("residuals.csv", &rrec)?;

        let est = verify_estimates(&state, &f_grid, self.triples, key.named("estimates"));
        let fitted = state.fitted_ratio();
        let decays = fitted.is_some_and(|r| r < 1.0);
        let mut summary = Records::new("kolmogorov", &["quantity", "estimate", "stderr", "bound", "oracle", "pass"]);
        summary.push(row!["contraction_bound", state.contraction_bound, f64::NAN, 1.0f64, f64::NAN, state.contraction_bound < 1.0]);
        summary.push(row!["c_lambda", state.c_lambda, f64::NAN, f64::NAN, f64::NAN, true]);
        summary.push(row!["c_lambda_full", state.c_lambda_full, f64::NAN, f64::NAN, f64::NAN, true]);
        summary.push(row!["iterations", state.iteration, f64::NAN, self.solver.max_iter, f64::NAN, state.converged]);
        summary.push(row!["fitted_ratio", fitted, f64::NAN, 1.0f64, f64::NAN, decays]);
        summary.push(row!["u_norm", est.u_norm.total(), f64::NAN, f64::NAN, f64::NAN, true]);
        summary.push(row!["f_norm", est.f_norm.total(), f64::NAN, f64::NAN, f64::NAN, true]);
        summary.push(row!["norm_ratio", est.ratio, f64::NAN, est.c_lambda, f64::NAN, est.estimate_holds]);
        summary.push(row!["double_increment_holding", est.holding_fraction, f64::NAN, HOLDING_FRACTION, f64::NAN, est.holding_fraction >= HOLDING_FRACTION]);
        summary.push(row!["residual_max", res.max, f64::NAN, f64::NAN, f64::NAN, true]);
        summary.push(row!["residual_mean", res.mean, f64::NAN, f64::NAN, f64::NAN, true]);
        ctx.write_records("summary.csv", &summary)?;

        out.check("Picard converged", state.converged, format!("{} iterations, last step {:?}", state.iteration, state.successive_norms.last()));
        out.check("geometric decay", decays, format!("fitted ratio {fitted:?}, contraction bound {:.3}", state.contraction_bound));
        out.check(
            "double increment",
            est.holding_fraction >= HOLDING_FRACTION,
            format!("{:.4} of {} triples", est.holding_fraction, est.triples),
        );
        out.note(format!(
            "||U|| / ||F|| = {:.4} (C_lambda {:.4}); residual max {:.2e}, mean {:.2e}, {} probes excluded",
            est.ratio, est.c_lambda, res.max, res.mean, res.excluded
        ));

        if self.emit_plot_data {
            let mut rec = Records::new("u-plot", &["x", "u"]);
            for node in 0..state.iterate.len() {
                let c = state.iterate.node_coords(node);
                if c[1..].iter().all(|v| *v == 0.0) || n == 1 {
                    rec.push(row![c[0], state.iterate.node_value(node)[0]]);
                }
            }
            ctx.write_records("plot.csv", &rec)?;
        }
        Ok(out)
    }
}
