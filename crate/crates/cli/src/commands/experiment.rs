//! `experiment`: replicated runs over a step-size ladder. `refinement`
//! compares every level with a finer reference on a shared skeleton, `ito`
//! and `zvonkin` track the terminal residuals.

use clap::Args;
use serde::{Deserialize, Serialize};

use levy_spde::rng::{map_ordered, MeanAccumulator};
use levy_spde::simulator::{
    ito_residual, shared_noise_refinement_experiment, simulate_with_skeleton, zvonkin_identity_residual, SimConfig, SimError,
};

use super::kolmogorov::{DriftSpec, SolverSpec};
use super::simulate::PathSpec;
use super::{clap_defaults, Subcmd, TableSpec};
use crate::records::Records;
use crate::registry::{test_function, ModelSpec};
use crate::{row, CliError, Context, Outcome};

/// Itô residual band in standard errors.
const ITO_SIGMAS: f64 = 3.0;

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Params {
    /// `refinement`, `ito` or `zvonkin`.
    #[arg(long, default_value = "refinement")]
    pub kind: String,
    #[command(flatten)]
    pub model: ModelSpec,
    #[command(flatten)]
    pub drift: DriftSpec,
    #[command(flatten)]
    pub path: PathSpec,
    /// Step sizes, coarse to fine; each must halve into the coarsest.
    #[arg(long, value_delimiter = ',', default_values_t = [0.1, 0.05, 0.025, 0.0125])]
    pub levels: Vec<f64>,
    /// Reference step of the refinement ladder; default an eighth of the finest level.
    #[arg(long = "reference-dt")]
    pub reference_dt: Option<f64>,
    #[arg(long, default_value_t = 200)]
    pub replicates: usize,
    /// Run even when the drift exponent is outside the admissible interval.
    #[arg(long = "allow-inadmissible")]
    pub allow_inadmissible: bool,
    /// Weights of the cosine test function of the Itô residual; default `e_1`.
    #[arg(long, value_delimiter = ',')]
    pub weights: Option<Vec<f64>>,
    #[command(flatten)]
    pub solver: SolverSpec,
    #[command(flatten)]
    pub table: TableSpec,
    /// Write `plot.csv` with the per-level summary statistic against `dt`.
    #[arg(long = "emit-plot-data")]
    pub emit_plot_data: bool,
}

impl Default for Params {
    fn default() -> Self {
        clap_defaults()
    }
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(|a, b| a.total_cmp(b));
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

fn strictly_decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] < w[0])
}

impl Subcmd for Params {
    const NAME: &'static str = "experiment";

    fn resolve(&mut self) -> Result<(), CliError> {
        self.model.resolve("rd");
        if self.reference_dt.is_none() && self.kind == "refinement" {
            self.reference_dt = self.levels.last().map(|d| d / 8.0);
        }
        Ok(())
    }

    fn execute(&self, ctx: &mut Context) -> Result<Outcome, CliError> {
        if self.levels.is_empty() || self.replicates == 0 {
            return Err(CliError::Usage("need at least one level and one replicate".into()));
        }
        let preset = self.model.build()?;
        let n = preset.model.truncation();
        let budget = self.drift.budget(&preset)?;
        let b = self.drift.build(n, &budget)?;
        let base_cells = (self.path.horizon / self.levels[0]).round().max(1.0) as usize;
        let config = self.path.config(&preset, b.clone(), self.levels[0], base_cells, ctx.seed)?;
        let mut out = Outcome::new();
        let iv = budget.beta_interval;
        let beta = b.exponent();
        let admissible = iv.contains(beta);
        out.note(format!("drift exponent {beta:.4}, admissible interval ({:.4}, {:.4}): {admissible}", iv.lower, iv.upper));

        let mut distances = Records::new("distances", &["replicate", "level", "dt", "value"]);
        let mut summary = Records::new("summary", &["level", "dt", "estimate", "stderr", "bound", "oracle", "pass"]);
        let mut plot = Records::new("ladder-plot", &["dt", "estimate"]);
        match self.kind.as_str() {
            "refinement" => {
                let reference = self.reference_dt.ok_or_else(|| CliError::Usage("refinement needs --reference-dt".into()))?;
                let gate = (!self.allow_inadmissible).then_some(budget.gamma);
                let report = match shared_noise_refinement_experiment(&config, &self.levels, reference, self.replicates, gate) {
                    Err(SimError::Inadmissible { beta, lower, upper }) => {
                        out.check("admissible drift exponent", false, format!("beta {beta} outside ({lower}, {upper})"));
                        return Ok(out);
                    }
                    other => other?,
                };
                for (r, per_level) in report.distances.iter().enumerate() {
                    for (l, d) in per_level.iter().enumerate() {
                        distances.push(row![r, l, report.dts[l], *d]);
                    }
                }
                for (l, m) in report.medians.iter().enumerate() {
                    let pass = l == 0 || *m < report.medians[l - 1];
                    summary.push(row![l, report.dts[l], *m, f64::NAN, f64::NAN, f64::NAN, pass]);
                    plot.push(row![report.dts[l], *m]);
                }
                out.check(
                    "median sup-distance strictly decreasing",
                    report.medians_strictly_decreasing,
                    format!("{:?}", report.medians),
                );
                out.note(format!(
                    "monotone fraction {:.3}, observed order {:.3}, Gronwall sum {:.4}",
                    report.monotone_fraction, report.observed_order, report.gronwall_sum
                ));
            }
            "ito" => {
                let f = test_function("cos-linear", n, 0.5, self.weights.as_deref(), 0.0)?;
                for (l, &dt) in self.levels.iter().enumerate() {
                    let cfg = SimConfig { dt, ..config.clone() };
                    let reps: Vec<u64> = (0..self.replicates as u64).collect();
                    let values = map_ordered(&reps, |&r| -> Result<f64, SimError> {
                        let p = simulate_with_skeleton(&cfg, &cfg.skeleton(r)?)?;
                        Ok(ito_residual(&p, &f, &cfg)?.terminal_residual())
                    })
                    .into_iter()
                    .collect::<Result<Vec<f64>, SimError>>()?;
                    let mut acc = MeanAccumulator::new();
                    for (r, v) in values.iter().enumerate() {
                        acc.push(*v);
                        distances.push(row![r, l, dt, *v]);
                    }
                    let bound = ITO_SIGMAS * acc.std_error();
                    let pass = acc.mean().abs() <= bound;
                    summary.push(row![l, dt, acc.mean(), acc.std_error(), bound, 0.0f64, pass]);
                    plot.push(row![dt, acc.mean()]);
                    out.check(&format!("Itô residual centred at dt = {dt}"), pass, format!("{:.4e} ± {:.2e}", acc.mean(), acc.std_error()));
                }
            }
            "zvonkin" if !admissible && !self.allow_inadmissible => {
                out.check("admissible drift exponent", false, format!("beta {beta} outside ({}, {})", iv.lower, iv.upper));
                return Ok(out);
            }
            "zvonkin" => {
                let table = ctx.table(preset.model.alpha(), self.table.grid()?)?;
                let state = self.solver.solve_for_drift(&preset.model, &table, &budget, &b, ctx.key().named("picard"))?;
                let u = &state.iterate;
                let mut medians = Vec::new();
                for (l, &dt) in self.levels.iter().enumerate() {
                    let cfg = SimConfig { dt, ..config.clone() };
                    let reps: Vec<u64> = (0..self.replicates as u64).collect();
                    let rows = map_ordered(&reps, |&r| -> Result<(f64, bool), SimError> {
                        let p = simulate_with_skeleton(&cfg, &cfg.skeleton(r)?)?;
                        let z = zvonkin_identity_residual(&p, u, &cfg, self.solver.lambda)?;
                        Ok((z.terminal_norm(), z.exited.is_some()))
                    })
                    .into_iter()
                    .collect::<Result<Vec<(f64, bool)>, SimError>>()?;
                    let exits = rows.iter().filter(|r| r.1).count();
                    let values: Vec<f64> = rows.iter().map(|r| r.0).collect();
                    for (r, v) in values.iter().enumerate() {
                        distances.push(row![r, l, dt, *v]);
                    }
                    let m = median(&values);
                    let pass = medians.last().is_none_or(|prev| m < *prev);
                    summary.push(row![l, dt, m, f64::NAN, f64::NAN, f64::NAN, pass]);
                    plot.push(row![dt, m]);
                    medians.push(m);
                    if exits > 0 {
                        out.note(format!("dt {dt}: {exits} replicates left the U grid"));
                    }
                }
                out.check("median Zvonkin residual strictly decreasing", strictly_decreasing(&medians), format!("{medians:?}"));
            }
            other => return Err(CliError::Usage(format!("unknown experiment '{other}'; available: refinement, ito, zvonkin"))),
        }
        ctx.write_records("distances.csv", &distances)?;
        ctx.write_records("summary.csv", &summary)?;
        if self.emit_plot_data {
            ctx.write_records("plot.csv", &plot)?;
        }
        Ok(out)
    }
}
