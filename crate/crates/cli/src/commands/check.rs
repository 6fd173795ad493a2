//! `check`: hypothesis report, regularity arithmetic and score constants.

use clap::Args;
use serde::{Deserialize, Serialize};

use levy_spde::spectral::{lambda_t_envelope, SeriesStatus, SeriesValue};

use super::{clap_defaults, Subcmd, TableSpec};
use crate::records::Records;
use crate::registry::ModelSpec;
use crate::{row, CliError, Context, Outcome};

/// Agreement required between computed exponents and their closed forms.
const ARITHMETIC_TOL: f64 = 1e-10;

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Params {
    #[command(flatten)]
    pub model: ModelSpec,
    #[command(flatten)]
    pub table: TableSpec,
    /// Horizon of the Gronwall sum `Σ (1 - e^{-2Tγ_m}) / (2γ_m)`.
    #[arg(long, default_value_t = 1.0)]
    pub horizon: f64,
    /// Times at which `Λ_t` is compared with its envelope.
    #[arg(long = "lambda-times", value_delimiter = ',', default_values_t = [0.01, 0.1, 1.0])]
    pub lambda_times: Vec<f64>,
}

impl Default for Params {
    fn default() -> Self {
        clap_defaults()
    }
}

fn series_row(records: &mut Records, name: &str, s: &SeriesValue) -> bool {
    let pass = s.is_convergent();
    let estimate = s.estimate().unwrap_or(s.partial);
    records.push(row![name, estimate, f64::NAN, s.remainder.1 - s.remainder.0, f64::NAN, pass]);
    pass
}

impl Subcmd for Params {
    const NAME: &'static str = "check";

    fn resolve(&mut self) -> Result<(), CliError> {
        self.model.resolve("rd");
        Ok(())
    }

    fn execute(&self, ctx: &mut Context) -> Result<Outcome, CliError> {
        let preset = self.model.build()?;
        let model = &preset.model;
        let alpha = model.alpha();
        let report = model.check_conditions();
        let mut out = Outcome::new();
        // bound = width of the certified remainder bracket, where there is one
        let mut rec = Records::new("check", &["quantity", "estimate", "stderr", "bound", "oracle", "pass"]);

        let unbounded = report.gamma_unbounded == SeriesStatus::Convergent;
        rec.push(row!["gamma_unbounded", f64::NAN, f64::NAN, f64::NAN, f64::NAN, unbounded]);
        let s1 = series_row(&mut rec, "sum_beta_alpha", &report.sum_beta_alpha);
        let s2 = series_row(&mut rec, "sum_inv_gamma", &report.sum_inv_gamma);
        out.check("eigenvalues unbounded", unbounded, format!("{:?}", report.gamma_unbounded));
        out.check("sum beta^alpha", s1, format!("{:?}", report.sum_beta_alpha.estimate()));
        out.check("sum 1/gamma", s2, format!("{:?}", report.sum_inv_gamma.estimate()));

        let gamma = report.gamma_exponent;
        let gamma_ok = gamma.is_some() && report.gamma_certified;
        let gamma_match = match (gamma, preset.gamma_formula) {
            (Some(g), Some(f)) => (g - f).abs() <= ARITHMETIC_TOL,
            _ => false,
        };
        rec.push(row!["gamma_exponent", gamma, f64::NAN, ARITHMETIC_TOL, preset.gamma_formula, gamma_ok && gamma_match]);
        out.check(
            "regularity exponent",
            gamma_ok && gamma_match,
            format!("gamma = {gamma:?}, closed form {:?}, certified {}", preset.gamma_formula, report.gamma_certified),
        );

        for probe in &report.lambda_probe {
            let v = probe.integral.value();
            rec.push(row![format!("c_lambda(lambda={},q={})", probe.lambda, probe.q), v, f64::NAN, f64::NAN, f64::NAN, v.is_some()]);
            out.check(&format!("C_lambda at lambda {} (q = {})", probe.lambda, probe.q), v.is_some(), format!("{v:?}"));
        }

        // β interval (1 + α/2 - γ, 1) and the budget chosen inside it
        let budget = preset.budget;
        let beta_lower_oracle = preset.gamma_formula.map(|g| 1.0 + alpha / 2.0 - g);
        let lower_ok = beta_lower_oracle.is_some_and(|o| (budget.beta_interval.lower - o).abs() <= ARITHMETIC_TOL);
        rec.push(row!["beta_lower", budget.beta_interval.lower, f64::NAN, ARITHMETIC_TOL, beta_lower_oracle, lower_ok]);
        rec.push(row!["beta_upper", budget.beta_interval.upper, f64::NAN, f64::NAN, 1.0f64, budget.beta_interval.upper == 1.0]);
        rec.push(row!["beta", budget.beta, f64::NAN, f64::NAN, f64::NAN, budget.beta_interval.contains(budget.beta)]);
        rec.push(row!["theta", budget.theta, f64::NAN, f64::NAN, f64::NAN, budget.theta < budget.beta]);
        rec.push(row!["picard_norm_index", budget.picard_norm_index, f64::NAN, f64::NAN, f64::NAN, budget.supports_uniqueness(alpha)]);
        out.check(
            "beta interval",
            lower_ok,
            format!("({:.4}, {:.4}), beta = {:.4}, theta = {:.4}", budget.beta_interval.lower, budget.beta_interval.upper, budget.beta, budget.theta),
        );

        if self.model.preset_name() == "rd" {
            let r = self.model.r.unwrap_or(f64::NAN);
            let p = self.model.p as f64;
            let (lo, hi) = (1.0 / (2.0 * p * alpha), (alpha - 1.0) / alpha);
            rec.push(row!["r_lower", lo, f64::NAN, f64::NAN, lo, r > lo]);
            rec.push(row!["r_upper", hi, f64::NAN, f64::NAN, hi, r < hi]);
            let env = lambda_t_envelope(r, alpha)?;
            let mut dominated = true;
            for &t in &self.lambda_times {
                let lt = model.lambda_t(t)?;
                let e = env(t);
                let ok = lt.value <= e * (1.0 + 1e-12);
                dominated &= ok;
                rec.push(row![format!("lambda_t(t={t})"), lt.value, f64::NAN, e, f64::NAN, ok]);
            }
            out.check("Lambda_t under envelope", dominated, format!("{} times", self.lambda_times.len()));
        } else {
            for &t in &self.lambda_times {
                let lt = model.lambda_t(t)?;
                rec.push(row![format!("lambda_t(t={t})"), lt.value, f64::NAN, f64::NAN, f64::NAN, true]);
            }
        }

        let table = ctx.table(alpha, self.table.grid()?)?;
        let c_alpha = table.c_alpha()?;
        let i2 = table.curvature_information()?;
        let c_tilde = table.c_tilde_alpha()?;
        let mass = table.mass();
        rec.push(row!["table_mass", mass, f64::NAN, 1e-6f64, 1.0f64, (mass - 1.0).abs() <= 1e-6]);
        rec.push(row!["c_alpha", c_alpha, f64::NAN, f64::NAN, f64::NAN, c_alpha.is_finite()]);
        rec.push(row!["curvature_information", i2, f64::NAN, f64::NAN, f64::NAN, i2.is_finite()]);
        rec.push(row!["c_tilde_alpha", c_tilde, f64::NAN, f64::NAN, f64::NAN, c_tilde.is_finite()]);
        out.note(format!("c_alpha = {c_alpha:.6}, I2 = {i2:.6}, c_tilde_alpha = {c_tilde:.6}, table mass {mass:.9}"));

        let gw = model.gronwall_sum(self.horizon);
        series_row(&mut rec, "gronwall_sum", &gw);
        out.note(format!("Gronwall sum at T = {}: {:?}", self.horizon, gw.estimate()));

        ctx.write_records("check.csv", &rec)?;
        Ok(out)
    }
}
