//! `sample`: sampler fidelity against the characteristic function and the
//! density table, plus the table file itself.

use clap::Args;
use serde::{Deserialize, Serialize};

use levy_spde::rng::MeanAccumulator;
use levy_spde::stable::{sample_standard, DensityTable, StableLaw};
use levy_spde::stats::kolmogorov_survival;

use super::{clap_defaults, Subcmd, TableSpec};
use crate::records::Records;
use crate::{row, CliError, Context, Outcome};

/// Significance level of the sampler-vs-table KS test.
const KS_LEVEL: f64 = 1e-3;
/// Tolerance on the Fisher information `1/2` of the Cauchy law.
const CAUCHY_TOL: f64 = 1e-4;
/// Tolerance on the unit mass of the table.
const MASS_TOL: f64 = 1e-6;

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Params {
    #[arg(long, default_value_t = 1.8)]
    pub alpha: f64,
    #[command(flatten)]
    pub table: TableSpec,
    #[arg(long, default_value_t = 100_000)]
    pub draws: usize,
    /// Frequencies for the empirical characteristic function.
    #[arg(long, value_delimiter = ',', default_values_t = [0.5, 1.0, 2.0])]
    pub frequencies: Vec<f64>,
    /// Write the raw draws to `draws.csv`.
    #[arg(long = "write-draws")]
    pub write_draws: bool,
    /// Also build the Cauchy validation table and check `c_1 = 1/2`.
    #[arg(long = "cauchy-validation")]
    pub cauchy_validation: bool,
    /// Write `plot.csv` with the density and a histogram of the draws.
    #[arg(long = "emit-plot-data")]
    pub emit_plot_data: bool,
}

impl Default for Params {
    fn default() -> Self {
        clap_defaults()
    }
}

/// One-sample KS statistic and asymptotic p-value of sorted draws against `cdf`.
pub fn ks_one_sample(sorted: &[f64], cdf: impl Fn(f64) -> f64) -> (f64, f64) {
    let n = sorted.len() as f64;
    let d = sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            ((i + 1) as f64 / n - f).max(f - i as f64 / n)
        })
        .fold(0.0, f64::max);
    (d, kolmogorov_survival(n.sqrt() * d))
}

impl Subcmd for Params {
    const NAME: &'static str = "sample";

    fn execute(&self, ctx: &mut Context) -> Result<Outcome, CliError> {
        let law = StableLaw::standard(self.alpha)?;
        let draws = sample_standard(&law, self.draws, ctx.key().named("draws"))?;
        let mut out = Outcome::new();

        let mut ecf = Records::new("ecf", &["u", "estimate", "stderr", "bound", "oracle", "pass"]);
        for &u in &self.frequencies {
            let mut acc = MeanAccumulator::new();
            for &s in &draws {
                acc.push((u * s).cos());
            }
            let oracle = law.characteristic_function(u);
            // 4σ band around the closed form
            let bound = 4.0 * acc.std_error();
            let pass = (acc.mean() - oracle).abs() <= bound;
            ecf.push(row![u, acc.mean(), acc.std_error(), bound, oracle, pass]);
            out.check(&format!("ECF at u = {u}"), pass, format!("{:.5} vs {:.5} (±{:.1e})", acc.mean(), oracle, bound));
        }
        ctx.write_records("ecf.csv", &ecf)?;

        let table = ctx.table(self.alpha, self.table.grid()?)?;
        let mut sorted = draws.clone();
        sorted.sort_by(|a, b| a.total_cmp(b));
        let (d, p) = ks_one_sample(&sorted, |z| table.cdf(z));
        let mass = table.mass();
        let mut diag = Records::new("table-check", &["quantity", "estimate", "stderr", "bound", "oracle", "pass"]);
        diag.push(row!["table_mass", mass, f64::NAN, MASS_TOL, 1.0f64, (mass - 1.0).abs() <= MASS_TOL]);
        diag.push(row!["ks_statistic", d, f64::NAN, f64::NAN, f64::NAN, p >= KS_LEVEL]);
        diag.push(row!["ks_p_value", p, f64::NAN, KS_LEVEL, f64::NAN, p >= KS_LEVEL]);
        out.check("table mass", (mass - 1.0).abs() <= MASS_TOL, format!("{mass:.9}"));
        out.check("sampler vs table KS", p >= KS_LEVEL, format!("D = {d:.5}, p = {p:.4}"));
        if self.cauchy_validation {
            let cauchy = DensityTable::cauchy_validation(self.table.grid()?)?;
            let c1 = cauchy.c_alpha()?;
            let pass = (c1 - 0.5).abs() <= CAUCHY_TOL;
            diag.push(row!["cauchy_c_alpha", c1, f64::NAN, CAUCHY_TOL, 0.5f64, pass]);
            out.check("Cauchy c_1", pass, format!("{c1:.7}"));
        }
        ctx.write_records("table_check.csv", &diag)?;
        ctx.write(&DensityTable::cache_key(self.alpha, table.spec()), &table.to_text())?;

        if self.write_draws {
            let mut rec = Records::new("draws", &["index", "value"]);
            for (i, v) in draws.iter().enumerate() {
                rec.push(row![i, *v]);
            }
            ctx.write_records("draws.csv", &rec)?;
        }
        if self.emit_plot_data {
            let (lo, hi, bins) = (-10.0f64, 10.0f64, 200usize);
            let width = (hi - lo) / bins as f64;
            let mut counts = vec![0usize; bins];
            for &v in &draws {
                if v >= lo && v < hi {
                    counts[((v - lo) / width) as usize] += 1;
                }
            }
            let mut rec = Records::new("density-plot", &["z", "density", "histogram"]);
            for (i, c) in counts.iter().enumerate() {
                let z = lo + (i as f64 + 0.5) * width;
                rec.push(row![z, table.density(z), *c as f64 / (draws.len() as f64 * width)]);
            }
            ctx.write_records("plot.csv", &rec)?;
        }
        Ok(out)
    }
}
