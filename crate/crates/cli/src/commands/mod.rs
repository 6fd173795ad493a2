//! Subcommand definitions and dispatch.

pub mod check;
pub mod experiment;
pub mod kolmogorov;
pub mod sample;
pub mod semigroup;
pub mod simulate;

use std::path::{Path, PathBuf};

use clap::{Args, FromArgMatches, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::Serialize;

use levy_spde::stable::GridSpec;

use crate::run::{Context, SeedSource};
use crate::{CliError, Outcome};

#[derive(Parser, Debug)]
#[command(name = "levy-spde", version, about = "Stable-noise SPDE toolkit: checks, semigroup estimates, Kolmogorov solves and path experiments")]
#[command(arg_required_else_help = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Hypothesis checks and constants for a spectral model.
    Check(Invocation<check::Params>),
    /// Stable sampler and density-table diagnostics.
    Sample(Invocation<sample::Params>),
    /// Monte Carlo semigroup value, gradient and Hessian with bounds.
    Semigroup(Invocation<semigroup::Params>),
    /// Picard solve of the Kolmogorov equation on a grid.
    Kolmogorov(Invocation<kolmogorov::Params>),
    /// One simulated path with optional residual diagnostics.
    Simulate(Invocation<simulate::Params>),
    /// Replicated experiments: refinement ladder, Itô or Zvonkin residuals.
    Experiment(Invocation<experiment::Params>),
}

/// Options every subcommand accepts. Not part of the recorded parameters,
/// except the seed which is stored at the top of the manifest.
#[derive(Args, Debug, Clone)]
pub struct Common {
    /// TOML config with a top-level `seed` and a section named after the
    /// subcommand; a manifest from an earlier run is a valid config. When
    /// given, parameters come from the file and only `--seed`, `--out` and
    /// `--cache` on the command line take effect.
    #[arg(long, global = false)]
    pub config: Option<PathBuf>,
    /// Root seed. Drawn from OS entropy and recorded when omitted.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory, default `runs/<subcommand>`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Density-table cache directory.
    #[arg(long, default_value = ".levy-cache")]
    pub cache: PathBuf,
}

#[derive(Args, Debug, Clone)]
pub struct Invocation<P: Args> {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub params: P,
}

/// A subcommand body: parameters in, records and verdict out.
pub trait Subcmd: Args + FromArgMatches + Serialize + DeserializeOwned + Clone {
    const NAME: &'static str;
    /// Fill defaults that depend on other parameters, so the manifest holds
    /// fully resolved values.
    fn resolve(&mut self) -> Result<(), CliError> {
        Ok(())
    }
    fn execute(&self, ctx: &mut Context) -> Result<Outcome, CliError>;
}

/// Parameter values from clap defaults, as if no flags were given.
pub fn clap_defaults<T: Args + FromArgMatches>() -> T {
    let cmd = T::augment_args(clap::Command::new("defaults").no_binary_name(true));
    let matches = cmd.try_get_matches_from(std::iter::empty::<String>()).expect("defaults parse");
    T::from_arg_matches(&matches).expect("defaults build")
}

pub fn dispatch(cli: Cli) -> Result<Outcome, CliError> {
    match cli.command {
        Command::Check(i) => run_subcommand(i),
        Command::Sample(i) => run_subcommand(i),
        Command::Semigroup(i) => run_subcommand(i),
        Command::Kolmogorov(i) => run_subcommand(i),
        Command::Simulate(i) => run_subcommand(i),
        Command::Experiment(i) => run_subcommand(i),
    }
}

fn load_config<P: DeserializeOwned>(path: &Path, section: &str) -> Result<(P, Option<u64>), CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let doc: toml::Table = toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let seed = match doc.get("seed") {
        None => None,
        Some(toml::Value::Integer(s)) => Some(*s as u64),
        Some(other) => return Err(CliError::Config(format!("seed must be an integer, got {other}"))),
    };
    let body = doc.get(section).cloned().unwrap_or_else(|| toml::Value::Table(toml::Table::new()));
    let params = body.try_into().map_err(|e: toml::de::Error| CliError::Config(format!("[{section}]: {e}")))?;
    Ok((params, seed))
}

fn run_subcommand<P: Subcmd + Args>(inv: Invocation<P>) -> Result<Outcome, CliError> {
    let Invocation { common, mut params } = inv;
    let mut file_seed = None;
    if let Some(path) = &common.config {
        let (p, s) = load_config::<P>(path, P::NAME)?;
        params = p;
        file_seed = s;
    }
    let (seed, source) = match (common.seed, file_seed) {
        (Some(s), _) => (s, SeedSource::Flag),
        (None, Some(s)) => (s, SeedSource::Config),
        (None, None) => (rand::random::<u64>() >> 1, SeedSource::Entropy),
    };
    params.resolve()?;
    let out = common.out.clone().unwrap_or_else(|| PathBuf::from("runs").join(P::NAME));
    let mut ctx = Context::new(P::NAME, seed, source, out, common.cache.clone())?;
    let mut outcome = params.execute(&mut ctx)?;
    outcome.note(format!("seed {seed} ({source:?})"));
    let manifest = ctx.finish(&params)?;
    outcome.note(format!("manifest {}", manifest.display()));
    Ok(outcome)
}

/// Density-table grid options shared by subcommands that need scores.
#[derive(Args, Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
#[serde(default)]
pub struct TableSpec {
    /// Half-width of the density-table grid.
    #[arg(long = "table-half-width", default_value_t = 40.0)]
    pub table_half_width: f64,
    /// Odd number of density-table grid points.
    #[arg(long = "table-points", default_value_t = 8193)]
    pub table_points: usize,
}

impl Default for TableSpec {
    fn default() -> Self {
        clap_defaults()
    }
}

impl TableSpec {
    pub fn grid(&self) -> Result<GridSpec, CliError> {
        Ok(GridSpec::new(self.table_half_width, self.table_points)?)
    }
}

/// Pad or check a point against the number of modes.
pub fn point(values: &[f64], modes: usize, what: &str) -> Result<Vec<f64>, CliError> {
    match values.len() {
        0 => Ok(vec![0.0; modes]),
        1 => Ok(vec![values[0]; modes]),
        n if n == modes => Ok(values.to_vec()),
        n => Err(CliError::Usage(format!("{what} has {n} entries for {modes} modes"))),
    }
}
