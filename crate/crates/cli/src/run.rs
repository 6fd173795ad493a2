//! Per-run bookkeeping: seed resolution, output files and the manifest.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use levy_spde::rng::StreamKey;
use levy_spde::stable::{DensityTable, GridSpec};

use crate::records::Records;
use crate::CliError;

/// Where the seed of a run came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SeedSource {
    Flag,
    Config,
    Entropy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputEntry {
    pub path: String,
    pub sha256: String,
}

/// `[run]` section of a manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunInfo {
    pub command: String,
    pub config_hash: String,
    pub seed_source: SeedSource,
    pub versions: BTreeMap<String, String>,
    pub density_tables: Vec<String>,
    pub outputs: Vec<OutputEntry>,
    pub wall_clock_seconds: f64,
}

/// Verdict and human-readable summary of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub pass: bool,
    pub lines: Vec<String>,
}

impl Outcome {
    pub fn new() -> Self {
        Self { pass: true, lines: Vec::new() }
    }

    /// Record a check; the run fails if any check fails.
    pub fn check(&mut self, name: &str, pass: bool, detail: String) {
        self.pass &= pass;
        self.lines.push(format!("{} {name}: {detail}", if pass { "PASS" } else { "FAIL" }));
    }

    pub fn note(&mut self, line: String) {
        self.lines.push(line);
    }
}

impl Default for Outcome {
    fn default() -> Self {
        Self::new()
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Live state of a run.
pub struct Context {
    pub command: String,
    pub seed: u64,
    pub seed_source: SeedSource,
    pub out: PathBuf,
    pub cache: PathBuf,
    tables: Vec<String>,
    outputs: Vec<OutputEntry>,
    started: Instant,
}

impl Context {
    pub fn new(command: &str, seed: u64, seed_source: SeedSource, out: PathBuf, cache: PathBuf) -> Result<Self, CliError> {
        std::fs::create_dir_all(&out)?;
        Ok(Self {
            command: command.to_string(),
            seed,
            seed_source,
            out,
            cache,
            tables: Vec::new(),
            outputs: Vec::new(),
            started: Instant::now(),
        })
    }

    /// Root stream of the run, separated by subcommand.
    pub fn key(&self) -> StreamKey {
        StreamKey::new(self.seed).named(&self.command)
    }

    /// Density table from the cache directory, recording its key.
    pub fn table(&mut self, alpha: f64, spec: GridSpec) -> Result<DensityTable, CliError> {
        let t = DensityTable::load_or_build(alpha, spec, &self.cache)?;
        let key = DensityTable::cache_key(alpha, spec);
        if !self.tables.contains(&key) {
            self.tables.push(key);
        }
        Ok(t)
    }

    /// Write `contents` under the output directory and record its hash.
    pub fn write(&mut self, name: &str, contents: &str) -> Result<PathBuf, CliError> {
        let path = self.out.join(name);
        std::fs::write(&path, contents)?;
        self.outputs.push(OutputEntry { path: name.to_string(), sha256: sha256_hex(contents.as_bytes()) });
        Ok(path)
    }

    pub fn write_records(&mut self, name: &str, records: &Records) -> Result<PathBuf, CliError> {
        self.write(name, &records.to_text())
    }

    /// Write an output outside the run directory (recorded by absolute path).
    pub fn write_external(&mut self, path: &Path, contents: &str) -> Result<(), CliError> {
        if let Some(dir) = path.parent() {
            if !dir.as_os_str().is_empty() {
                std::fs::create_dir_all(dir)?;
            }
        }
        std::fs::write(path, contents)?;
        self.outputs.push(OutputEntry { path: path.display().to_string(), sha256: sha256_hex(contents.as_bytes()) });
        Ok(())
    }

    /// Write `manifest.toml`: a valid config (seed plus the subcommand's
    /// section) followed by the `[run]` record.
    pub fn finish<P: Serialize>(self, params: &P) -> Result<PathBuf, CliError> {
        let section = toml::Value::try_from(params).map_err(|e| CliError::Config(e.to_string()))?;
        let config_hash = config_hash(&self.command, self.seed, &section)?;
        let mut versions = BTreeMap::new();
        versions.insert("levy-spde".to_string(), levy_spde_version().to_string());
        versions.insert("levy-spde-cli".to_string(), env!("CARGO_PKG_VERSION").to_string());
        let info = RunInfo {
            command: self.command.clone(),
            config_hash,
            seed_source: self.seed_source,
            versions,
            density_tables: self.tables,
            outputs: self.outputs,
            wall_clock_seconds: self.started.elapsed().as_secs_f64(),
        };
        let mut doc = toml::Table::new();
        doc.insert("seed".into(), toml::Value::Integer(self.seed as i64));
        doc.insert(self.command.clone(), section);
        doc.insert("run".into(), toml::Value::try_from(&info).map_err(|e| CliError::Config(e.to_string()))?);
        let text = toml::to_string(&doc).map_err(|e| CliError::Config(e.to_string()))?;
        let path = self.out.join("manifest.toml");
        std::fs::write(&path, text)?;
        Ok(path)
    }
}

fn levy_spde_version() -> &'static str {
    // the workspace shares one version
    env!("CARGO_PKG_VERSION")
}

/// SHA-256 over the command, seed and canonical TOML of the parameters.
pub fn config_hash(command: &str, seed: u64, section: &toml::Value) -> Result<String, CliError> {
    let mut doc = toml::Table::new();
    doc.insert("seed".into(), toml::Value::Integer(seed as i64));
    doc.insert(command.to_string(), section.clone());
    let text = toml::to_string(&doc).map_err(|e| CliError::Config(e.to_string()))?;
    Ok(sha256_hex(text.as_bytes()))
}

/// Load a manifest written by [`Context::finish`].
pub fn read_manifest(path: &Path) -> Result<RunInfo, CliError> {
    let text = std::fs::read_to_string(path)?;
    let doc: toml::Table = toml::from_str(&text).map_err(|e| CliError::Config(e.to_string()))?;
    let run = doc.get("run").cloned().ok_or_else(|| CliError::Config("manifest has no [run] section".into()))?;
    run.try_into().map_err(|e: toml::de::Error| CliError::Config(e.to_string()))
}
