//! Scenario orchestration, CSV output and run manifests.
//!
//! A run executes one or more scenarios into an output directory. Every CSV
//! is produced in memory, written once, and recorded in `manifest.toml` with
//! its SHA-256 digest. CSV content depends only on the configuration and
//! seed; timing lives in the manifest alone.

pub mod config;
pub mod figures;
mod scenarios;

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};

pub use config::{ConfigError, RunConfig, Scenario};
pub use figures::Figure;

use crate::error::Error;

pub const MANIFEST_FILE: &str = "manifest.toml";

#[derive(Debug)]
pub enum RunError {
    Config(ConfigError),
    Physics(Error),
    Io(std::io::Error),
}

impl RunError {
    /// Process exit code: 2 configuration, 3 physics, 4 numerics, 1 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            RunError::Physics(Error::Numeric(_)) => 4,
            RunError::Physics(_) => 3,
            RunError::Io(_) => 1,
        }
    }
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunError::Config(e) => write!(f, "config error: {e}"),
            RunError::Physics(e) => write!(f, "{e}"),
            RunError::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl std::error::Error for RunError {}

impl From<ConfigError> for RunError {
    fn from(e: ConfigError) -> Self {
        RunError::Config(e)
    }
}

impl From<Error> for RunError {
    fn from(e: Error) -> Self {
        RunError::Physics(e)
    }
}

impl From<std::io::Error> for RunError {
    fn from(e: std::io::Error) -> Self {
        RunError::Io(e)
    }
}

impl From<csv::Error> for RunError {
    fn from(e: csv::Error) -> Self {
        RunError::Io(std::io::Error::other(e))
    }
}

/// Errors raised while turning a valid-looking config into physics objects
/// are configuration errors, not physics failures.
pub(crate) fn as_config(e: Error) -> RunError {
    match e {
        Error::InvalidArgument(m) => RunError::Config(ConfigError { line: None, message: m }),
        other => RunError::Physics(other),
    }
}

/// A table held in memory until the run finishes.
#[derive(Debug, Clone)]
pub struct Table {
    pub name: String,
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Self {
            name: name.to_string(),
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push<I, S>(&mut self, row: I)
    where
        I: IntoIterator<Item = S>,
        S: ToString,
    {
        let row: Vec<String> = row.into_iter().map(|x| x.to_string()).collect();
        debug_assert_eq!(row.len(), self.header.len(), "row width in {}", self.name);
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>, RunError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.into_inner().map_err(|e| RunError::Io(std::io::Error::other(e.to_string())))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct OutputRecord {
    pub file: String,
    pub sha256: String,
    pub rows: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunRecord {
    pub scenario: Scenario,
    pub config: RunConfig,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub software: String,
    pub version: String,
    pub command: String,
    pub seed: u64,
    pub duration_s: f64,
    pub runs: Vec<RunRecord>,
    pub outputs: Vec<OutputRecord>,
}

/// One scenario to execute.
#[derive(Debug, Clone)]
pub struct Job {
    pub scenario: Scenario,
    pub config: RunConfig,
    /// Directory that relative paths in the config resolve against.
    pub base_dir: PathBuf,
}

impl Job {
    pub fn new(scenario: Scenario, mut config: RunConfig) -> Self {
        config.scenario = Some(scenario);
        Self {
            scenario,
            config,
            base_dir: PathBuf::from("."),
        }
    }
}

/// Loads a config file and checks it against the requested scenario.
pub fn load_config(path: &Path, scenario: Scenario) -> Result<RunConfig, RunError> {
    let source = fs::read_to_string(path)?;
    let cfg = RunConfig::parse(&source)?;
    if let Some(s) = cfg.scenario {
        if s != scenario {
            return Err(RunError::Config(ConfigError {
                line: config::locate(&source, "", "scenario"),
                message: format!("config is for scenario '{s}', but '{scenario}' was requested"),
            }));
        }
    }
    Ok(cfg)
}

/// Executes the jobs, writes their tables and the manifest into `out`.
/// Nothing is written unless every job succeeds.
pub fn execute(jobs: &[Job], out: &Path, command: &str) -> Result<RunManifest, RunError> {
    let start = Instant::now();
    let mut tables: Vec<Table> = Vec::new();
    for job in jobs {
        let produced = scenarios::run(job)?;
        for t in produced {
            if tables.iter().any(|x| x.name == t.name) {
                return Err(RunError::Io(std::io::Error::other(format!(
                    "two scenarios produced {}",
                    t.name
                ))));
            }
            tables.push(t);
        }
    }

    fs::create_dir_all(out)?;
    let mut outputs = Vec::new();
    for t in &tables {
        let bytes = t.to_bytes()?;
        fs::write(out.join(&t.name), &bytes)?;
        outputs.push(OutputRecord {
            file: t.name.clone(),
            sha256: hex::encode(Sha256::digest(&bytes)),
            rows: t.len(),
        });
    }
    let manifest = RunManifest {
        software: env!("CARGO_PKG_NAME").to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        command: command.to_string(),
        seed: jobs.first().map_or(0, |j| j.config.seed),
        duration_s: start.elapsed().as_secs_f64(),
        runs: jobs
            .iter()
            .map(|j| RunRecord {
                scenario: j.scenario,
                config: j.config.clone(),
            })
            .collect(),
        outputs,
    };
    let text = toml::to_string(&manifest).map_err(|e| RunError::Io(std::io::Error::other(e.to_string())))?;
    fs::write(out.join(MANIFEST_FILE), text)?;
    Ok(manifest)
}

/// Runs the canned jobs of a figure.
pub fn reproduce(fig: Figure, out: &Path, seed: Option<u64>) -> Result<RunManifest, RunError> {
    let mut jobs = fig.jobs();
    if let Some(s) = seed {
        for j in &mut jobs {
            j.config.seed = s;
        }
    }
    execute(&jobs, out, &format!("reproduce {}", fig.tag()))
}
