//! Command-line experiments over `rotip-core`: configuration loading, the
//! seven commands, CSV/JSON-lines output and golden hashes.

use std::path::PathBuf;

use thiserror::Error;

pub mod commands;
pub mod config;
pub mod golden;
pub mod output;

pub use commands::Command;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("runtime error: {0}")]
    Runtime(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 3,
            CliError::Io(_) => 1,
        }
    }
}

pub const EXIT_CHECK_FAILED: i32 = 4;

/// A parsed command line.
#[derive(Debug, Clone)]
pub struct Invocation {
    pub config: Option<PathBuf>,
    /// Overrides the seeds of the configuration.
    pub seeds: Option<Vec<u64>>,
    pub out: PathBuf,
    pub check: bool,
    pub bless: bool,
    pub goldens: PathBuf,
    pub command: Command,
}

/// Directory of the committed golden hashes.
pub fn default_goldens() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("goldens")
}

/// Runs one invocation, writes its files and prints a short summary.
/// Returns the process exit code.
pub fn execute(inv: &Invocation) -> Result<i32, CliError> {
    let cfg = match &inv.config {
        Some(p) => config::load(p)?,
        None => {
            let c = config::ScenarioConfig::default();
            c.validate()?;
            c
        }
    };
    let seeds = inv.seeds.clone().unwrap_or_else(|| cfg.seeds());
    if seeds.is_empty() {
        return Err(CliError::Config("seeds: seed list is empty".into()));
    }
    let run = commands::run(&inv.command, &cfg, &seeds)?;
    run.write(&inv.out)?;
    print!("{}", run.summary);

    let key = golden::GoldenKey { config_hash: cfg.hash(), seeds: output::seed_label(&seeds), args: inv.command.args() };
    if inv.bless {
        let path = golden::bless(&inv.goldens, inv.command.name(), &key, &run.files)?;
        println!("blessed {}", path.display());
    }
    if let Some(msg) = &run.failure {
        eprintln!("{msg}");
        return Ok(3);
    }
    if inv.check {
        let mut checks = run.checks.clone();
        checks.push(golden::compare(&inv.goldens, inv.command.name(), &key, &run.files));
        let mut ok = true;
        for c in &checks {
            println!("CHECK {} {}: {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
            ok &= c.pass;
        }
        if !ok {
            return Ok(EXIT_CHECK_FAILED);
        }
    }
    Ok(0)
}
