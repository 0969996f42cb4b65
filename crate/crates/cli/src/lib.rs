//! Config-driven front end: each subcommand reads a TOML run description and
//! writes one table as CSV or JSON.

pub mod commands;
pub mod config;
pub mod output;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

pub use commands::Report;
pub use config::{Format, LoadedConfig, RunConfig};

/// Invalid invocation or config; reported with exit code 2.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{0}")]
pub struct UsageError(pub String);

#[derive(Debug, Parser)]
#[command(name = "occtime", version, about = "Occupation-time laws, transforms and Monte Carlo checks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// TOML run description.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output file; standard output when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Defaults to `output.format` in the config, then csv.
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Overrides `seed` in the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Double Laplace transform of the occupation time on a (theta, q) grid.
    Transform,
    /// Distribution function of the occupation time by several methods.
    Dist,
    /// Gaussian approximation and its moments.
    Clt,
    /// Large-deviations rate function.
    Ldp,
    /// Monte Carlo paths or their empirical distribution function.
    Simulate,
    /// Acceptance checks with a pass/fail report.
    Validate,
}

impl Command {
    pub fn run(self, cfg: &LoadedConfig, seed: Option<u64>) -> Result<Report> {
        match self {
            Command::Transform => commands::cmd_transform(cfg, seed),
            Command::Dist => commands::cmd_dist(cfg, seed),
            Command::Clt => commands::cmd_clt(cfg, seed),
            Command::Ldp => commands::cmd_ldp(cfg, seed),
            Command::Simulate => commands::cmd_simulate(cfg, seed),
            Command::Validate => commands::cmd_validate(cfg, seed),
        }
    }
}

/// Process exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok,
    ValidationFailed,
}

/// Runs a parsed command line and writes its table.
pub fn run(cli: &Cli) -> Result<Status> {
    let path = cli.config.as_ref().ok_or_else(|| UsageError("--config PATH is required".into()))?;
    let cfg = LoadedConfig::load(path)?;
    let seed = cli.seed.or(cfg.config.seed);
    let report = cli.command.run(&cfg, seed)?;
    let format = cli.format.or(cfg.config.output.format).unwrap_or(Format::Csv);
    let out = cli.out.clone().or_else(|| cfg.config.output.path.as_ref().map(|p| cfg.base.join(p)));
    match &out {
        Some(p) => {
            let file = File::create(p).with_context(|| format!("creating {}", p.display()))?;
            let mut w = BufWriter::new(file);
            output::write(format, &report.meta, &report.table, &mut w)?;
            w.flush()?;
            if format == Format::Csv {
                // CSV has no room for metadata; it goes next to the table
                let side = sidecar_path(p);
                let text = serde_json::to_string_pretty(&report.meta.to_json())? + "\n";
                std::fs::write(&side, text).with_context(|| format!("writing {}", side.display()))?;
            }
        }
        None => {
            let stdout = std::io::stdout();
            output::write(format, &report.meta, &report.table, stdout.lock())?;
        }
    }
    let mut err = std::io::stderr().lock();
    for line in &report.summary {
        // a closed stderr must not turn a finished run into a failure
        let _ = writeln!(err, "{line}");
    }
    Ok(if report.failed { Status::ValidationFailed } else { Status::Ok })
}

/// `<out>.meta.json`.
pub fn sidecar_path(out: &std::path::Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".meta.json");
    PathBuf::from(s)
}

/// Maps a run result to the process exit code.
pub fn exit_code(r: &Result<Status>) -> i32 {
    match r {
        Ok(Status::Ok) => 0,
        Ok(Status::ValidationFailed) => 2,
        Err(e) if e.is::<UsageError>() || e.chain().any(|c| c.is::<UsageError>()) => 2,
        Err(_) => 1,
    }
}
