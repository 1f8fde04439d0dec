//! Command-line front end: configuration files, parameter sweeps, scheme
//! comparison, validation against the grid oracle, and BER curves.

// `!(x > y)` is deliberate: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod format;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use config::{ConfigError, RunConfig, SweepParam};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "wpcn", version, about = "Max-min throughput of a two-user WPCN with backscatter-assisted relaying")]
pub struct Cli {
    /// Configuration file of `key = value` lines.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output file (CSV for sweep, compare and ber).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Seed for the random validation instances and the detector simulation.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Grid step for the oracle in `validate`.
    #[arg(long, global = true)]
    pub delta: Option<f64>,
    /// Comma-separated schemes: ab_coop, active_coop, no_coop.
    #[arg(long, global = true)]
    pub scheme: Option<String>,
    /// Override a configuration key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    pub set: Vec<String>,
    /// Print a JSON summary instead of text.
    #[arg(long, global = true)]
    pub json: bool,
    /// Write the effective configuration to this file before running.
    #[arg(long, value_name = "PATH", global = true)]
    pub dump_config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum Command {
    /// Optimal allocation for each scheme at the configured point.
    Solve,
    /// Objective and allocation along `sweep_param`.
    Sweep,
    /// d1 sweep at two backscatter rates with crossover detection.
    Compare,
    /// Solver against the grid oracle, and the detector simulation.
    Validate,
    /// Analytic and simulated backscatter BER for each N in `n_list`.
    Ber,
}

/// Defaults, then the file, then `--set`, then the dedicated flags.
pub fn effective_config(cli: &Cli) -> Result<RunConfig, ConfigError> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
                path: path.clone(),
                source,
            })?;
            let mut c = RunConfig::default();
            c.apply_text(&text, &path.display().to_string())?;
            c
        }
        None => RunConfig::default(),
    };
    for item in &cli.set {
        let Some((k, v)) = item.split_once('=') else {
            return Err(ConfigError::Syntax {
                origin: "--set".into(),
                text: item.clone(),
            });
        };
        cfg.set(k.trim(), v.trim(), "--set")?;
    }
    if let Some(out) = &cli.out {
        cfg.out = Some(out.clone());
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(delta) = cli.delta {
        cfg.delta = delta;
    }
    if let Some(list) = &cli.scheme {
        cfg.set("schemes", list, "--scheme")?;
    }
    cfg.check()?;
    Ok(cfg)
}

/// Runs the tool and returns its exit code. Diagnostics go to `err`.
pub fn run<I, T>(args: I, out: &mut dyn std::io::Write, err: &mut dyn std::io::Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = write!(err, "{e}");
            return code;
        }
    };
    let cfg = match effective_config(&cli) {
        Ok(c) => c,
        Err(e) => {
            let _ = writeln!(err, "config error: {e}");
            return EXIT_CONFIG;
        }
    };
    if let Some(path) = &cli.dump_config {
        if let Err(e) = std::fs::write(path, cfg.dump()) {
            let _ = writeln!(err, "error: cannot write {}: {e}", path.display());
            return EXIT_CONFIG;
        }
    }
    let result = match cli.command {
        Command::Solve => commands::cmd_solve(&cfg, cli.json),
        Command::Sweep => commands::cmd_sweep(&cfg),
        Command::Compare => commands::cmd_compare(&cfg, cli.json),
        Command::Validate => commands::cmd_validate(&cfg, cli.json),
        Command::Ber => commands::cmd_ber(&cfg, cli.json),
    };
    match result {
        Ok(o) => {
            let _ = out.write_all(o.stdout.as_bytes());
            if o.passed {
                EXIT_OK
            } else {
                EXIT_VALIDATION
            }
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e:#}");
            EXIT_CONFIG
        }
    }
}
