//! `kagome`: normal modes, disorder ensembles, synthetic transmission and
//! disorder estimation for coupled-resonator arrays.

mod commands;
mod config;
mod error;
mod plot;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use kagome_core::EstimatorMethod;

use crate::config::RunConfig;
use crate::error::CliError;

#[derive(Parser)]
#[command(name = "kagome", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON run configuration (a previous manifest works too).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true)]
    realizations: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    LowT,
    HighT,
}

#[derive(Subcommand)]
enum Command {
    /// Normal modes of one realization.
    Modes {
        #[arg(long)]
        sigma_hz: Option<f64>,
    },
    /// Mode-frequency histograms over disorder ensembles.
    Histogram {
        /// Disorder levels in units of t, comma separated.
        #[arg(long, value_delimiter = ',')]
        sigmas: Option<Vec<f64>>,
    },
    /// Synthetic transmission trace and its peaks.
    Spectrum {
        #[arg(long)]
        sigma_hz: Option<f64>,
    },
    /// Disorder estimate from measured peak sets.
    Estimate {
        /// Peak-set CSV files, one device per line, Hz.
        #[arg(long, num_args = 1..)]
        peaks: Vec<PathBuf>,
        #[arg(long, value_enum)]
        method: Option<Method>,
        /// Require every device to show all modes.
        #[arg(long)]
        strict: bool,
        #[arg(long)]
        t_hz: Option<f64>,
    },
    /// Derived circuit parameters and the width-disorder curve.
    Params,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Modes { .. } => "modes",
            Command::Histogram { .. } => "histogram",
            Command::Spectrum { .. } => "spectrum",
            Command::Estimate { .. } => "estimate",
            Command::Params => "params",
        }
    }
}

fn resolve(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::default(),
    };
    let name = cli.command.name();
    if let Some(c) = &cfg.command {
        if c != name {
            return Err(CliError::Config(format!("config is for '{c}', not '{name}'")));
        }
    }
    cfg.command = Some(name.to_string());
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(r) = cli.realizations {
        cfg.realizations = r;
    }
    match &cli.command {
        Command::Modes { sigma_hz } | Command::Spectrum { sigma_hz } => {
            if let Some(s) = sigma_hz {
                cfg.sigma_hz = *s;
            }
        }
        Command::Histogram { sigmas } => {
            if let Some(s) = sigmas {
                cfg.sigmas_over_t = s.clone();
            }
        }
        Command::Estimate { peaks, method, strict, t_hz } => {
            if !peaks.is_empty() {
                cfg.peaks = peaks.clone();
            }
            if let Some(m) = method {
                cfg.method = match m {
                    Method::LowT => EstimatorMethod::LowT,
                    Method::HighT => EstimatorMethod::HighT,
                };
            }
            cfg.strict |= strict;
            if let Some(t) = t_hz {
                cfg.t_hz = *t;
            }
        }
        Command::Params => {}
    }
    cfg.absolutize();
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let cfg = resolve(cli)?;
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Config("--threads must be >= 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Numerical(e.to_string()))?;
    }
    std::fs::create_dir_all(&cli.out)
        .map_err(|e| CliError::Config(format!("cannot create {}: {e}", cli.out.display())))?;
    commands::write_json(&cli.out.join("manifest.json"), &cfg)?;
    match cli.command {
        Command::Modes { .. } => commands::modes(&cfg, &cli.out),
        Command::Histogram { .. } => commands::histogram(&cfg, &cli.out),
        Command::Spectrum { .. } => commands::spectrum(&cfg, &cli.out),
        Command::Estimate { .. } => commands::estimate(&cfg, &cli.out),
        Command::Params => commands::params(&cfg, &cli.out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
