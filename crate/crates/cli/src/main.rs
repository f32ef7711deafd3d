// SPDX-License-Identifier: Apache-2.0

//! `lrchain`: disorder sweeps and single-shot calculations for long-range
//! hopping chains.

mod commands;
mod settings;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use settings::{Figure, Settings};

#[derive(Debug)]
pub struct ConfigError(pub String);

#[derive(Debug, Parser)]
#[command(
    name = "lrchain",
    version,
    about = "Transport and eigenstate structure of disordered long-range hopping chains"
)]
struct Cli {
    /// TOML file with default values for any of the flags.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Parameter preset for a published figure.
    #[arg(long, global = true, value_enum)]
    figure: Option<Figure>,
    /// Continue an interrupted sweep from its checkpoint.
    #[arg(long, global = true)]
    resume: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Typical and mean steady-state current versus disorder.
    Current(Common),
    /// Integrated transmission versus disorder.
    Transmission(Common),
    /// Averaged eigenfunction shape.
    Shape(Common),
    /// Eigenstate tail amplitudes.
    Tails(Common),
    /// Wave-packet spreading from the centre site.
    Dynamics(Common),
    /// Energy gap, numeric ensemble or closed form.
    Gap {
        #[command(flatten)]
        common: Common,
        /// Evaluate the closed form only.
        #[arg(long)]
        analytic: bool,
    },
    /// Disorder thresholds W₁, W₂, W_gap and the localization length.
    Thresholds(Common),
    /// Cavity chain against the equivalent long-range chain.
    CavityCompare(Common),
    /// Lindblad steady state against the closed-form current on small chains.
    OracleCheck(Common),
}

#[derive(Debug, clap::Args)]
struct Common {
    #[command(flatten)]
    settings: Settings,
}

fn layered(cli: &Cli, flags: &Settings) -> Result<Settings, ConfigError> {
    let mut s = cli.figure.map(Settings::preset).unwrap_or_default();
    if let Some(path) = &cli.config {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
        s = s.overlay(&Settings::from_toml(&text)?);
    }
    Ok(s.overlay(flags))
}

/// OpenBLAS picks its kernels from the detected CPU; the DGEMM kernel chosen
/// on some recent cores returns wrong products for large matrices, so the
/// core type is pinned before the library loads.
#[cfg(unix)]
fn pin_blas_core() {
    use std::os::unix::process::CommandExt;
    if std::env::var_os("OPENBLAS_CORETYPE").is_some() {
        return;
    }
    let Ok(exe) = std::env::current_exe() else {
        return;
    };
    let err = std::process::Command::new(exe)
        .args(std::env::args_os().skip(1))
        .env("OPENBLAS_CORETYPE", "Haswell")
        .exec();
    eprintln!("warning: could not re-exec with OPENBLAS_CORETYPE set: {err}");
}

#[cfg(not(unix))]
fn pin_blas_core() {}

fn main() -> ExitCode {
    pin_blas_core();
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let flags = match &cli.command {
        Command::Current(c)
        | Command::Transmission(c)
        | Command::Shape(c)
        | Command::Tails(c)
        | Command::Dynamics(c)
        | Command::Thresholds(c)
        | Command::CavityCompare(c)
        | Command::OracleCheck(c) => &c.settings,
        Command::Gap { common, .. } => &common.settings,
    };
    let settings = match layered(&cli, flags) {
        Ok(s) => s,
        Err(ConfigError(msg)) => {
            eprintln!("error: {msg}");
            return ExitCode::from(2);
        }
    };
    let ctx = commands::Context {
        settings,
        resume: cli.resume,
        argv: std::env::args().collect(),
    };
    let result = match cli.command {
        Command::Current(_) => commands::current(&ctx),
        Command::Transmission(_) => commands::transmission(&ctx),
        Command::Shape(_) => commands::shape(&ctx),
        Command::Tails(_) => commands::tails(&ctx),
        Command::Dynamics(_) => commands::dynamics(&ctx),
        Command::Gap { analytic, .. } => commands::gap(&ctx, analytic),
        Command::Thresholds(_) => commands::thresholds(&ctx),
        Command::CavityCompare(_) => commands::cavity_compare(&ctx),
        Command::OracleCheck(_) => commands::oracle_check(&ctx),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(commands::Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(commands::Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
