use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use caginalp_smc::cli::{execute, workers_from_env, CliCommand, RunManifest};
use caginalp_smc::verify::StudyKind;

#[derive(Parser)]
#[command(
    name = "caginalp-smc",
    about = "Sliding-mode control simulator for the type-III Caginalp phase-field system",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Parse a config file and report every violated hypothesis
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Integrate the system and write the trajectory table
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Also dump the spectral coefficients of every state (large files)
        #[arg(long)]
        emit_coeffs: bool,
    },
    /// Simulate, then check the finite-time reaching certificate
    Certify {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long)]
        emit_coeffs: bool,
    },
    /// One certified run per ladder value of a numeric config key
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long)]
        emit_coeffs: bool,
        /// Shorthand for --axis control.rho --ladder <values>
        #[arg(long, value_name = "V1,V2,...")]
        rho: Option<String>,
        /// Config key to sweep, e.g. control.rho or params.tau
        #[arg(long)]
        axis: Option<String>,
        /// Comma-separated ladder values
        #[arg(long, value_name = "V1,V2,...")]
        ladder: Option<String>,
    },
    /// Convergence and property studies
    Verify {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// One of: modes, eps, dt, contdep, energy, signderiv
        #[arg(long)]
        study: String,
    },
}

fn parse_ladder(text: &str) -> Result<Vec<f64>, String> {
    text.split(',')
        .map(|tok| tok.trim().parse::<f64>().map_err(|e| format!("bad ladder value {tok:?}: {e}")))
        .collect()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Cmd::Validate { config } => execute(&RunManifest::new(config, PathBuf::from("."), CliCommand::Validate)),
        Cmd::Simulate { config, out, emit_coeffs } => {
            let mut man = RunManifest::new(config, out, CliCommand::Simulate);
            man.emit_coeffs = emit_coeffs;
            execute(&man)
        }
        Cmd::Certify { config, out, emit_coeffs } => {
            let mut man = RunManifest::new(config, out, CliCommand::Certify);
            man.emit_coeffs = emit_coeffs;
            execute(&man)
        }
        Cmd::Sweep { config, out, emit_coeffs, rho, axis, ladder } => {
            let (axis, ladder_text) = match (rho, axis, ladder) {
                (Some(values), None, None) => ("control.rho".to_string(), values),
                (None, Some(axis), Some(values)) => (axis, values),
                _ => {
                    eprintln!("error: pass either --rho V1,V2,... or --axis KEY --ladder V1,V2,...");
                    return ExitCode::from(2);
                }
            };
            match parse_ladder(&ladder_text) {
                Ok(values) => {
                    let mut man =
                        RunManifest::new(config, out, CliCommand::Sweep { axis, ladder: values });
                    man.emit_coeffs = emit_coeffs;
                    man.workers = workers_from_env();
                    execute(&man)
                }
                Err(msg) => {
                    eprintln!("error: {msg}");
                    2
                }
            }
        }
        Cmd::Verify { config, out, study } => {
            let kind = match study.as_str() {
                "modes" => StudyKind::Modes,
                "eps" => StudyKind::Eps,
                "dt" => StudyKind::Dt,
                "contdep" => StudyKind::ContDep,
                "energy" => StudyKind::Energy,
                "signderiv" => StudyKind::SignDeriv,
                other => {
                    eprintln!("error: unknown study {other:?} (expected modes, eps, dt, contdep, energy, signderiv)");
                    return ExitCode::from(2);
                }
            };
            execute(&RunManifest::new(config, out, CliCommand::Verify { study: kind }))
        }
    };
    ExitCode::from(code.clamp(0, 255) as u8)
}
