//! `rayleigh`: experiments on unstable eigenvalues of the Rayleigh equation.

mod commands;
mod config;
mod error;

use clap::{Parser, Subcommand};

use config::{CommonArgs, RunConfig};
use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "rayleigh", version, about = "Unstable Rayleigh eigenvalues near a neutral mode")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Neutral mode of the channel (or truncated line) problem.
    Neutral(CommonArgs),
    /// Spectral coefficient lambda from Gamma(i tau).
    Lambda(CommonArgs),
    /// Certified dispersion curve c(eps).
    Dispersion(CommonArgs),
    /// Scaling scan over k for the vortex-sheet profile.
    Sheet(CommonArgs),
    /// One glued solution of the vortex-sheet problem.
    Glue(CommonArgs),
    /// Invariant suite; exit 3 on any failure.
    Validate {
        /// Reduced grid (n = 250).
        #[arg(long)]
        quick: bool,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long, hide = true)]
        inject_lambda_sign_flip: bool,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Neutral(a) => commands::neutral(&RunConfig::resolve("neutral", &a)?),
        Command::Lambda(a) => commands::lambda(&RunConfig::resolve("lambda", &a)?),
        Command::Dispersion(a) => commands::dispersion(&RunConfig::resolve("dispersion", &a)?),
        Command::Sheet(a) => commands::sheet(&RunConfig::resolve("sheet", &a)?),
        Command::Glue(a) => commands::glue(&RunConfig::resolve("glue", &a)?),
        Command::Validate { quick, n, inject_lambda_sign_flip } => {
            let n = n.unwrap_or(if quick { 250 } else { 2000 });
            if n < 50 {
                return Err(CliError::Usage(format!("validate needs n >= 50, got {n}")));
            }
            commands::validate(n, inject_lambda_sign_flip)
        }
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
