mod bench;
mod common;
mod blur;
mod constants;
mod deblur;
mod error;
mod manifest;

use std::process::ExitCode;
use std::str::FromStr;

use clap::{Parser, Subcommand};

use crate::error::{CliError, EXIT_ARGS};

#[derive(Debug, Parser)]
#[command(name = "iadmm", version, about = "Inertial ADMM total-variation deblurring")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Blur a PGM image or a generated phantom with a Gaussian kernel.
    Blur(blur::BlurArgs),
    /// Restore a blurred PGM image.
    Deblur(deblur::DeblurArgs),
    /// Report the convergence constants for a problem size and kernel.
    Constants(constants::ConstantsArgs),
    /// Run a grid of solver settings over a set of images.
    Bench(bench::BenchArgs),
}

/// Adapts the library's `FromStr` impls to clap value parsers.
pub(crate) fn parse_with<T>(s: &str) -> Result<T, String>
where
    T: FromStr<Err = iadmm::Error>,
{
    s.parse::<T>().map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let _ = err.print();
            return if err.use_stderr() {
                ExitCode::from(EXIT_ARGS as u8)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result: Result<(), CliError> = match cli.command {
        Command::Blur(args) => blur::run(&args),
        Command::Deblur(args) => deblur::run(&args),
        Command::Constants(args) => constants::run(&args),
        Command::Bench(args) => bench::run(&args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.code() as u8)
        }
    }
}
