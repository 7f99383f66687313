//! `kdvbed` command-line front end. Every subcommand reads one flat TOML
//! config, writes CSV and raw arrays into an output directory together with
//! a `manifest.txt`, and prints a short summary.
//!
//! Exit codes: 0 success, 1 validation error (bad flag, bad or missing
//! config, unwritable output), 2 numerical failure.

mod commands;
mod config;
mod errors;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

pub use errors::CliError;

#[derive(Parser, Debug)]
#[command(name = "kdvbed", version, about = "Long waves over random topography: experiments and checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Flat `key = value` TOML file; defaults apply to absent keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory; overrides `output_dir` from the config.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sample one bottom realization and estimate its statistics.
    GenerateBottom(Common),
    /// Effective coefficients, analytic and from one sampled realization.
    Coefficients(Common),
    /// Invariance principle check for the integrated bottom.
    Donsker(Common),
    /// Scale-separation and characteristic-flow order checks.
    Lemmas(Common),
    /// Integrate the KdV equation from a soliton or a bump.
    SolveKdv(Common),
    /// Integrate the filtered Boussinesq system over one bottom realization.
    SolveSystem(Common),
    /// Neglected-term orders and the coefficient fixed point.
    Consistency(Common),
    /// Ensemble decay and diffusion experiment over `eps_list`.
    Ensemble(Common),
    /// Ensemble decay at the single `eps`.
    Decay(Common),
}

impl Command {
    fn split(&self) -> (&'static str, &Common) {
        match self {
            Command::GenerateBottom(c) => ("generate-bottom", c),
            Command::Coefficients(c) => ("coefficients", c),
            Command::Donsker(c) => ("donsker", c),
            Command::Lemmas(c) => ("lemmas", c),
            Command::SolveKdv(c) => ("solve-kdv", c),
            Command::SolveSystem(c) => ("solve-system", c),
            Command::Consistency(c) => ("consistency", c),
            Command::Ensemble(c) => ("ensemble", c),
            Command::Decay(c) => ("decay", c),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let (name, common) = cli.command.split();
    match commands::run(name, common) {
        Ok(lines) => {
            for l in lines {
                println!("{l}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("kdvbed {name}: {e}");
            ExitCode::from(e.code())
        }
    }
}
