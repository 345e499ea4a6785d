//! `csc-forge`: convolutional sparse coding from the command line.

mod args;
mod commands;
mod error;
mod files;
mod manifest;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "csc-forge", version, about = "Convolutional sparse coding toolkit")]
struct Cli {
    /// Worker threads for the parallel kernels (0 picks one per core).
    #[arg(long, global = true, env = "CSC_FORGE_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sample a sparse deepest code and push it through a model.
    Synth(commands::synth::SynthArgs),
    /// Add noise to an image and denoise it with a sparse model.
    Denoise(commands::denoise::DenoiseArgs),
    /// Apply a sparsity rule to a tensor.
    Project(commands::project::ProjectArgs),
    /// Sparse-code a signal over a dictionary with ISTA or IHT.
    Pursue(commands::pursue::PursueArgs),
    /// Learn a convolutional dictionary from an image.
    Learn(commands::learn::LearnArgs),
    /// Report nonzero statistics of a tensor.
    Analyze(commands::analyze::AnalyzeArgs),
    /// Render dictionary atoms as an image grid.
    Atoms(commands::atoms::AtomsArgs),
    /// Write a random or DCT dictionary.
    Dictgen(commands::tools::DictgenArgs),
    /// Write a synthetic piecewise-constant test image.
    Testimage(commands::tools::TestimageArgs),
}

fn configure_threads(threads: Option<usize>) -> CliResult<()> {
    if let Some(n) = threads.filter(|&n| n > 0) {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::usage(format!("--threads: {e}")))?;
    }
    Ok(())
}

fn run(cli: Cli) -> CliResult<()> {
    configure_threads(cli.threads)?;
    match cli.command {
        Command::Synth(a) => commands::synth::run(a),
        Command::Denoise(a) => commands::denoise::run(a),
        Command::Project(a) => commands::project::run(a),
        Command::Pursue(a) => commands::pursue::run(a),
        Command::Learn(a) => commands::learn::run(a),
        Command::Analyze(a) => commands::analyze::run(a),
        Command::Atoms(a) => commands::atoms::run(a),
        Command::Dictgen(a) => commands::tools::dictgen(a),
        Command::Testimage(a) => commands::tools::testimage(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
