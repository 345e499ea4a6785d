use std::path::PathBuf;

use clap::Args;
use csc_core::sparsify::sparsity_report;
use serde_json::json;

use crate::error::{CliError, CliResult};
use crate::manifest::Run;

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Tensor to analyze (CSCT).
    #[arg(long)]
    pub input: PathBuf,
    /// Entries with magnitude at or below this count as zero.
    #[arg(long, default_value_t = 0.0)]
    pub zero_tol: f32,
    /// Per-needle report (CSV).
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Per-needle nonzero fraction as a grayscale PGM.
    #[arg(long)]
    pub heat: Option<PathBuf>,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

pub fn run(a: AnalyzeArgs) -> CliResult<()> {
    if !(a.zero_tol >= 0.0 && a.zero_tol.is_finite()) {
        return Err(CliError::usage("--zero-tol must be a nonnegative number"));
    }
    let mut run = Run::start(
        "analyze",
        None,
        json!({ "input": a.input.display().to_string(), "zero_tol": a.zero_tol }),
    );
    let gamma = run.files.read_tensor(&a.input)?;
    let report = sparsity_report(&gamma, a.zero_tol);
    if let Some(path) = &a.csv {
        run.files.write(path, report.to_csv().as_bytes())?;
    }
    if let Some(path) = &a.heat {
        run.files.write_image(path, &report.heat_map())?;
    }
    run.finish(
        a.manifest.as_deref(),
        "ok",
        json!({
            "global_nnz_fraction": report.global_nnz_fraction,
            "max_needle_nnz": report.max_needle_nnz,
        }),
    )?;
    println!(
        "global_nnz_fraction={} max_needle_nnz={}",
        report.global_nnz_fraction, report.max_needle_nnz
    );
    Ok(())
}
