use std::path::PathBuf;

use clap::Args;
use csc_core::sparsify::sparsity_report;
use csc_core::SparsityRule;
use serde_json::json;

use crate::args::RuleArgs;
use crate::error::{CliError, CliResult};
use crate::manifest::{rule_json, Run};

#[derive(Debug, Args)]
pub struct ProjectArgs {
    /// Input tensor (CSCT).
    #[arg(long)]
    pub input: PathBuf,
    #[command(flatten)]
    pub rule: RuleArgs,
    /// Output tensor (CSCT).
    #[arg(long)]
    pub output: PathBuf,
    /// Optional run manifest.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

/// Projection for the l0 rules, soft thresholding at lambda for l1.
pub fn run(a: ProjectArgs) -> CliResult<()> {
    let rule = a.rule.require()?;
    let mut run = Run::start(
        "project",
        None,
        json!({
            "input": a.input.display().to_string(),
            "output": a.output.display().to_string(),
            "rule": rule_json(&rule),
        }),
    );
    let gamma = run.files.read_tensor(&a.input)?;
    let threshold = match rule {
        SparsityRule::L1Penalty { lambda } => lambda,
        _ => 0.0,
    };
    let projected = rule
        .apply(&gamma, threshold)
        .map_err(CliError::core("project"))?;
    run.files.write_tensor(&a.output, &projected)?;
    let report = sparsity_report(&projected, 0.0);
    run.finish(
        a.manifest.as_deref(),
        "ok",
        json!({
            "nonzeros": projected.count_nonzero(0.0),
            "max_needle_nnz": report.max_needle_nnz,
        }),
    )?;
    println!(
        "{} -> {} nonzeros (max per needle {})",
        gamma.count_nonzero(0.0),
        projected.count_nonzero(0.0),
        report.max_needle_nnz
    );
    Ok(())
}
