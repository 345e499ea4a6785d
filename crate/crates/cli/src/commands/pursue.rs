use std::path::PathBuf;

use clap::{Args, ValueEnum};
use csc_core::pursuit::{iht, ista};
use csc_core::{PursuitConfig, StepSize};
use serde_json::json;

use crate::args::{parse_step, step_json, RuleArgs};
use crate::error::{CliError, CliResult};
use crate::files::sha256_hex;
use crate::manifest::{rule_json, Run};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Algorithm {
    Ista,
    Iht,
}

#[derive(Debug, Args)]
pub struct PursueArgs {
    /// Dictionary (CSCD).
    #[arg(long)]
    pub dict: PathBuf,
    /// Signal to code: CSCT tensor or PGM/PPM image.
    #[arg(long)]
    pub input: PathBuf,
    #[command(flatten)]
    pub rule: RuleArgs,
    /// Defaults to ista for the l1 rule and iht otherwise.
    #[arg(long, value_enum)]
    pub algo: Option<Algorithm>,
    #[arg(long, default_value_t = 100)]
    pub iters: usize,
    #[arg(long, default_value = "auto", value_parser = parse_step)]
    pub step: StepSize,
    /// Stop once the relative objective change falls below this (0 disables).
    #[arg(long, default_value_t = 0.0)]
    pub tol: f64,
    #[arg(long, default_value_t = 50)]
    pub power_iters: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output code (CSCT).
    #[arg(long)]
    pub output: PathBuf,
    /// Objective trace (CSV).
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Reconstruction `D * gamma` (CSCT).
    #[arg(long)]
    pub recon: Option<PathBuf>,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

pub fn run(a: PursueArgs) -> CliResult<()> {
    let rule = a.rule.require()?;
    let algo = a.algo.unwrap_or(if rule.is_projection() {
        Algorithm::Iht
    } else {
        Algorithm::Ista
    });
    if !(a.tol >= 0.0 && a.tol.is_finite()) {
        return Err(CliError::usage("--tol must be a nonnegative number"));
    }
    if a.power_iters == 0 {
        return Err(CliError::usage("--power-iters must be positive"));
    }
    let mut run = Run::start("pursue", Some(a.seed), json!({}));
    let dict_bytes = run.files.read(&a.dict)?;
    let dict = csc_core::io::decode_cscd(&dict_bytes)
        .map_err(CliError::core(a.dict.display().to_string()))?;
    let x = run.files.read_signal(&a.input)?;

    let mut cfg = PursuitConfig::new(rule, a.iters)
        .with_step(a.step)
        .with_tol(a.tol)
        .with_seed(a.seed);
    cfg.power_iters = a.power_iters;
    run.config = json!({
        "dict": a.dict.display().to_string(),
        "dict_sha256": sha256_hex(&dict_bytes),
        "input": a.input.display().to_string(),
        "algo": match algo { Algorithm::Ista => "ista", Algorithm::Iht => "iht" },
        "rule": rule_json(&rule),
        "iters": a.iters,
        "step": step_json(a.step),
        "tol": a.tol,
        "power_iters": a.power_iters,
        "seed": a.seed,
    });

    let traced = match algo {
        Algorithm::Ista => ista(&dict, &x, &cfg),
        Algorithm::Iht => iht(&dict, &x, &cfg),
    };
    let trace = match traced {
        Ok(t) => t,
        Err(e) => {
            run.finish(a.manifest.as_deref(), "failed", json!({ "error": e.to_string() }))?;
            return Err(match e {
                csc_core::CscError::Divergence { .. } => CliError::Core {
                    context: "pursuit".into(),
                    source: e,
                },
                other => CliError::usage(format!("pursuit: {other}")),
            });
        }
    };

    run.files.write_tensor(&a.output, &trace.gamma)?;
    if let Some(path) = &a.trace {
        let header = serde_json::to_string(&run.config).expect("config serializes");
        let text = format!("# {header}\n{}", trace.to_csv_rows());
        run.files.write(path, text.as_bytes())?;
    }
    if let Some(path) = &a.recon {
        let recon = dict
            .synthesize(&trace.gamma)
            .map_err(CliError::core("reconstruction"))?;
        run.files.write_tensor(path, &recon)?;
    }
    run.finish(
        a.manifest.as_deref(),
        "ok",
        json!({
            "step": trace.step,
            "iterations": trace.iterations_run,
            "initial_objective": trace.initial_objective,
            "final_objective": trace.final_objective(),
            "nonzeros": trace.gamma.count_nonzero(0.0),
        }),
    )?;
    println!(
        "objective {} -> {} in {} iterations",
        trace.initial_objective,
        trace.final_objective(),
        trace.iterations_run
    );
    Ok(())
}
