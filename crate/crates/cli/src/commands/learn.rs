use std::path::PathBuf;

use clap::Args;
use csc_core::denoise::{learn_dictionary_traced, LearnConfig};
use csc_core::rng::streams;
use csc_core::Rng;
use serde_json::json;

use crate::args::RuleArgs;
use crate::error::{CliError, CliResult};
use crate::manifest::{rule_json, Run};

#[derive(Debug, Args)]
pub struct LearnArgs {
    /// Training signal: PGM/PPM image or CSCT tensor.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value_t = 64)]
    pub atoms: usize,
    #[arg(long, default_value_t = 8)]
    pub atom_size: usize,
    #[command(flatten)]
    pub rule: RuleArgs,
    #[arg(long, default_value_t = 10)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0.5)]
    pub learn_rate: f64,
    /// Pursuit iterations per epoch.
    #[arg(long, default_value_t = 5)]
    pub sc_iters: usize,
    #[arg(long, default_value_t = 20)]
    pub power_iters: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Learned dictionary (CSCD).
    #[arg(long)]
    pub output: PathBuf,
    /// Per-epoch objective trace (CSV).
    #[arg(long)]
    pub trace: Option<PathBuf>,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

pub fn run(a: LearnArgs) -> CliResult<()> {
    let rule = a.rule.require()?;
    if !(a.learn_rate > 0.0 && a.learn_rate.is_finite()) {
        return Err(CliError::usage("--learn-rate must be positive"));
    }
    if a.power_iters == 0 || a.sc_iters == 0 {
        return Err(CliError::usage("--sc-iters and --power-iters must be positive"));
    }
    let mut cfg = LearnConfig::new(a.atoms, a.atom_size, rule);
    cfg.epochs = a.epochs;
    cfg.learn_rate = a.learn_rate;
    cfg.sc_iters = a.sc_iters;
    cfg.power_iters = a.power_iters;
    let mut run = Run::start(
        "learn",
        Some(a.seed),
        json!({
            "input": a.input.display().to_string(),
            "atoms": cfg.atoms,
            "atom_size": cfg.atom_size,
            "rule": rule_json(&rule),
            "epochs": cfg.epochs,
            "learn_rate": cfg.learn_rate,
            "sc_iters": cfg.sc_iters,
            "power_iters": cfg.power_iters,
        }),
    );
    let x = run.files.read_signal(&a.input)?;
    let mut rng = Rng::new(a.seed).split(streams::DICTIONARY_INIT);
    let outcome = learn_dictionary_traced(&x, &cfg, &mut rng).map_err(|e| match e {
        csc_core::CscError::Divergence { .. } => CliError::Core {
            context: "learn".into(),
            source: e,
        },
        other => CliError::usage(format!("learn: {other}")),
    })?;
    run.files.write_dictionary(&a.output, &outcome.dictionary)?;
    if let Some(path) = &a.trace {
        let mut text = String::from("epoch,objective\n");
        for (i, o) in outcome.epoch_objectives.iter().enumerate() {
            text.push_str(&format!("{},{o}\n", i + 1));
        }
        run.files.write(path, text.as_bytes())?;
    }
    let last = outcome.epoch_objectives.last().copied();
    run.finish(
        a.manifest.as_deref(),
        "ok",
        json!({ "epoch_objectives": outcome.epoch_objectives }),
    )?;
    match last {
        Some(o) => println!("learned {} atoms, final objective {o}", cfg.atoms),
        None => println!("learned {} atoms", cfg.atoms),
    }
    Ok(())
}
