use std::path::PathBuf;

use clap::Args;
use csc_core::denoise::{
    dct_dictionary, denoise, DenoiseConfig, DenoiseRun, DictionarySource, LearnConfig,
    DEFAULT_EMA_DECAY, DEFAULT_SIGMA,
};
use csc_core::{SparsityRule, StepSize};
use serde_json::{json, Value};

use crate::args::{parse_step, step_json, RuleArgs};
use crate::error::{CliError, CliResult};
use crate::files::image_name;
use crate::manifest::{rule_json, Run};

#[derive(Debug, Args)]
pub struct DenoiseArgs {
    /// Clean 8-bit PGM or PPM image.
    #[arg(long)]
    pub input: PathBuf,
    /// Noise standard deviation on the 0-255 scale.
    #[arg(long, default_value_t = DEFAULT_SIGMA, allow_negative_numbers = true)]
    pub sigma: f64,
    #[command(flatten)]
    pub rule: RuleArgs,
    #[arg(long, default_value_t = 200)]
    pub iters: usize,
    /// Decay of the running average of reconstructions.
    #[arg(long, default_value_t = DEFAULT_EMA_DECAY, allow_negative_numbers = true)]
    pub ema: f64,
    /// Pursuit step: `auto` or a fixed value.
    #[arg(long, default_value = "auto", value_parser = parse_step)]
    pub step: StepSize,
    #[arg(long, default_value_t = 50)]
    pub power_iters: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Fixed dictionary (CSCD). Without it a DCT dictionary is used unless
    /// `--learn` is given.
    #[arg(long, conflicts_with = "learn")]
    pub dict: Option<PathBuf>,
    /// Learn the dictionary from the noisy image first.
    #[arg(long)]
    pub learn: bool,
    /// Atom count for the DCT or learned dictionary.
    #[arg(long, default_value_t = 64)]
    pub atoms: usize,
    /// Atom side length for the DCT or learned dictionary.
    #[arg(long, default_value_t = 8)]
    pub atom_size: usize,
    #[arg(long, default_value_t = 10)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0.5)]
    pub learn_rate: f64,
    #[arg(long, default_value_t = 5)]
    pub sc_iters: usize,
    #[arg(long)]
    pub out_dir: PathBuf,
}

fn validate(a: &DenoiseArgs) -> CliResult<()> {
    if !(a.sigma >= 0.0 && a.sigma.is_finite()) {
        return Err(CliError::usage(format!(
            "--sigma must be a nonnegative number, got {}",
            a.sigma
        )));
    }
    if !(0.0..1.0).contains(&a.ema) {
        return Err(CliError::usage(format!("--ema must lie in [0, 1), got {}", a.ema)));
    }
    if a.iters == 0 {
        return Err(CliError::usage("--iters must be positive"));
    }
    if a.power_iters == 0 {
        return Err(CliError::usage("--power-iters must be positive"));
    }
    if a.learn && !(a.learn_rate > 0.0 && a.learn_rate.is_finite()) {
        return Err(CliError::usage("--learn-rate must be positive"));
    }
    Ok(())
}

pub fn run(a: DenoiseArgs) -> CliResult<()> {
    validate(&a)?;
    let rule = a.rule.resolve(Some(SparsityRule::L0InfNeedle { k: 1 }))?;
    let mut config = json!({
        "input": a.input.display().to_string(),
        "sigma": a.sigma,
        "rule": rule_json(&rule),
        "iters": a.iters,
        "ema": a.ema,
        "step": step_json(a.step),
        "power_iters": a.power_iters,
    });
    let mut run = Run::start("denoise", Some(a.seed), Value::Null);
    let clean = run.files.read_image(&a.input)?;

    let source = if let Some(path) = &a.dict {
        config["dictionary"] = json!({ "kind": "file", "path": path.display().to_string() });
        DictionarySource::Fixed(run.files.read_dictionary(path)?)
    } else if a.learn {
        let mut lc = LearnConfig::new(a.atoms, a.atom_size, rule);
        lc.epochs = a.epochs;
        lc.learn_rate = a.learn_rate;
        lc.sc_iters = a.sc_iters;
        config["dictionary"] = json!({
            "kind": "learned",
            "atoms": lc.atoms,
            "atom_size": lc.atom_size,
            "epochs": lc.epochs,
            "learn_rate": lc.learn_rate,
            "sc_iters": lc.sc_iters,
            "power_iters": lc.power_iters,
        });
        DictionarySource::Learned(lc)
    } else {
        config["dictionary"] = json!({ "kind": "dct", "atoms": a.atoms, "atom_size": a.atom_size });
        let d = dct_dictionary(a.atoms, a.atom_size)
            .map_err(|e| CliError::usage(format!("--atoms/--atom-size: {e}")))?;
        DictionarySource::Fixed(d)
    };
    run.config = config;

    let mut cfg = DenoiseConfig::new(rule, a.iters, a.seed);
    cfg.sigma = a.sigma;
    cfg.ema_decay = a.ema;
    cfg.step = a.step;
    cfg.power_iters = a.power_iters;

    let manifest_path = a.out_dir.join("manifest.json");
    let trace_path = a.out_dir.join("trace.csv");
    match denoise(&clean, &cfg, &source) {
        Ok(out) => {
            let c = clean.channels();
            run.files
                .write_image(&image_name(&a.out_dir, "noisy", c), &out.noisy)?;
            for (stem, best) in [
                ("best_single", &out.best_single),
                ("best_average", &out.best_average),
            ] {
                if let Some(b) = best {
                    run.files
                        .write_image(&image_name(&a.out_dir, stem, c), &b.image)?;
                }
            }
            run.files.write(&trace_path, out.trace_csv().as_bytes())?;
            run.finish(Some(&manifest_path), "ok", results(&out))?;
            let avg = out.best_average.as_ref().map_or(f64::NAN, |b| b.psnr);
            println!(
                "noisy {:.2} dB, best average {avg:.2} dB after {} iterations",
                out.noisy_psnr,
                out.iterations()
            );
            Ok(())
        }
        Err(failure) => {
            let mut res = json!({ "error": failure.error.to_string() });
            if let Some(partial) = &failure.partial {
                run.files.write(&trace_path, partial.trace_csv().as_bytes())?;
                res = results(partial);
                res["error"] = json!(failure.error.to_string());
            }
            run.finish(Some(&manifest_path), "failed", res)?;
            Err(CliError::Core {
                context: "denoise".into(),
                source: failure.error,
            })
        }
    }
}

fn results(out: &DenoiseRun) -> Value {
    let best = |b: &Option<csc_core::denoise::BestImage>| {
        b.as_ref()
            .map(|b| json!({ "iteration": b.iteration, "psnr": b.psnr }))
    };
    json!({
        "noisy_psnr": out.noisy_psnr,
        "iterations": out.iterations(),
        "best_single": best(&out.best_single),
        "best_average": best(&out.best_average),
    })
}
