use std::path::PathBuf;

use clap::Args;
use csc_core::mlcsc::sample_sparse;
use csc_core::sparsify::sparsity_report;
use csc_core::Rng;
use serde_json::json;

use crate::args::RuleArgs;
use crate::error::{CliError, CliResult};
use crate::files::image_name;
use crate::manifest::{load_model, rule_json, Run};

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Model description (JSON).
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Height of the deepest code.
    #[arg(long, default_value_t = 8)]
    pub height: usize,
    /// Width of the deepest code.
    #[arg(long, default_value_t = 8)]
    pub width: usize,
    /// Overrides the deepest layer's rule when sampling.
    #[command(flatten)]
    pub rule: RuleArgs,
    /// Image values are written as `gain * x + offset`.
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub gain: f32,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub offset: f32,
    #[arg(long)]
    pub out_dir: PathBuf,
}

pub fn run(a: SynthArgs) -> CliResult<()> {
    if a.height == 0 || a.width == 0 {
        return Err(CliError::usage("--height and --width must be positive"));
    }
    if !(a.gain.is_finite() && a.offset.is_finite()) {
        return Err(CliError::usage("--gain and --offset must be finite"));
    }
    let mut run = Run::start("synth", Some(a.seed), json!({}));
    let model = load_model(&a.model, &mut run.files)?;
    let deepest = model.deepest();
    let rule = a.rule.resolve(Some(deepest.rule))?;
    run.config = json!({
        "model": a.model.display().to_string(),
        "height": a.height,
        "width": a.width,
        "rule": rule_json(&rule),
        "gain": a.gain,
        "offset": a.offset,
    });

    let mut rng = Rng::new(a.seed).split(csc_core::rng::streams::SAMPLER);
    let sample = sample_sparse(
        a.height,
        a.width,
        deepest.dictionary.atom_count(),
        rule,
        &mut rng,
    )
    .map_err(CliError::core(format!("layer {}", model.depth())))?;
    let cascade = model
        .synthesize_all(&sample.gamma)
        .map_err(CliError::core("synthesis"))?;
    let image = cascade.image.map(|v| a.gain * v + a.offset);
    let report = sparsity_report(&sample.gamma, 0.0);

    let gamma_path = a.out_dir.join("gamma.csct");
    run.files.write_tensor(&gamma_path, &sample.gamma)?;
    run.files.write_tensor(&a.out_dir.join("image.csct"), &image)?;
    if matches!(image.channels(), 1 | 3) {
        run.files
            .write_image(&image_name(&a.out_dir, "image", image.channels()), &image)?;
    }
    run.files
        .write(&a.out_dir.join("sparsity.csv"), report.to_csv().as_bytes())?;

    let (h, w, c) = image.shape();
    let results = json!({
        "support_size": sample.support_size,
        "image_shape": [h, w, c],
        "max_needle_nnz": report.max_needle_nnz,
        "global_nnz_fraction": report.global_nnz_fraction,
    });
    run.finish(Some(&a.out_dir.join("manifest.json")), "ok", results)?;
    println!(
        "synthesized {h}x{w}x{c} image from {} nonzeros",
        sample.support_size
    );
    Ok(())
}
