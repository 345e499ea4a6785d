use std::path::PathBuf;

use clap::{Args, ValueEnum};
use csc_core::denoise::dct_dictionary;
use csc_core::rng::streams;
use csc_core::testimage::piecewise_constant;
use csc_core::{ConvDictionary, Rng};
use serde_json::json;

use crate::error::{CliError, CliResult};
use crate::manifest::Run;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DictKind {
    Random,
    Dct,
}

#[derive(Debug, Args)]
pub struct DictgenArgs {
    #[arg(long, value_enum, default_value_t = DictKind::Random)]
    pub kind: DictKind,
    #[arg(long)]
    pub atoms: usize,
    #[arg(long)]
    pub atom_size: usize,
    /// Ignored for dct, which is single-channel.
    #[arg(long, default_value_t = 1)]
    pub channels: usize,
    /// Ignored for dct, which uses stride 1.
    #[arg(long, default_value_t = 1)]
    pub stride: usize,
    /// Ignored for dct, which pads by (n - 1) / 2.
    #[arg(long, default_value_t = 0)]
    pub padding: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

pub fn dictgen(a: DictgenArgs) -> CliResult<()> {
    let dict = match a.kind {
        DictKind::Random => {
            let mut rng = Rng::new(a.seed).split(streams::DICTIONARY_INIT);
            ConvDictionary::random(a.atoms, a.atom_size, a.channels, a.stride, a.padding, &mut rng)
        }
        DictKind::Dct => dct_dictionary(a.atoms, a.atom_size),
    }
    .map_err(|e| CliError::usage(format!("dictionary: {e}")))?;
    let mut run = Run::start(
        "dictgen",
        Some(a.seed),
        json!({
            "kind": match a.kind { DictKind::Random => "random", DictKind::Dct => "dct" },
            "atoms": dict.atom_count(),
            "atom_size": dict.atom_size(),
            "channels": dict.channels(),
            "stride": dict.stride(),
            "padding": dict.padding(),
        }),
    );
    run.files.write_dictionary(&a.output, &dict)?;
    run.finish(a.manifest.as_deref(), "ok", json!({}))?;
    Ok(())
}

#[derive(Debug, Args)]
pub struct TestimageArgs {
    #[arg(long, default_value_t = 64)]
    pub height: usize,
    #[arg(long, default_value_t = 64)]
    pub width: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output PGM.
    #[arg(long)]
    pub output: PathBuf,
}

pub fn testimage(a: TestimageArgs) -> CliResult<()> {
    if a.height == 0 || a.width == 0 {
        return Err(CliError::usage("--height and --width must be positive"));
    }
    let mut run = Run::start("testimage", Some(a.seed), json!({}));
    let img = piecewise_constant(a.height, a.width, a.seed);
    run.files.write_image(&a.output, &img)?;
    Ok(())
}
