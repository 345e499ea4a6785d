use std::path::PathBuf;

use clap::Args;
use serde_json::json;

use crate::error::{CliError, CliResult};
use crate::manifest::{load_model, Run};

#[derive(Debug, Args)]
pub struct AtomsArgs {
    /// Dictionary to render (CSCD).
    #[arg(long, required_unless_present = "model", conflicts_with = "model")]
    pub dict: Option<PathBuf>,
    /// Model description (JSON); renders an effective dictionary.
    #[arg(long, requires = "effective")]
    pub model: Option<PathBuf>,
    /// Depth of the effective dictionary, 1 being the image-side layer.
    #[arg(long)]
    pub effective: Option<usize>,
    /// Atoms per grid row.
    #[arg(long, default_value_t = 8)]
    pub cols: usize,
    /// Output PGM/PPM.
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

pub fn run(a: AtomsArgs) -> CliResult<()> {
    if a.cols == 0 {
        return Err(CliError::usage("--cols must be positive"));
    }
    let mut run = Run::start(
        "atoms",
        None,
        json!({
            "dict": a.dict.as_ref().map(|p| p.display().to_string()),
            "model": a.model.as_ref().map(|p| p.display().to_string()),
            "effective": a.effective,
            "cols": a.cols,
        }),
    );
    let dict = match (&a.dict, &a.model) {
        (Some(path), _) => run.files.read_dictionary(path)?,
        (None, Some(path)) => {
            let model = load_model(path, &mut run.files)?;
            let depth = a.effective.expect("clap enforces --effective");
            if depth == 0 || depth > model.depth() {
                return Err(CliError::usage(format!(
                    "--effective must lie in 1..={}, got {depth}",
                    model.depth()
                )));
            }
            model
                .effective_dictionary(depth)
                .map_err(CliError::core("effective dictionary"))?
        }
        (None, None) => unreachable!("clap requires --dict or --model"),
    };
    let grid = dict
        .export_atom_grid(a.cols)
        .map_err(|e| CliError::usage(format!("atom grid: {e}")))?;
    run.files.write_image(&a.output, &grid)?;
    run.finish(
        a.manifest.as_deref(),
        "ok",
        json!({
            "atom_count": dict.atom_count(),
            "atom_size": dict.atom_size(),
            "channels": dict.channels(),
            "grid_shape": [grid.height(), grid.width(), grid.channels()],
        }),
    )?;
    println!(
        "{} atoms of size {}x{}x{}",
        dict.atom_count(),
        dict.atom_size(),
        dict.atom_size(),
        dict.channels()
    );
    Ok(())
}
