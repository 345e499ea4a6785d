//! Run manifests and model description files.

use std::path::Path;
use std::time::Instant;

use csc_core::{Layer, MlCscModel, SparsityRule};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{CliError, CliResult};
use crate::files::{write_raw, FileLog, FileRecord};

pub const TOOL: &str = "csc-forge";

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub subcommand: &'static str,
    pub status: &'static str,
    pub seed: Option<u64>,
    pub threads: usize,
    pub config: Value,
    pub inputs: Vec<FileRecord>,
    pub outputs: Vec<FileRecord>,
    pub results: Value,
    pub duration_secs: f64,
}

/// Collects everything a manifest needs while a subcommand runs.
pub struct Run {
    pub subcommand: &'static str,
    pub seed: Option<u64>,
    pub config: Value,
    pub files: FileLog,
    started: Instant,
}

impl Run {
    pub fn start(subcommand: &'static str, seed: Option<u64>, config: Value) -> Self {
        Run {
            subcommand,
            seed,
            config,
            files: FileLog::default(),
            started: Instant::now(),
        }
    }

    pub fn manifest(&self, status: &'static str, results: Value) -> RunManifest {
        RunManifest {
            tool: TOOL,
            version: env!("CARGO_PKG_VERSION"),
            subcommand: self.subcommand,
            status,
            seed: self.seed,
            threads: rayon::current_num_threads(),
            config: self.config.clone(),
            inputs: self.files.inputs.clone(),
            outputs: self.files.outputs.clone(),
            results,
            duration_secs: self.started.elapsed().as_secs_f64(),
        }
    }

    /// Writes the manifest for this run. The manifest lists every other
    /// output but not itself.
    pub fn finish(&self, path: Option<&Path>, status: &'static str, results: Value) -> CliResult<()> {
        if let Some(path) = path {
            let manifest = self.manifest(status, results);
            let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
            text.push('\n');
            write_raw(path, text.as_bytes())?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum RuleSpec {
    L1 { lambda: f64 },
    L0 { k: usize },
    L0inf { k: usize },
}

impl From<RuleSpec> for SparsityRule {
    fn from(r: RuleSpec) -> Self {
        match r {
            RuleSpec::L1 { lambda } => SparsityRule::L1Penalty { lambda },
            RuleSpec::L0 { k } => SparsityRule::L0Global { k },
            RuleSpec::L0inf { k } => SparsityRule::L0InfNeedle { k },
        }
    }
}

pub fn rule_json(rule: &SparsityRule) -> Value {
    match *rule {
        SparsityRule::L1Penalty { lambda } => json!({ "kind": "l1", "lambda": lambda }),
        SparsityRule::L0Global { k } => json!({ "kind": "l0", "k": k }),
        SparsityRule::L0InfNeedle { k } => json!({ "kind": "l0inf", "k": k }),
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    layers: Vec<LayerFile>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct LayerFile {
    dictionary: String,
    rule: RuleSpec,
}

/// Reads a model description: layers listed from the image side inward,
/// dictionary paths relative to the model file.
pub fn load_model(path: &Path, files: &mut FileLog) -> CliResult<MlCscModel> {
    let bytes = files.read(path)?;
    let parsed: ModelFile = serde_json::from_slice(&bytes)
        .map_err(|e| CliError::usage(format!("{}: invalid model file: {e}", path.display())))?;
    if parsed.layers.is_empty() {
        return Err(CliError::usage(format!("{}: model has no layers", path.display())));
    }
    let base = path.parent().unwrap_or_else(|| Path::new(""));
    let mut layers = Vec::with_capacity(parsed.layers.len());
    for (i, layer) in parsed.layers.iter().enumerate() {
        let dict = files
            .read_dictionary(&base.join(&layer.dictionary))
            .map_err(|e| match e {
                CliError::Core { context, source } => CliError::Core {
                    context: format!("layer {}: {context}", i + 1),
                    source,
                },
                other => other,
            })?;
        let rule = SparsityRule::from(layer.rule);
        rule.validate()
            .map_err(CliError::core(format!("layer {} rule", i + 1)))?;
        layers.push(Layer::new(dict, rule));
    }
    MlCscModel::new(layers).map_err(CliError::core(path.display().to_string()))
}
