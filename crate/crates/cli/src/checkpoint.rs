//! Checkpoint directory: one `SPECTNSR` file per named parameter tensor plus
//! `manifest.json`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use specenc::autodiff::OP_VERSION;
use specenc::models::ParamSpec;
use specenc::tensor::{load_tensors, save_tensors};
use specenc::{ModelConfig, ModelParams, TrainConfig};

use crate::error::{CliError, CliResult};
use crate::runspec::RunSpec;

pub const MANIFEST: &str = "manifest.json";
const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub op_version: u32,
    pub model: ModelConfig,
    /// Parameter tensors in model order; each lives in `<name>.spectnsr`.
    pub tensors: Vec<ParamSpec>,
    pub seed: u64,
    pub train: TrainConfig,
    pub config_hash: String,
    /// The run file the checkpoint was trained from, with resolved paths.
    pub runspec: RunSpec,
}

pub fn tensor_file(name: &str) -> String {
    format!("{name}.spectnsr")
}

pub fn save(dir: &Path, manifest: &Manifest, params: &ModelParams<f32>) -> CliResult<()> {
    std::fs::create_dir_all(dir)?;
    for entry in params.entries() {
        save_tensors(&dir.join(tensor_file(&entry.name)), std::slice::from_ref(&entry.tensor))?;
    }
    let mut json = serde_json::to_string_pretty(manifest)?;
    json.push('\n');
    std::fs::write(dir.join(MANIFEST), json)?;
    Ok(())
}

pub fn load(dir: &Path) -> CliResult<(Manifest, ModelParams<f32>)> {
    let path: PathBuf = dir.join(MANIFEST);
    let text = std::fs::read_to_string(&path)
        .map_err(|e| CliError::validation(format!("no checkpoint at {}: {e}", dir.display())))?;
    let manifest: Manifest = serde_json::from_str(&text)
        .map_err(|e| CliError::validation(format!("{}: {e}", path.display())))?;
    if manifest.op_version != OP_VERSION {
        return Err(CliError::validation(format!(
            "checkpoint op version {} differs from this build ({OP_VERSION})",
            manifest.op_version
        )));
    }
    let specs = manifest.model.param_specs();
    if specs != manifest.tensors {
        return Err(CliError::validation("manifest tensor list does not match its model config"));
    }
    let mut params = ModelParams::new();
    for spec in &specs {
        let file = dir.join(tensor_file(&spec.name));
        let mut tensors = load_tensors::<f32>(&file).map_err(|e| CliError::from(e).context(file.display()))?;
        if tensors.len() != 1 {
            return Err(CliError::validation(format!("{} holds {} tensors, expected 1", file.display(), tensors.len())));
        }
        params.push(spec.name.clone(), tensors.remove(0), spec.init)?;
    }
    params.check_against(&specs)?;
    Ok((manifest, params))
}

pub fn new_manifest(model: &ModelConfig, seed: u64, train: &TrainConfig, hash: &str, runspec: &RunSpec) -> Manifest {
    Manifest {
        format_version: FORMAT_VERSION,
        op_version: OP_VERSION,
        model: model.clone(),
        tensors: model.param_specs(),
        seed,
        train: train.clone(),
        config_hash: hash.to_string(),
        runspec: runspec.clone(),
    }
}
