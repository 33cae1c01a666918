//! JSON run file: data source, encoder, model, training, outputs.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use specenc::encode::{BinConfig, Representation};
use specenc::spectrum::{self, DatasetSplit, Spectrum, SyntheticConfig};
use specenc::{ModelConfig, TrainConfig};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    pub data: DataSpec,
    pub representation: Representation,
    #[serde(default)]
    pub bins: BinConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelConfig>,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mgf_path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synthetic: Option<SyntheticConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels_path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub splits_path: Option<PathBuf>,
    /// Positional split used when no splits file is given: the first `train`
    /// spectra, then `val`, the rest test. Defaults to 70/15/15.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split_sizes: Option<SplitSizes>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitSizes {
    pub train: usize,
    pub val: usize,
}

/// Spectra plus the notes produced while loading them.
pub struct LoadedData {
    pub spectra: Vec<Spectrum>,
    pub warnings: Vec<String>,
}

impl RunSpec {
    /// Reads and validates a run file; relative paths resolve against its
    /// directory.
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::validation(format!("cannot read spec {}: {e}", path.display())))?;
        let mut spec: RunSpec = serde_json::from_str(&text)
            .map_err(|e| CliError::validation(format!("spec {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        spec.resolve_paths(base);
        Ok(spec)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut Option<PathBuf>| {
            if let Some(x) = p.as_mut() {
                if x.is_relative() {
                    *x = base.join(&*x);
                }
            }
        };
        fix(&mut self.data.mgf_path);
        fix(&mut self.data.labels_path);
        fix(&mut self.data.splits_path);
        fix(&mut self.output_dir);
    }

    /// Structural checks that need no file access.
    pub fn validate(&self) -> CliResult<()> {
        match (&self.data.mgf_path, &self.data.synthetic) {
            (Some(_), Some(_)) => {
                return Err(CliError::validation("data: give either mgf_path or synthetic, not both"))
            }
            (None, None) => return Err(CliError::validation("data: one of mgf_path or synthetic is required")),
            (None, Some(s)) => s.validate()?,
            _ => {}
        }
        if self.seeds.is_empty() {
            return Err(CliError::validation("seeds must list at least one seed"));
        }
        if self.seeds.iter().collect::<BTreeSet<_>>().len() != self.seeds.len() {
            return Err(CliError::validation("seeds must be distinct"));
        }
        if self.representation == Representation::Binned {
            self.bins.validate()?;
        }
        if let Some(model) = &self.model {
            model.validate()?;
            let want = model.kind().representation();
            if want != self.representation {
                return Err(CliError::validation(format!(
                    "model '{}' consumes {want} inputs but representation is {}",
                    model.kind(),
                    self.representation
                )));
            }
            if let ModelConfig::Mlp(m) = model {
                if m.input_dim != self.bins.n_bins() {
                    return Err(CliError::validation(format!(
                        "mlp input_dim {} does not match the {} bins of the encoder",
                        m.input_dim,
                        self.bins.n_bins()
                    )));
                }
            }
        }
        self.train.validate()?;
        Ok(())
    }

    pub fn model(&self) -> CliResult<&ModelConfig> {
        self.model.as_ref().ok_or_else(|| CliError::validation("spec has no model section"))
    }

    /// Loads spectra and attaches labels, if a labels file is given.
    pub fn load_data(&self) -> CliResult<LoadedData> {
        let mut warnings = Vec::new();
        let mut spectra = match (&self.data.mgf_path, &self.data.synthetic) {
            (Some(path), _) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| CliError::runtime(format!("cannot read {}: {e}", path.display())))?;
                spectrum::parse_mgf(&text).map_err(|e| CliError::from(e).context(path.display()))?
            }
            (None, Some(cfg)) => spectrum::generate_synthetic(cfg)?,
            (None, None) => return Err(CliError::validation("data: no source")),
        };
        if let Some(path) = &self.data.labels_path {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::runtime(format!("cannot read {}: {e}", path.display())))?;
            let labels = spectrum::load_labels(&text).map_err(|e| CliError::from(e).context(path.display()))?;
            let known: BTreeSet<&str> = spectra.iter().map(|s| s.id.as_str()).collect();
            let orphans = labels.keys().filter(|k| !known.contains(k.as_str())).count();
            if orphans > 0 {
                warnings.push(format!("{orphans} label(s) refer to unknown spectrum ids"));
            }
            spectrum::attach_labels(&mut spectra, &labels);
        }
        Ok(LoadedData { spectra, warnings })
    }

    /// The train/val/test partition for `spectra`.
    pub fn split(&self, spectra: &[Spectrum]) -> CliResult<DatasetSplit> {
        if let Some(path) = &self.data.splits_path {
            return spectrum::load_splits(path).map_err(|e| CliError::from(e).context(path.display()));
        }
        let ids: Vec<String> = spectra.iter().map(|s| s.id.clone()).collect();
        let sizes = self.data.split_sizes.unwrap_or(SplitSizes {
            train: ids.len() * 70 / 100,
            val: ids.len() * 15 / 100,
        });
        Ok(DatasetSplit::by_position(&ids, sizes.train, sizes.val)?)
    }
}
