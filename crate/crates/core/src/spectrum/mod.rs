//! Spectrum ingestion: MGF peak lists, label tables, split files, and a
//! seeded synthetic generator.

mod labels;
mod mgf;
mod synthetic;

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use labels::{load_labels, load_splits, parse_splits};
pub use mgf::{parse_mgf, serialize_mgf};
pub use synthetic::{generate_synthetic, synthetic_label, SyntheticConfig, GAP_SIGNAL_RANGE};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub mz: f64,
    pub intensity: f64,
}

impl Peak {
    pub fn new(mz: f64, intensity: f64) -> Self {
        Peak { mz, intensity }
    }

    pub fn is_valid(&self) -> bool {
        self.mz.is_finite() && self.mz > 0.0 && self.intensity.is_finite() && self.intensity >= 0.0
    }
}

/// A fragment spectrum. Peaks are kept sorted by nondecreasing m/z.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub id: String,
    pub precursor_mz: f64,
    pub peaks: Vec<Peak>,
    pub label: Option<f64>,
}

impl Spectrum {
    /// Builds a spectrum, stable-sorting the peaks by m/z.
    pub fn new(id: impl Into<String>, precursor_mz: f64, mut peaks: Vec<Peak>) -> Self {
        sort_peaks(&mut peaks);
        Spectrum {
            id: id.into(),
            precursor_mz,
            peaks,
            label: None,
        }
    }

    pub fn with_label(mut self, label: f64) -> Self {
        self.label = Some(label);
        self
    }

    pub fn max_mz(&self) -> Option<f64> {
        self.peaks.last().map(|p| p.mz)
    }
}

pub(crate) fn sort_peaks(peaks: &mut [Peak]) {
    peaks.sort_by(|a, b| a.mz.total_cmp(&b.mz));
}

/// Train/validation/test id assignment.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DatasetSplit {
    #[serde(rename = "train")]
    pub train_ids: Vec<String>,
    #[serde(rename = "val")]
    pub val_ids: Vec<String>,
    #[serde(rename = "test")]
    pub test_ids: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitName {
    Train,
    Val,
    Test,
}

impl std::str::FromStr for SplitName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(SplitName::Train),
            "val" | "validation" => Ok(SplitName::Val),
            "test" => Ok(SplitName::Test),
            other => Err(Error::Config(format!("unknown split '{other}'"))),
        }
    }
}

impl DatasetSplit {
    pub fn ids(&self, which: SplitName) -> &[String] {
        match which {
            SplitName::Train => &self.train_ids,
            SplitName::Val => &self.val_ids,
            SplitName::Test => &self.test_ids,
        }
    }

    /// Checks pairwise disjointness and that every id is among `known`.
    pub fn validate<'a>(&self, known: impl IntoIterator<Item = &'a str>) -> Result<()> {
        let known: HashSet<&str> = known.into_iter().collect();
        let mut seen: BTreeMap<&str, &'static str> = BTreeMap::new();
        for (name, ids) in [
            ("train", &self.train_ids),
            ("val", &self.val_ids),
            ("test", &self.test_ids),
        ] {
            for id in ids {
                if let Some(prev) = seen.insert(id.as_str(), name) {
                    return Err(Error::Splits(format!(
                        "id '{id}' appears in both '{prev}' and '{name}'"
                    )));
                }
                if !known.contains(id.as_str()) {
                    return Err(Error::Splits(format!(
                        "id '{id}' in '{name}' is not in the labeled dataset"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Deterministic split of `ids` by position: first `n_train`, next `n_val`, rest test.
    pub fn by_position(ids: &[String], n_train: usize, n_val: usize) -> Result<Self> {
        if n_train + n_val > ids.len() {
            return Err(Error::Splits(format!(
                "requested {n_train}+{n_val} ids but only {} available",
                ids.len()
            )));
        }
        Ok(DatasetSplit {
            train_ids: ids[..n_train].to_vec(),
            val_ids: ids[n_train..n_train + n_val].to_vec(),
            test_ids: ids[n_train + n_val..].to_vec(),
        })
    }
}

/// Attaches labels from `labels` to each spectrum by id. Spectra without an
/// entry keep `label = None`.
pub fn attach_labels(spectra: &mut [Spectrum], labels: &BTreeMap<String, f64>) {
    for s in spectra {
        if let Some(&l) = labels.get(&s.id) {
            s.label = Some(l);
        }
    }
}
