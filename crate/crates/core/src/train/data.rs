use std::collections::BTreeMap;

use crate::encode::{encode, BinConfig, Encoded, Representation};
use crate::error::{Error, Result};
use crate::models::Batch;
use crate::rng;
use crate::scalar::Scalar;
use crate::spectrum::{DatasetSplit, SplitName, Spectrum};

/// One encoded spectrum with its regression target.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub id: String,
    pub input: Encoded,
    pub label: f64,
}

/// Encoded train/val/test partitions.
#[derive(Debug, Clone, Default)]
pub struct PreparedData {
    pub train: Vec<Example>,
    pub val: Vec<Example>,
    pub test: Vec<Example>,
    /// Human-readable notes (skipped spectra, dropped peaks).
    pub warnings: Vec<String>,
}

impl PreparedData {
    pub fn split(&self, which: SplitName) -> &[Example] {
        match which {
            SplitName::Train => &self.train,
            SplitName::Val => &self.val,
            SplitName::Test => &self.test,
        }
    }
}

/// Resolves split ids against `spectra`, checks labels, and encodes.
///
/// Every referenced id must exist and carry a label; that is checked for all
/// three partitions before anything is encoded. Spectra without peaks cannot
/// be normalized and are skipped with a warning.
pub fn prepare_dataset(
    spectra: &[Spectrum],
    split: &DatasetSplit,
    repr: Representation,
    bins: &BinConfig,
) -> Result<PreparedData> {
    let by_id: BTreeMap<&str, &Spectrum> = spectra.iter().map(|s| (s.id.as_str(), s)).collect();
    if by_id.len() != spectra.len() {
        return Err(Error::Dataset("duplicate spectrum ids".into()));
    }
    split.validate(by_id.keys().copied())?;
    let missing: Vec<&str> = [SplitName::Train, SplitName::Val, SplitName::Test]
        .iter()
        .flat_map(|&w| split.ids(w))
        .filter(|id| by_id[id.as_str()].label.is_none())
        .map(String::as_str)
        .collect();
    if !missing.is_empty() {
        let shown: Vec<&str> = missing.iter().take(5).copied().collect();
        return Err(Error::Dataset(format!(
            "{} split id(s) have no label, e.g. {}",
            missing.len(),
            shown.join(", ")
        )));
    }

    let mut out = PreparedData::default();
    let mut dropped = 0usize;
    for which in [SplitName::Train, SplitName::Val, SplitName::Test] {
        let mut examples = Vec::with_capacity(split.ids(which).len());
        for id in split.ids(which) {
            let s = by_id[id.as_str()];
            if s.peaks.is_empty() {
                out.warnings.push(format!("spectrum '{id}' has no peaks; skipped"));
                continue;
            }
            let (input, w) = encode(s, repr, bins)?;
            dropped += w.dropped_peaks;
            examples.push(Example { id: id.clone(), input, label: s.label.unwrap_or_default() });
        }
        match which {
            SplitName::Train => out.train = examples,
            SplitName::Val => out.val = examples,
            SplitName::Test => out.test = examples,
        }
    }
    if dropped > 0 {
        out.warnings.push(format!("{dropped} peak(s) fell outside the bin range and were dropped"));
    }
    Ok(out)
}

/// Index groups for one epoch: a seeded shuffle of `0..n`, cut into chunks of
/// `batch_size` (the last one may be short).
pub fn batch_order(n: usize, batch_size: usize, seed: u64, epoch: usize) -> Vec<Vec<usize>> {
    let mut idx: Vec<usize> = (0..n).collect();
    let mut r = rng::seeded(rng::derive_seed(seed, epoch as u64));
    rng::shuffle(&mut idx, &mut r);
    idx.chunks(batch_size.max(1)).map(<[usize]>::to_vec).collect()
}

/// Stacks, pads, or concatenates the selected examples into one batch.
pub fn collate<T: Scalar>(examples: &[Example], idx: &[usize]) -> Result<Batch<T>> {
    let first = idx
        .first()
        .map(|&i| &examples[i].input)
        .ok_or_else(|| Error::Dataset("empty batch".into()))?;
    let mismatch = || Error::Dataset("batch mixes representations".into());
    match first {
        Encoded::Binned(_) => {
            let items = idx
                .iter()
                .map(|&i| match &examples[i].input {
                    Encoded::Binned(b) => Ok(b),
                    _ => Err(mismatch()),
                })
                .collect::<Result<Vec<_>>>()?;
            Batch::binned(&items)
        }
        Encoded::Set(_) => {
            let items = idx
                .iter()
                .map(|&i| match &examples[i].input {
                    Encoded::Set(s) => Ok(s),
                    _ => Err(mismatch()),
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(Batch::sets(&items))
        }
        Encoded::Graph(_) => {
            let items = idx
                .iter()
                .map(|&i| match &examples[i].input {
                    Encoded::Graph(g) => Ok(g),
                    _ => Err(mismatch()),
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(Batch::graphs(&items))
        }
    }
}

/// One epoch's batches, each with the example indices it holds.
pub fn make_batches<T: Scalar>(
    examples: &[Example],
    batch_size: usize,
    seed: u64,
    epoch: usize,
) -> Result<Vec<(Vec<usize>, Batch<T>)>> {
    if examples.is_empty() {
        return Err(Error::Dataset("cannot batch an empty dataset".into()));
    }
    batch_order(examples.len(), batch_size, seed, epoch)
        .into_iter()
        .map(|idx| collate(examples, &idx).map(|b| (idx, b)))
        .collect()
}
