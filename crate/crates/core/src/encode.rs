//! Shared preprocessing and the three spectrum representations.
//!
//! Preprocessing is max-normalization of intensities followed by insertion
//! of the precursor as a pseudo-peak with intensity [`PRECURSOR_INTENSITY`].

use serde::{Deserialize, Serialize};

use crate::spectrum::{Peak, Spectrum};
use crate::tensor::Tensor;
use crate::{Error, Result};

pub const PRECURSOR_INTENSITY: f64 = 2.0;

/// Divides every intensity by the maximum so the largest becomes 1.0.
///
/// Peaks are also put into canonical order (m/z, then intensity) so that
/// the result does not depend on the order of tied peaks in the input.
pub fn normalize_intensities(s: &Spectrum) -> Result<Spectrum> {
    if s.peaks.is_empty() {
        return Err(Error::Encode(format!("spectrum '{}' has no peaks", s.id)));
    }
    let max = s.peaks.iter().map(|p| p.intensity).fold(0.0, f64::max);
    if !(max > 0.0) {
        return Err(Error::Encode(format!("spectrum '{}' has only zero intensities", s.id)));
    }
    let mut peaks: Vec<Peak> = s
        .peaks
        .iter()
        .map(|p| Peak::new(p.mz, if p.intensity == max { 1.0 } else { p.intensity / max }))
        .collect();
    peaks.sort_by(|a, b| a.mz.total_cmp(&b.mz).then(a.intensity.total_cmp(&b.intensity)));
    Ok(Spectrum {
        peaks,
        ..s.clone()
    })
}

/// Inserts `(precursor_mz, 2.0)` keeping m/z order; the precursor goes after
/// any peak with an equal m/z.
pub fn insert_precursor(s: &Spectrum) -> Spectrum {
    let at = s.peaks.partition_point(|p| p.mz <= s.precursor_mz);
    let mut peaks = Vec::with_capacity(s.peaks.len() + 1);
    peaks.extend_from_slice(&s.peaks[..at]);
    peaks.push(Peak::new(s.precursor_mz, PRECURSOR_INTENSITY));
    peaks.extend_from_slice(&s.peaks[at..]);
    Spectrum {
        peaks,
        ..s.clone()
    }
}

/// `insert_precursor(normalize_intensities(s))`.
pub fn preprocess(s: &Spectrum) -> Result<Spectrum> {
    normalize_intensities(s).map(|n| insert_precursor(&n))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BinAggregation {
    #[default]
    Sum,
    Max,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BinConfig {
    pub min_mz: f64,
    pub max_mz: f64,
    pub bin_width: f64,
    pub aggregation: BinAggregation,
}

impl Default for BinConfig {
    fn default() -> Self {
        BinConfig {
            min_mz: 0.0,
            max_mz: 10_000.0,
            bin_width: 1.0,
            aggregation: BinAggregation::Sum,
        }
    }
}

impl BinConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.min_mz.is_finite() && self.max_mz.is_finite() && self.min_mz < self.max_mz) {
            return Err(Error::Config(format!(
                "bin range needs min_mz < max_mz, got {}..{}",
                self.min_mz, self.max_mz
            )));
        }
        if !(self.bin_width.is_finite() && self.bin_width > 0.0) {
            return Err(Error::Config(format!("bin_width {} must be > 0", self.bin_width)));
        }
        Ok(())
    }

    pub fn n_bins(&self) -> usize {
        ((self.max_mz - self.min_mz) / self.bin_width).ceil() as usize
    }

    fn bin_of(&self, mz: f64) -> Option<usize> {
        if !(mz >= self.min_mz && mz < self.max_mz) {
            return None;
        }
        let idx = ((mz - self.min_mz) / self.bin_width).floor() as usize;
        Some(idx.min(self.n_bins() - 1))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BinnedVector {
    pub values: Vec<f32>,
}

/// Peaks that fell outside the bin range.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct BinWarnings {
    pub dropped_peaks: usize,
}

/// Bins a preprocessed spectrum. Peaks with `min_mz <= mz < max_mz` land in
/// bin `floor((mz - min_mz) / bin_width)`; the rest are tallied as dropped.
pub fn encode_binned(s: &Spectrum, cfg: &BinConfig) -> Result<(BinnedVector, BinWarnings)> {
    cfg.validate()?;
    let mut acc = vec![0.0f64; cfg.n_bins()];
    let mut warnings = BinWarnings::default();
    for p in &s.peaks {
        match cfg.bin_of(p.mz) {
            Some(i) => match cfg.aggregation {
                BinAggregation::Sum => acc[i] += p.intensity,
                BinAggregation::Max => acc[i] = acc[i].max(p.intensity),
            },
            None => warnings.dropped_peaks += 1,
        }
    }
    Ok((
        BinnedVector {
            values: acc.into_iter().map(|v| v as f32).collect(),
        },
        warnings,
    ))
}

/// Multiset of (m/z, intensity) pairs as two parallel arrays.
#[derive(Debug, Clone, PartialEq)]
pub struct PeakSet {
    pub mz: Vec<f64>,
    pub intensity: Vec<f64>,
}

impl PeakSet {
    pub fn len(&self) -> usize {
        self.mz.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mz.is_empty()
    }
}

pub fn encode_set(s: &Spectrum) -> PeakSet {
    PeakSet {
        mz: s.peaks.iter().map(|p| p.mz).collect(),
        intensity: s.peaks.iter().map(|p| p.intensity).collect(),
    }
}

/// Chain graph over peaks in m/z order, preceded by a sentinel vertex at
/// m/z 0 with intensity 0. Every chain edge is stored as two arcs with the
/// same Δm/z attribute.
#[derive(Debug, Clone, PartialEq)]
pub struct PeakGraph {
    pub vertex_attr: Vec<f64>,
    /// `(source, target)` pairs.
    pub edge_index: Vec<(usize, usize)>,
    pub edge_attr: Vec<f64>,
}

impl PeakGraph {
    pub fn num_vertices(&self) -> usize {
        self.vertex_attr.len()
    }

    pub fn num_arcs(&self) -> usize {
        self.edge_index.len()
    }

    /// Checks that every arc references an existing vertex.
    pub fn validate(&self) -> Result<()> {
        if self.edge_index.len() != self.edge_attr.len() {
            return Err(Error::Encode(format!(
                "{} arcs but {} arc attributes",
                self.edge_index.len(),
                self.edge_attr.len()
            )));
        }
        let v = self.num_vertices();
        if let Some(&(a, b)) = self.edge_index.iter().find(|&&(a, b)| a >= v || b >= v) {
            return Err(Error::Encode(format!("arc ({a}, {b}) references a vertex >= {v}")));
        }
        Ok(())
    }
}

pub fn encode_graph(s: &Spectrum) -> PeakGraph {
    let n = s.peaks.len() + 1;
    let mut mz = Vec::with_capacity(n);
    let mut vertex_attr = Vec::with_capacity(n);
    mz.push(0.0);
    vertex_attr.push(0.0);
    for p in &s.peaks {
        mz.push(p.mz);
        vertex_attr.push(p.intensity);
    }
    let mut edge_index = Vec::with_capacity(2 * (n - 1));
    let mut edge_attr = Vec::with_capacity(2 * (n - 1));
    for k in 0..n - 1 {
        let delta = (mz[k + 1] - mz[k]).abs();
        edge_index.push((k, k + 1));
        edge_attr.push(delta);
        edge_index.push((k + 1, k));
        edge_attr.push(delta);
    }
    PeakGraph {
        vertex_attr,
        edge_index,
        edge_attr,
    }
}

/// Which representation a pipeline produces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Representation {
    Binned,
    Set,
    Graph,
}

impl std::fmt::Display for Representation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Representation::Binned => "binned",
            Representation::Set => "set",
            Representation::Graph => "graph",
        })
    }
}

/// One encoded, preprocessed spectrum.
#[derive(Debug, Clone, PartialEq)]
pub enum Encoded {
    Binned(BinnedVector),
    Set(PeakSet),
    Graph(PeakGraph),
}

impl Encoded {
    pub fn representation(&self) -> Representation {
        match self {
            Encoded::Binned(_) => Representation::Binned,
            Encoded::Set(_) => Representation::Set,
            Encoded::Graph(_) => Representation::Graph,
        }
    }

    /// Export tensors: `[n_bins]`, `[N, 2]`, or the graph triple
    /// (`vertex_attr [V]`, `edge_index [2, E]`, `edge_attr [E]`).
    pub fn to_tensors(&self) -> Vec<Tensor<f32>> {
        match self {
            Encoded::Binned(b) => vec![Tensor::from_vec(vec![b.values.len()], b.values.clone())],
            Encoded::Set(s) => {
                let data = s
                    .mz
                    .iter()
                    .zip(&s.intensity)
                    .flat_map(|(&m, &i)| [m as f32, i as f32])
                    .collect();
                vec![Tensor::from_vec(vec![s.len(), 2], data)]
            }
            Encoded::Graph(g) => {
                let e = g.num_arcs();
                let mut index = Vec::with_capacity(2 * e);
                index.extend(g.edge_index.iter().map(|&(a, _)| a as f32));
                index.extend(g.edge_index.iter().map(|&(_, b)| b as f32));
                vec![
                    Tensor::from_vec(
                        vec![g.num_vertices()],
                        g.vertex_attr.iter().map(|&v| v as f32).collect(),
                    ),
                    Tensor::from_vec(vec![2, e], index),
                    Tensor::from_vec(vec![e], g.edge_attr.iter().map(|&v| v as f32).collect()),
                ]
            }
        }
    }
}

/// Preprocesses and encodes one spectrum. Returns the dropped-peak tally
/// for binned encodings (zero otherwise).
pub fn encode(s: &Spectrum, repr: Representation, bins: &BinConfig) -> Result<(Encoded, BinWarnings)> {
    let pre = preprocess(s)?;
    Ok(match repr {
        Representation::Binned => {
            let (v, w) = encode_binned(&pre, bins)?;
            (Encoded::Binned(v), w)
        }
        Representation::Set => (Encoded::Set(encode_set(&pre)), BinWarnings::default()),
        Representation::Graph => (Encoded::Graph(encode_graph(&pre)), BinWarnings::default()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(precursor: f64, peaks: &[(f64, f64)]) -> Spectrum {
        Spectrum::new(
            "t",
            precursor,
            peaks.iter().map(|&(m, i)| Peak::new(m, i)).collect(),
        )
    }

    fn pairs(s: &Spectrum) -> Vec<(f64, f64)> {
        s.peaks.iter().map(|p| (p.mz, p.intensity)).collect()
    }

    #[test]
    fn normalize_examples() {
        let n = normalize_intensities(&spec(500.0, &[(1.0, 2.0), (2.0, 4.0), (3.0, 8.0)])).unwrap();
        assert_eq!(pairs(&n), vec![(1.0, 0.25), (2.0, 0.5), (3.0, 1.0)]);
        let n = normalize_intensities(&spec(500.0, &[(1.0, 7.0)])).unwrap();
        assert_eq!(pairs(&n), vec![(1.0, 1.0)]);
        let n = normalize_intensities(&spec(500.0, &[(1.0, 3.3), (2.0, 3.3)])).unwrap();
        assert!(n.peaks.iter().all(|p| p.intensity == 1.0));
    }

    #[test]
    fn normalize_errors() {
        assert!(normalize_intensities(&spec(500.0, &[])).is_err());
        assert!(normalize_intensities(&spec(500.0, &[(1.0, 0.0), (2.0, 0.0)])).is_err());
    }

    #[test]
    fn precursor_insertion() {
        let s = spec(250.0, &[(100.0, 1.0)]);
        assert_eq!(pairs(&insert_precursor(&s)), vec![(100.0, 1.0), (250.0, 2.0)]);
        let s = spec(50.0, &[(100.0, 1.0)]);
        assert_eq!(pairs(&insert_precursor(&s)), vec![(50.0, 2.0), (100.0, 1.0)]);
        let s = spec(100.0, &[(100.0, 1.0)]);
        assert_eq!(pairs(&insert_precursor(&s)), vec![(100.0, 1.0), (100.0, 2.0)]);
    }

    #[test]
    fn binned_examples() {
        let cfg = BinConfig::default();
        assert_eq!(cfg.n_bins(), 10_000);

        let (v, w) = encode_binned(&spec(1.0, &[(150.4, 0.3), (150.9, 0.7)]), &cfg).unwrap();
        assert_eq!(w.dropped_peaks, 0);
        assert!((v.values[150] - 1.0).abs() < 1e-7);
        assert_eq!(v.values.iter().filter(|&&x| x != 0.0).count(), 1);

        let (v, w) = encode_binned(&spec(1.0, &[(10_500.0, 1.0)]), &cfg).unwrap();
        assert_eq!(w.dropped_peaks, 1);
        assert!(v.values.iter().all(|&x| x == 0.0));

        // A peak at exactly m/z 0 is not a valid Peak for parsing but binning
        // still follows the half-open rule.
        let s = Spectrum {
            id: "b".into(),
            precursor_mz: 1.0,
            peaks: vec![Peak::new(0.0, 0.5), Peak::new(9_999.999, 0.5)],
            label: None,
        };
        let (v, w) = encode_binned(&s, &cfg).unwrap();
        assert_eq!(w.dropped_peaks, 0);
        assert_eq!(v.values[0], 0.5);
        assert_eq!(v.values[9_999], 0.5);
    }

    #[test]
    fn binned_max_aggregation() {
        let cfg = BinConfig { aggregation: BinAggregation::Max, ..Default::default() };
        let (v, _) = encode_binned(&spec(1.0, &[(150.4, 0.3), (150.9, 0.7)]), &cfg).unwrap();
        assert_eq!(v.values[150], 0.7);
    }

    #[test]
    fn bin_count_rounds_up() {
        let cfg = BinConfig { min_mz: 0.0, max_mz: 10.0, bin_width: 3.0, ..Default::default() };
        assert_eq!(cfg.n_bins(), 4);
        assert!(BinConfig { bin_width: 0.0, ..Default::default() }.validate().is_err());
        assert!(BinConfig { min_mz: 5.0, max_mz: 5.0, ..Default::default() }.validate().is_err());
    }

    #[test]
    fn set_examples() {
        let pre = spec(250.0, &[(100.0, 1.0), (250.0, 2.0)]);
        let set = encode_set(&pre);
        assert_eq!(set.mz, vec![100.0, 250.0]);
        assert_eq!(set.intensity, vec![1.0, 2.0]);

        let only = insert_precursor(&spec(300.0, &[]));
        let set = encode_set(&only);
        assert_eq!((set.mz.clone(), set.intensity.clone()), (vec![300.0], vec![2.0]));
    }

    #[test]
    fn graph_examples() {
        let pre = insert_precursor(&spec(300.0, &[(100.0, 0.5), (250.0, 1.0)]));
        let g = encode_graph(&pre);
        assert_eq!(g.vertex_attr, vec![0.0, 0.5, 1.0, 2.0]);
        assert_eq!(g.edge_index, vec![(0, 1), (1, 0), (1, 2), (2, 1), (2, 3), (3, 2)]);
        assert_eq!(g.edge_attr, vec![100.0, 100.0, 150.0, 150.0, 50.0, 50.0]);

        let g = encode_graph(&insert_precursor(&spec(300.0, &[])));
        assert_eq!(g.vertex_attr, vec![0.0, 2.0]);
        assert_eq!(g.edge_index, vec![(0, 1), (1, 0)]);
        assert_eq!(g.edge_attr, vec![300.0, 300.0]);
        g.validate().unwrap();
    }

    #[test]
    fn graph_export_layout() {
        let g = encode_graph(&insert_precursor(&spec(300.0, &[(100.0, 1.0)])));
        let t = Encoded::Graph(g).to_tensors();
        assert_eq!(t[0].shape(), &[3]);
        assert_eq!(t[1].shape(), &[2, 4]);
        assert_eq!(t[1].data(), &[0.0, 1.0, 1.0, 2.0, 1.0, 0.0, 2.0, 1.0]);
        assert_eq!(t[2].shape(), &[4]);
    }
}
