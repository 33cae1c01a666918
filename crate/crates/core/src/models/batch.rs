use crate::encode::{BinnedVector, PeakGraph, PeakSet, Representation};
use crate::tensor::Tensor;
use crate::{Error, Result, Scalar};

/// Disjoint union of graphs sharing one vertex array.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphBatch<T> {
    pub vertex_attr: Vec<T>,
    /// `(source, target)` arcs in batched vertex numbering.
    pub edge_index: Vec<(usize, usize)>,
    pub edge_attr: Vec<T>,
    /// Graph id of every vertex, nondecreasing.
    pub graph_ids: Vec<usize>,
    pub num_graphs: usize,
}

/// One model input batch.
#[derive(Debug, Clone, PartialEq)]
pub enum Batch<T> {
    /// Stacked binned vectors `[B, n_bins]`.
    Binned { x: Tensor<T> },
    /// Pairs padded to the largest set, `[B, N_max, 2]`, with a `[B * N_max]`
    /// mask marking real pairs.
    Set { pairs: Tensor<T>, mask: Vec<bool> },
    Graph(GraphBatch<T>),
}

impl<T: Scalar> Batch<T> {
    pub fn len(&self) -> usize {
        match self {
            Batch::Binned { x } => x.shape()[0],
            Batch::Set { pairs, .. } => pairs.shape()[0],
            Batch::Graph(g) => g.num_graphs,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn representation(&self) -> Representation {
        match self {
            Batch::Binned { .. } => Representation::Binned,
            Batch::Set { .. } => Representation::Set,
            Batch::Graph(_) => Representation::Graph,
        }
    }

    pub fn binned(items: &[&BinnedVector]) -> Result<Self> {
        let width = items.first().map_or(0, |b| b.values.len());
        if items.iter().any(|b| b.values.len() != width) {
            return Err(Error::shape("batch", "binned vectors differ in length"));
        }
        let data = items
            .iter()
            .flat_map(|b| b.values.iter().map(|&v| T::of(v as f64)))
            .collect();
        Ok(Batch::Binned {
            x: Tensor::from_vec(vec![items.len(), width], data),
        })
    }

    /// Pads every set to the largest one in `items`.
    pub fn sets(items: &[&PeakSet]) -> Self {
        Self::sets_padded(items, items.iter().map(|s| s.len()).max().unwrap_or(0))
    }

    /// Pads to exactly `n_max` slots (must be at least the largest set).
    pub fn sets_padded(items: &[&PeakSet], n_max: usize) -> Self {
        let b = items.len();
        let mut data = vec![T::zero(); b * n_max * 2];
        let mut mask = vec![false; b * n_max];
        for (i, s) in items.iter().enumerate() {
            assert!(s.len() <= n_max, "set larger than padding width");
            for j in 0..s.len() {
                let at = (i * n_max + j) * 2;
                data[at] = T::of(s.mz[j]);
                data[at + 1] = T::of(s.intensity[j]);
                mask[i * n_max + j] = true;
            }
        }
        Batch::Set {
            pairs: Tensor::from_vec(vec![b, n_max, 2], data),
            mask,
        }
    }

    /// Concatenates graphs, offsetting arc endpoints by the vertices before them.
    pub fn graphs(items: &[&PeakGraph]) -> Self {
        let mut out = GraphBatch {
            vertex_attr: Vec::new(),
            edge_index: Vec::new(),
            edge_attr: Vec::new(),
            graph_ids: Vec::new(),
            num_graphs: items.len(),
        };
        for (gi, g) in items.iter().enumerate() {
            let offset = out.vertex_attr.len();
            out.vertex_attr.extend(g.vertex_attr.iter().map(|&v| T::of(v)));
            out.graph_ids.extend(std::iter::repeat_n(gi, g.num_vertices()));
            out.edge_index
                .extend(g.edge_index.iter().map(|&(a, b)| (a + offset, b + offset)));
            out.edge_attr.extend(g.edge_attr.iter().map(|&v| T::of(v)));
        }
        Batch::Graph(out)
    }
}
