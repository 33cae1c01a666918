use serde::{Deserialize, Serialize};

use super::{linear, linear_specs, BoundParams, GraphBatch, InitScheme, ParamSpec};
use crate::autodiff::{Tape, Var};
use crate::tensor::Tensor;
use crate::{Error, Result, Scalar};

/// Graph attention network over peak chains with edge-aware attention and
/// global mean pooling.
///
/// Per layer, for an arc `i -> j` with Δm/z attribute `e_ij`:
///
/// ```text
/// score_ij = leaky_relu(a_src . W h_i + a_dst . W h_j + a_edge . (W_e e_ij))   (per head)
/// alpha_ij = softmax of score over the arcs entering j
/// h_j     <- h_j + relu(sum_i alpha_ij W h_i)
/// ```
///
/// which is the single-layer attention `a . [W h_i || W h_j || W_e e_ij]`
/// with `a` split into its three blocks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GatConfig {
    pub num_layers: usize,
    pub hidden_channels: usize,
    pub num_heads: usize,
    pub leaky_relu_slope: f64,
    /// Edge attributes are divided by this before the edge projection.
    pub mz_scale: f64,
    pub residual: bool,
}

impl Default for GatConfig {
    fn default() -> Self {
        GatConfig {
            num_layers: 8,
            hidden_channels: 1024,
            num_heads: 1,
            leaky_relu_slope: 0.2,
            mz_scale: 1_000.0,
            residual: true,
        }
    }
}

impl GatConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_layers == 0 || self.hidden_channels == 0 {
            return Err(Error::Config("GAT needs num_layers >= 1 and hidden_channels >= 1".into()));
        }
        if self.num_heads == 0 || self.hidden_channels % self.num_heads != 0 {
            return Err(Error::Config(format!(
                "hidden_channels {} must be divisible by num_heads {}",
                self.hidden_channels, self.num_heads
            )));
        }
        if !(self.mz_scale.is_finite() && self.mz_scale > 0.0) {
            return Err(Error::Config("mz_scale must be > 0".into()));
        }
        Ok(())
    }

    pub fn param_specs(&self) -> Vec<ParamSpec> {
        let c = self.hidden_channels;
        let mut v = Vec::new();
        v.extend(linear_specs("input", 1, c));
        for l in 0..self.num_layers {
            v.push(ParamSpec::new(
                format!("gat{l}.weight"),
                vec![c, c],
                InitScheme::KaimingUniform { fan_in: c },
            ));
            v.push(ParamSpec::new(
                format!("gat{l}.edge_weight"),
                vec![1, c],
                InitScheme::KaimingUniform { fan_in: 1 },
            ));
            for part in ["att_src", "att_dst", "att_edge"] {
                v.push(ParamSpec::new(
                    format!("gat{l}.{part}"),
                    vec![c],
                    InitScheme::Uniform { bound: 0.1 },
                ));
            }
        }
        v.extend(linear_specs("head", c, 1));
        v
    }

    /// Input projection `2C`, per layer `C^2 + C + 3C`, head `C + 1`.
    pub fn param_count(&self) -> usize {
        let c = self.hidden_channels;
        2 * c + self.num_layers * (c * c + 4 * c) + c + 1
    }

    pub(crate) fn forward<T: Scalar>(&self, tape: &mut Tape<T>, p: &BoundParams, g: &GraphBatch<T>) -> Result<Var> {
        let v = g.vertex_attr.len();
        let c = self.hidden_channels;
        let heads = self.num_heads;
        let dh = c / heads;
        if g.graph_ids.len() != v || g.edge_attr.len() != g.edge_index.len() {
            return Err(Error::shape(
                "gat_forward",
                format!(
                    "{v} vertices / {} graph ids, {} arcs / {} arc attributes",
                    g.graph_ids.len(),
                    g.edge_index.len(),
                    g.edge_attr.len()
                ),
            ));
        }
        if let Some(&(a, b)) = g.edge_index.iter().find(|&&(a, b)| a >= v || b >= v) {
            return Err(Error::shape("gat_forward", format!("dangling arc ({a}, {b}) with {v} vertices")));
        }

        // Arcs grouped by target so attention normalizes over contiguous segments.
        let mut order: Vec<usize> = (0..g.edge_index.len()).collect();
        order.sort_by_key(|&e| g.edge_index[e].1);
        let src: Vec<usize> = order.iter().map(|&e| g.edge_index[e].0).collect();
        let dst: Vec<usize> = order.iter().map(|&e| g.edge_index[e].1).collect();
        let inv_scale = T::of(1.0 / self.mz_scale);
        let e_attr: Vec<T> = order.iter().map(|&e| g.edge_attr[e] * inv_scale).collect();
        let n_arcs = src.len();
        let e_attr = tape.constant(Tensor::from_vec(vec![n_arcs, 1], e_attr));

        let x = tape.constant(Tensor::from_vec(vec![v, 1], g.vertex_attr.clone()));
        let mut h = linear(tape, p, "input", x)?;
        let slope = T::of(self.leaky_relu_slope);

        for l in 0..self.num_layers {
            let w = p.get(&format!("gat{l}.weight"))?;
            let wh = tape.matmul(h, w)?;
            if n_arcs == 0 {
                // No incoming messages anywhere: aggregation is the zero vector.
                let zero = tape.constant(Tensor::zeros(&[v, c]));
                h = self.update(tape, h, zero)?;
                continue;
            }
            let head_scores = |tape: &mut Tape<T>, feats: Var, att: Var, rows: usize| -> Result<Var> {
                let y = tape.mul(feats, att)?;
                let y = tape.reshape(y, &[rows, heads, dh])?;
                tape.sum_axis(y, 2)
            };
            let att_src = p.get(&format!("gat{l}.att_src"))?;
            let att_dst = p.get(&format!("gat{l}.att_dst"))?;
            let att_edge = p.get(&format!("gat{l}.att_edge"))?;
            let w_e = p.get(&format!("gat{l}.edge_weight"))?;

            let s_src = head_scores(tape, wh, att_src, v)?;
            let s_dst = head_scores(tape, wh, att_dst, v)?;
            let s_edge = head_scores(tape, w_e, att_edge, 1)?;
            let from_src = tape.gather_rows(s_src, &src)?;
            let from_dst = tape.gather_rows(s_dst, &dst)?;
            let from_edge = tape.matmul(e_attr, s_edge)?;
            let score = tape.add(from_src, from_dst)?;
            let score = tape.add(score, from_edge)?;
            let score = tape.leaky_relu(score, slope);
            let alpha = tape.segment_softmax(score, &dst)?;

            let msg = tape.gather_rows(wh, &src)?;
            let msg = tape.reshape(msg, &[n_arcs * heads, dh])?;
            let alpha = tape.reshape(alpha, &[n_arcs * heads])?;
            let msg = tape.row_scale(msg, alpha)?;
            let msg = tape.reshape(msg, &[n_arcs, c])?;
            let agg = tape.segment_sum(msg, &dst, v)?;
            h = self.update(tape, h, agg)?;
        }

        let pooled = tape.segment_mean(h, &g.graph_ids, g.num_graphs)?;
        let out = linear(tape, p, "head", pooled)?;
        tape.reshape(out, &[g.num_graphs])
    }

    fn update<T: Scalar>(&self, tape: &mut Tape<T>, h: Var, agg: Var) -> Result<Var> {
        let act = tape.relu(agg);
        if self.residual {
            tape.add(h, act)
        } else {
            Ok(act)
        }
    }
}
