use serde::{Deserialize, Serialize};

use super::{linear, linear_specs, BoundParams, InitScheme, ParamSpec};
use crate::autodiff::{Tape, Var};
use crate::tensor::Tensor;
use crate::{Error, Result, Scalar};

const LN_EPS: f64 = 1e-5;
/// Logit offset for padded keys; `exp` of it underflows to exactly zero.
const MASK_LOGIT: f64 = -1e9;

/// Set transformer over (m/z, intensity) pairs.
///
/// Input projection to `block_dims[0]`, one self-attention block per entry of
/// `block_dims`, pooling by multi-head attention against `num_seeds` learned
/// seed vectors, then a linear head on the flattened seed outputs.
///
/// Each attention block follows `H = LN(Q' + MHA(Q', K', V'))`,
/// `out = LN(H + relu(H W_o + b_o))`, where `Q'`, `K'`, `V'` are linear
/// projections to the block width. With `layer_norm` off, both `LN` are the
/// identity and carry no parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SetTransformerConfig {
    pub block_dims: Vec<usize>,
    pub num_heads: usize,
    pub num_seeds: usize,
    /// m/z features are divided by this before the input projection.
    pub mz_scale: f64,
    pub layer_norm: bool,
}

impl Default for SetTransformerConfig {
    fn default() -> Self {
        SetTransformerConfig {
            block_dims: vec![32, 16],
            num_heads: 4,
            num_seeds: 1,
            mz_scale: 1_000.0,
            layer_norm: true,
        }
    }
}

fn block_specs(prefix: &str, d_in: usize, d_out: usize, layer_norm: bool) -> Vec<ParamSpec> {
    let mut v = Vec::new();
    for proj in ["q", "k", "v"] {
        v.extend(linear_specs(&format!("{prefix}.{proj}"), d_in, d_out));
    }
    v.extend(linear_specs(&format!("{prefix}.o"), d_out, d_out));
    for ln in ["ln0", "ln1"].into_iter().filter(|_| layer_norm) {
        v.push(ParamSpec::new(format!("{prefix}.{ln}.gain"), vec![d_out], InitScheme::Ones));
        v.push(ParamSpec::new(format!("{prefix}.{ln}.bias"), vec![d_out], InitScheme::Zeros));
    }
    v
}

impl SetTransformerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.block_dims.is_empty() || self.block_dims.contains(&0) {
            return Err(Error::Config("set transformer needs nonzero block widths".into()));
        }
        if self.num_heads == 0 || self.block_dims.iter().any(|d| d % self.num_heads != 0) {
            return Err(Error::Config(format!(
                "block widths {:?} must be divisible by num_heads {}",
                self.block_dims, self.num_heads
            )));
        }
        if self.num_seeds == 0 {
            return Err(Error::Config("num_seeds must be >= 1".into()));
        }
        if !(self.mz_scale.is_finite() && self.mz_scale > 0.0) {
            return Err(Error::Config("mz_scale must be > 0".into()));
        }
        Ok(())
    }

    fn last_dim(&self) -> usize {
        *self.block_dims.last().unwrap()
    }

    pub fn param_specs(&self) -> Vec<ParamSpec> {
        let mut v = Vec::new();
        v.extend(linear_specs("input", 2, self.block_dims[0]));
        let mut d_in = self.block_dims[0];
        for (i, &d) in self.block_dims.iter().enumerate() {
            v.extend(block_specs(&format!("sab{i}"), d_in, d, self.layer_norm));
            d_in = d;
        }
        let d = self.last_dim();
        v.push(ParamSpec::new(
            "pma.seeds",
            vec![self.num_seeds, d],
            InitScheme::Uniform { bound: 0.1 },
        ));
        v.extend(block_specs("pma", d, d, self.layer_norm));
        v.extend(linear_specs("head", self.num_seeds * d, 1));
        v
    }

    pub fn param_count(&self) -> usize {
        // q, k, v: 3 (d_in d + d); o: d^2 + d; two layer norms: 4 d.
        let ln = if self.layer_norm { 4 } else { 0 };
        let block = |d_in: usize, d: usize| 3 * (d_in * d + d) + d * d + d + ln * d;
        let d0 = self.block_dims[0];
        let mut total = 3 * d0;
        let mut d_in = d0;
        for &d in &self.block_dims {
            total += block(d_in, d);
            d_in = d;
        }
        let d = self.last_dim();
        total + self.num_seeds * d + block(d, d) + self.num_seeds * d + 1
    }

    pub(crate) fn forward<T: Scalar>(
        &self,
        tape: &mut Tape<T>,
        p: &BoundParams,
        pairs: &Tensor<T>,
        mask: &[bool],
    ) -> Result<Var> {
        let s = pairs.shape();
        if s.len() != 3 || s[2] != 2 || mask.len() != s[0] * s[1] {
            return Err(Error::shape(
                "set_transformer_forward",
                format!("pairs {s:?} with {} mask entries", mask.len()),
            ));
        }
        let (b, n) = (s[0], s[1]);
        if let Some(row) = (0..b).find(|&r| !mask[r * n..(r + 1) * n].iter().any(|&m| m)) {
            return Err(Error::shape(
                "set_transformer_forward",
                format!("row {row} has no real pairs"),
            ));
        }

        let inv_scale = T::of(1.0 / self.mz_scale);
        let mut scaled = pairs.clone();
        for pair in scaled.data_mut().chunks_mut(2) {
            pair[0] *= inv_scale;
        }
        let x = tape.constant(scaled);

        // Additive key mask, shared by every query row.
        let key_bias = |tape: &mut Tape<T>, queries: usize| {
            let mut bias = Vec::with_capacity(b * queries * n);
            for r in 0..b {
                let row: Vec<T> = mask[r * n..(r + 1) * n]
                    .iter()
                    .map(|&m| if m { T::zero() } else { T::of(MASK_LOGIT) })
                    .collect();
                for _ in 0..queries {
                    bias.extend_from_slice(&row);
                }
            }
            tape.constant(Tensor::from_vec(vec![b, queries, n], bias))
        };

        let mut h = linear(tape, p, "input", x)?;
        let self_bias = key_bias(tape, n);
        for i in 0..self.block_dims.len() {
            h = self.attention_block(tape, p, &format!("sab{i}"), h, h, self_bias)?;
        }

        let d = self.last_dim();
        let k = self.num_seeds;
        let seeds = p.get("pma.seeds")?;
        let tile: Vec<usize> = (0..b).flat_map(|_| 0..k).collect();
        let q = tape.gather_rows(seeds, &tile)?;
        let q = tape.reshape(q, &[b, k, d])?;
        let pool_bias = key_bias(tape, k);
        let pooled = self.attention_block(tape, p, "pma", q, h, pool_bias)?;
        let flat = tape.reshape(pooled, &[b, k * d])?;
        let out = linear(tape, p, "head", flat)?;
        tape.reshape(out, &[b])
    }

    /// Multi-head attention block: queries `[B, nq, *]`, keys `[B, nk, *]`,
    /// `bias [B, nq, nk]` added to the logits.
    fn attention_block<T: Scalar>(
        &self,
        tape: &mut Tape<T>,
        p: &BoundParams,
        prefix: &str,
        queries: Var,
        keys: Var,
        bias: Var,
    ) -> Result<Var> {
        let q = linear(tape, p, &format!("{prefix}.q"), queries)?;
        let k = linear(tape, p, &format!("{prefix}.k"), keys)?;
        let v = linear(tape, p, &format!("{prefix}.v"), keys)?;
        let d = tape.shape(q)[2];
        let dh = d / self.num_heads;
        let inv_sqrt = T::of(1.0 / (dh as f64).sqrt());

        let mut heads = Vec::with_capacity(self.num_heads);
        for h in 0..self.num_heads {
            let (qh, kh, vh) = if self.num_heads == 1 {
                (q, k, v)
            } else {
                (
                    tape.slice_last(q, h * dh, dh)?,
                    tape.slice_last(k, h * dh, dh)?,
                    tape.slice_last(v, h * dh, dh)?,
                )
            };
            let logits = tape.bmm(qh, kh, true)?;
            let logits = tape.scale(logits, inv_sqrt);
            let logits = tape.add(logits, bias)?;
            let attn = tape.softmax(logits)?;
            heads.push(tape.bmm(attn, vh, false)?);
        }
        let mha = if heads.len() == 1 { heads[0] } else { tape.concat(&heads)? };

        let h = tape.add(q, mha)?;
        let h = self.affine_norm(tape, p, &format!("{prefix}.ln0"), h)?;
        let ff = linear(tape, p, &format!("{prefix}.o"), h)?;
        let ff = tape.relu(ff);
        let h = tape.add(h, ff)?;
        self.affine_norm(tape, p, &format!("{prefix}.ln1"), h)
    }

    fn affine_norm<T: Scalar>(&self, tape: &mut Tape<T>, p: &BoundParams, prefix: &str, x: Var) -> Result<Var> {
        if !self.layer_norm {
            return Ok(x);
        }
        let y = tape.layer_norm(x, T::of(LN_EPS))?;
        let y = tape.mul(y, p.get(&format!("{prefix}.gain"))?)?;
        tape.add(y, p.get(&format!("{prefix}.bias"))?)
    }
}
