//! Tape-based reverse-mode differentiation over [`Tensor`]s.
//!
//! Every primitive evaluates eagerly and appends a node to the [`Tape`].
//! [`Tape::backward`] walks the nodes in reverse recording order, so the
//! accumulation order (and hence the result, bit for bit) is fixed by the
//! order in which the forward pass was written.

mod backward;
mod gradcheck;
mod kernels;
pub mod suite;

use rand::RngCore;

use crate::tensor::Tensor;
use crate::{rng, Error, Result, Scalar};

pub use gradcheck::{grad_check, grad_check_faulty, grad_check_multi, GradCheckReport};

/// Revision of the operator set and its numerical conventions. Stored in
/// checkpoints so stale artifacts can be recognized.
pub const OP_VERSION: u32 = 1;

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
pub(crate) enum Op<T> {
    Leaf,
    MatMul { a: usize, b: usize, m: usize, k: usize, n: usize },
    Bmm { a: usize, b: usize, batch: usize, m: usize, k: usize, n: usize, trans_b: bool },
    Add { a: usize, b: usize },
    Sub { a: usize, b: usize },
    Mul { a: usize, b: usize },
    Scale { a: usize, c: T },
    Concat { parts: Vec<(usize, usize)> },
    SliceLast { a: usize, start: usize, width: usize },
    Reshape { a: usize },
    Relu { a: usize },
    LeakyRelu { a: usize, slope: T },
    Sigmoid { a: usize },
    Softmax { a: usize },
    Dropout { a: usize, mask: Vec<T> },
    LayerNorm { a: usize, xhat: Vec<T>, rstd: Vec<T> },
    SumAxis { a: usize, outer: usize, len: usize, inner: usize, mean: bool },
    SumAll { a: usize },
    SegmentSum { a: usize, seg: Vec<usize>, mean: bool, counts: Vec<usize> },
    SegmentSoftmax { a: usize, seg: Vec<usize> },
    GatherRows { a: usize, idx: Vec<usize> },
    RowScale { a: usize, s: usize },
    Mse { pred: usize, target: Vec<T> },
    Mae { pred: usize, target: Vec<T> },
}

pub(crate) struct Node<T> {
    pub(crate) value: Tensor<T>,
    pub(crate) op: Op<T>,
    pub(crate) requires_grad: bool,
}

/// Record of one forward pass.
pub struct Tape<T> {
    pub(crate) nodes: Vec<Node<T>>,
    consumed: bool,
    corrupt_matmul_grad: bool,
}

/// Gradients of a scalar loss with respect to every leaf created with
/// [`Tape::param`].
#[derive(Debug)]
pub struct Gradients<T> {
    grads: Vec<Option<Tensor<T>>>,
}

impl<T: Scalar> Gradients<T> {
    pub fn get(&self, v: Var) -> Option<&Tensor<T>> {
        self.grads.get(v.0).and_then(|g| g.as_ref())
    }

    pub fn take(&mut self, v: Var) -> Option<Tensor<T>> {
        self.grads.get_mut(v.0).and_then(|g| g.take())
    }
}

impl<T: Scalar> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> Tape<T> {
    pub fn new() -> Self {
        Tape {
            nodes: Vec::new(),
            consumed: false,
            corrupt_matmul_grad: false,
        }
    }

    /// Test hook: perturbs the matmul weight gradient so gradient checks fail.
    #[doc(hidden)]
    pub fn corrupt_matmul_grad(&mut self, on: bool) {
        self.corrupt_matmul_grad = on;
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Trainable leaf.
    pub fn param(&mut self, t: Tensor<T>) -> Var {
        self.leaf(t, true)
    }

    /// Input leaf that receives no gradient.
    pub fn constant(&mut self, t: Tensor<T>) -> Var {
        self.leaf(t, false)
    }

    pub fn leaf(&mut self, t: Tensor<T>, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value: t,
            op: Op::Leaf,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>, inputs: &[usize]) -> Var {
        debug_assert!(value.all_finite(), "non-finite value produced by {op:?}");
        let requires_grad = inputs.iter().any(|&i| self.nodes[i].requires_grad);
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn data(&self, v: Var) -> &[T] {
        self.nodes[v.0].value.data()
    }

    /// `a [..., k] x b [k, n] -> [..., n]`.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a).to_vec(), self.shape(b).to_vec());
        if sa.is_empty() || sb.len() != 2 || sa[sa.len() - 1] != sb[0] {
            return Err(Error::shape("matmul", format!("{sa:?} x {sb:?}")));
        }
        let k = sb[0];
        let n = sb[1];
        let m = if k == 0 { 0 } else { self.value(a).len() / k };
        let out = kernels::matmul(self.data(a), self.data(b), m, k, n);
        let mut shape = sa[..sa.len() - 1].to_vec();
        shape.push(n);
        Ok(self.push(Tensor::from_vec(shape, out), Op::MatMul { a: a.0, b: b.0, m, k, n }, &[a.0, b.0]))
    }

    /// Batched matmul: `a [B, m, k] x b [B, k, n] -> [B, m, n]`, or with
    /// `trans_b`, `a [B, m, k] x b[B, n, k]^T`.
    pub fn bmm(&mut self, a: Var, b: Var, trans_b: bool) -> Result<Var> {
        let (sa, sb) = (self.shape(a).to_vec(), self.shape(b).to_vec());
        let bad = || Error::shape("bmm", format!("{sa:?} x {sb:?} (trans_b={trans_b})"));
        if sa.len() != 3 || sb.len() != 3 || sa[0] != sb[0] {
            return Err(bad());
        }
        let (batch, m, k) = (sa[0], sa[1], sa[2]);
        let n = if trans_b { sb[1] } else { sb[2] };
        let kb = if trans_b { sb[2] } else { sb[1] };
        if kb != k {
            return Err(bad());
        }
        let out = kernels::bmm(self.data(a), self.data(b), batch, m, k, n, trans_b);
        Ok(self.push(
            Tensor::from_vec(vec![batch, m, n], out),
            Op::Bmm { a: a.0, b: b.0, batch, m, k, n, trans_b },
            &[a.0, b.0],
        ))
    }

    fn check_broadcast(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sb.len() > sa.len() || sa[sa.len() - sb.len()..] != *sb {
            return Err(Error::shape(op, format!("cannot broadcast {sb:?} onto {sa:?}")));
        }
        Ok(())
    }

    fn binary(&mut self, op: &'static str, a: Var, b: Var, f: impl Fn(T, T) -> T) -> Result<Tensor<T>> {
        self.check_broadcast(op, a, b)?;
        let (da, db) = (self.data(a), self.data(b));
        let out: Vec<T> = if db.is_empty() {
            Vec::new()
        } else {
            da.chunks(db.len())
                .flat_map(|row| row.iter().zip(db).map(|(&x, &y)| f(x, y)))
                .collect()
        };
        Ok(Tensor::from_vec(self.shape(a).to_vec(), out))
    }

    /// Elementwise `a + b`; `b` may broadcast over the leading axes of `a`.
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let v = self.binary("add", a, b, |x, y| x + y)?;
        Ok(self.push(v, Op::Add { a: a.0, b: b.0 }, &[a.0, b.0]))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let v = self.binary("sub", a, b, |x, y| x - y)?;
        Ok(self.push(v, Op::Sub { a: a.0, b: b.0 }, &[a.0, b.0]))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let v = self.binary("mul", a, b, |x, y| x * y)?;
        Ok(self.push(v, Op::Mul { a: a.0, b: b.0 }, &[a.0, b.0]))
    }

    pub fn scale(&mut self, a: Var, c: T) -> Var {
        let t = self.value(a);
        let v = Tensor::from_vec(t.shape().to_vec(), t.data().iter().map(|&x| x * c).collect());
        self.push(v, Op::Scale { a: a.0, c }, &[a.0])
    }

    /// Concatenates along the last axis; leading shapes must agree.
    pub fn concat(&mut self, parts: &[Var]) -> Result<Var> {
        let Some(&first) = parts.first() else {
            return Err(Error::shape("concat", "no inputs"));
        };
        let lead = self.shape(first)[..self.shape(first).len().saturating_sub(1)].to_vec();
        let mut widths = Vec::with_capacity(parts.len());
        for &p in parts {
            let s = self.shape(p);
            if s.is_empty() || s[..s.len() - 1] != lead[..] {
                return Err(Error::shape(
                    "concat",
                    format!("{:?} vs leading dims {lead:?}", s),
                ));
            }
            widths.push(s[s.len() - 1]);
        }
        let total: usize = widths.iter().sum();
        let rows: usize = lead.iter().product();
        let mut out = Vec::with_capacity(rows * total);
        for r in 0..rows {
            for (&p, &w) in parts.iter().zip(&widths) {
                out.extend_from_slice(&self.data(p)[r * w..(r + 1) * w]);
            }
        }
        let mut shape = lead;
        shape.push(total);
        let inputs: Vec<usize> = parts.iter().map(|p| p.0).collect();
        let op = Op::Concat {
            parts: inputs.iter().copied().zip(widths).collect(),
        };
        Ok(self.push(Tensor::from_vec(shape, out), op, &inputs))
    }

    /// Columns `start..start + width` of the last axis.
    pub fn slice_last(&mut self, a: Var, start: usize, width: usize) -> Result<Var> {
        let s = self.shape(a).to_vec();
        let Some(&w_in) = s.last() else {
            return Err(Error::shape("slice_last", "scalar input"));
        };
        if start + width > w_in {
            return Err(Error::shape("slice_last", format!("{start}+{width} > {w_in}")));
        }
        let out: Vec<T> = self
            .data(a)
            .chunks(w_in.max(1))
            .flat_map(|row| row[start..start + width].iter().copied())
            .collect();
        let mut shape = s;
        *shape.last_mut().unwrap() = width;
        Ok(self.push(Tensor::from_vec(shape, out), Op::SliceLast { a: a.0, start, width }, &[a.0]))
    }

    pub fn reshape(&mut self, a: Var, shape: &[usize]) -> Result<Var> {
        let t = self
            .value(a)
            .reshape(shape)
            .map_err(|_| Error::shape("reshape", format!("{:?} -> {shape:?}", self.shape(a))))?;
        Ok(self.push(t, Op::Reshape { a: a.0 }, &[a.0]))
    }

    fn unary(&mut self, a: Var, f: impl Fn(T) -> T) -> Tensor<T> {
        let t = self.value(a);
        Tensor::from_vec(t.shape().to_vec(), t.data().iter().map(|&x| f(x)).collect())
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let v = self.unary(a, |x| if x > T::zero() { x } else { T::zero() });
        self.push(v, Op::Relu { a: a.0 }, &[a.0])
    }

    pub fn leaky_relu(&mut self, a: Var, slope: T) -> Var {
        let v = self.unary(a, |x| if x > T::zero() { x } else { x * slope });
        self.push(v, Op::LeakyRelu { a: a.0, slope }, &[a.0])
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let v = self.unary(a, kernels::sigmoid);
        self.push(v, Op::Sigmoid { a: a.0 }, &[a.0])
    }

    /// Softmax over the last axis.
    pub fn softmax(&mut self, a: Var) -> Result<Var> {
        let t = self.value(a);
        if t.rank() == 0 {
            return Err(Error::shape("softmax", "scalar input"));
        }
        let w = t.last_dim();
        let mut out = t.data().to_vec();
        if w > 0 {
            for row in out.chunks_mut(w) {
                kernels::softmax_in_place(row);
            }
        }
        let v = Tensor::from_vec(t.shape().to_vec(), out);
        Ok(self.push(v, Op::Softmax { a: a.0 }, &[a.0]))
    }

    /// Inverted dropout. In eval mode (`train == false`) returns `a` unchanged.
    pub fn dropout<R: RngCore + ?Sized>(&mut self, a: Var, p: f64, train: bool, rng: &mut R) -> Result<Var> {
        if !(0.0..1.0).contains(&p) {
            return Err(Error::shape("dropout", format!("p = {p} outside [0, 1)")));
        }
        if !train || p == 0.0 {
            return Ok(a);
        }
        let keep_scale = T::of(1.0 / (1.0 - p));
        let mask: Vec<T> = (0..self.value(a).len())
            .map(|_| if rng::unit(rng) < p { T::zero() } else { keep_scale })
            .collect();
        let t = self.value(a);
        let out = t.data().iter().zip(&mask).map(|(&x, &m)| x * m).collect();
        let v = Tensor::from_vec(t.shape().to_vec(), out);
        Ok(self.push(v, Op::Dropout { a: a.0, mask }, &[a.0]))
    }

    /// Normalizes each row of the last axis to zero mean and unit variance
    /// (population variance plus `eps`). No affine parameters.
    pub fn layer_norm(&mut self, a: Var, eps: T) -> Result<Var> {
        let t = self.value(a);
        let w = t.last_dim();
        if t.rank() == 0 || w == 0 {
            return Err(Error::shape("layer_norm", format!("input {:?}", t.shape())));
        }
        let rows = t.len() / w;
        let mut xhat = Vec::with_capacity(t.len());
        let mut rstd = Vec::with_capacity(rows);
        let wt = T::of(w as f64);
        for row in t.data().chunks(w) {
            let mean = row.iter().copied().sum::<T>() / wt;
            let var = row.iter().map(|&x| (x - mean) * (x - mean)).sum::<T>() / wt;
            let r = T::one() / (var + eps).sqrt();
            rstd.push(r);
            xhat.extend(row.iter().map(|&x| (x - mean) * r));
        }
        let v = Tensor::from_vec(t.shape().to_vec(), xhat.clone());
        Ok(self.push(v, Op::LayerNorm { a: a.0, xhat, rstd }, &[a.0]))
    }

    fn reduce_axis(&mut self, a: Var, axis: usize, mean: bool) -> Result<Var> {
        let s = self.shape(a).to_vec();
        if axis >= s.len() {
            return Err(Error::shape(
                if mean { "mean" } else { "sum_axis" },
                format!("axis {axis} for shape {s:?}"),
            ));
        }
        let outer: usize = s[..axis].iter().product();
        let len = s[axis];
        let inner: usize = s[axis + 1..].iter().product();
        let d = self.data(a);
        let mut out = vec![T::zero(); outer * inner];
        for o in 0..outer {
            for l in 0..len {
                let src = &d[(o * len + l) * inner..(o * len + l + 1) * inner];
                for (acc, &x) in out[o * inner..(o + 1) * inner].iter_mut().zip(src) {
                    *acc += x;
                }
            }
        }
        if mean && len > 0 {
            let inv = T::one() / T::of(len as f64);
            out.iter_mut().for_each(|x| *x *= inv);
        }
        let mut shape = s;
        shape.remove(axis);
        Ok(self.push(
            Tensor::from_vec(shape, out),
            Op::SumAxis { a: a.0, outer, len, inner, mean },
            &[a.0],
        ))
    }

    pub fn mean(&mut self, a: Var, axis: usize) -> Result<Var> {
        self.reduce_axis(a, axis, true)
    }

    pub fn sum_axis(&mut self, a: Var, axis: usize) -> Result<Var> {
        self.reduce_axis(a, axis, false)
    }

    /// Sum of all elements, as a scalar.
    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.data(a).iter().copied().sum();
        self.push(Tensor::scalar(s), Op::SumAll { a: a.0 }, &[a.0])
    }

    fn check_segments(&self, op: &'static str, a: Var, seg: &[usize], num_segments: usize) -> Result<usize> {
        let s = self.shape(a);
        if s.is_empty() || s[0] != seg.len() {
            return Err(Error::shape(op, format!("{} segment ids for input {s:?}", seg.len())));
        }
        if seg.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::shape(op, "segment ids must be sorted nondecreasing"));
        }
        if let Some(&last) = seg.last() {
            if last >= num_segments {
                return Err(Error::shape(op, format!("segment id {last} >= {num_segments}")));
            }
        }
        Ok(s[1..].iter().product())
    }

    fn segment_reduce(&mut self, a: Var, seg: &[usize], num_segments: usize, mean: bool) -> Result<Var> {
        let op = if mean { "segment_mean" } else { "segment_sum" };
        let w = self.check_segments(op, a, seg, num_segments)?;
        let d = self.data(a);
        let mut out = vec![T::zero(); num_segments * w];
        let mut counts = vec![0usize; num_segments];
        for (r, &g) in seg.iter().enumerate() {
            counts[g] += 1;
            for (acc, &x) in out[g * w..(g + 1) * w].iter_mut().zip(&d[r * w..(r + 1) * w]) {
                *acc += x;
            }
        }
        if mean {
            for (g, &c) in counts.iter().enumerate() {
                if c > 0 {
                    let inv = T::one() / T::of(c as f64);
                    out[g * w..(g + 1) * w].iter_mut().for_each(|x| *x *= inv);
                }
            }
        }
        let mut shape = self.shape(a).to_vec();
        shape[0] = num_segments;
        Ok(self.push(
            Tensor::from_vec(shape, out),
            Op::SegmentSum { a: a.0, seg: seg.to_vec(), mean, counts },
            &[a.0],
        ))
    }

    /// Sums rows of `a` that share a segment id. Empty segments yield zeros.
    pub fn segment_sum(&mut self, a: Var, seg: &[usize], num_segments: usize) -> Result<Var> {
        self.segment_reduce(a, seg, num_segments, false)
    }

    /// Averages rows of `a` that share a segment id. Empty segments yield zeros.
    pub fn segment_mean(&mut self, a: Var, seg: &[usize], num_segments: usize) -> Result<Var> {
        self.segment_reduce(a, seg, num_segments, true)
    }

    /// Softmax over the rows of each segment, independently for every column.
    pub fn segment_softmax(&mut self, a: Var, seg: &[usize]) -> Result<Var> {
        let n_seg = seg.last().map_or(0, |&g| g + 1);
        let w = self.check_segments("segment_softmax", a, seg, n_seg)?;
        let d = self.data(a);
        let mut out = vec![T::zero(); d.len()];
        for (start, end) in kernels::segment_runs(seg) {
            for c in 0..w {
                let mut max = T::neg_infinity();
                for r in start..end {
                    max = max.max(d[r * w + c]);
                }
                let mut total = T::zero();
                for r in start..end {
                    let e = (d[r * w + c] - max).exp();
                    out[r * w + c] = e;
                    total += e;
                }
                for r in start..end {
                    out[r * w + c] /= total;
                }
            }
        }
        let v = Tensor::from_vec(self.shape(a).to_vec(), out);
        Ok(self.push(v, Op::SegmentSoftmax { a: a.0, seg: seg.to_vec() }, &[a.0]))
    }

    /// Rows of `a` (first axis) selected by `idx`, repeats allowed.
    pub fn gather_rows(&mut self, a: Var, idx: &[usize]) -> Result<Var> {
        let s = self.shape(a).to_vec();
        if s.is_empty() {
            return Err(Error::shape("gather_rows", "scalar input"));
        }
        if let Some(&bad) = idx.iter().find(|&&i| i >= s[0]) {
            return Err(Error::shape("gather_rows", format!("row {bad} of {}", s[0])));
        }
        let w: usize = s[1..].iter().product();
        let d = self.data(a);
        let mut out = Vec::with_capacity(idx.len() * w);
        for &i in idx {
            out.extend_from_slice(&d[i * w..(i + 1) * w]);
        }
        let mut shape = s;
        shape[0] = idx.len();
        Ok(self.push(Tensor::from_vec(shape, out), Op::GatherRows { a: a.0, idx: idx.to_vec() }, &[a.0]))
    }

    /// Multiplies row `r` of `a [R, ...]` by `s[r]` where `s` has `R` elements.
    pub fn row_scale(&mut self, a: Var, s: Var) -> Result<Var> {
        let sa = self.shape(a).to_vec();
        let ns = self.value(s).len();
        if sa.is_empty() || sa[0] != ns {
            return Err(Error::shape("row_scale", format!("{sa:?} by {:?}", self.shape(s))));
        }
        let w: usize = sa[1..].iter().product();
        let (da, ds) = (self.data(a), self.data(s));
        let mut out = Vec::with_capacity(da.len());
        for (r, &f) in ds.iter().enumerate() {
            out.extend(da[r * w..(r + 1) * w].iter().map(|&x| x * f));
        }
        Ok(self.push(Tensor::from_vec(sa, out), Op::RowScale { a: a.0, s: s.0 }, &[a.0, s.0]))
    }

    fn check_target(&self, op: &'static str, pred: Var, target: &[T]) -> Result<()> {
        if self.value(pred).len() != target.len() || target.is_empty() {
            return Err(Error::shape(
                op,
                format!("prediction {:?} vs {} targets", self.shape(pred), target.len()),
            ));
        }
        Ok(())
    }

    /// Mean squared error against a constant target.
    pub fn mse_loss(&mut self, pred: Var, target: &[T]) -> Result<Var> {
        self.check_target("mse_loss", pred, target)?;
        let n = T::of(target.len() as f64);
        let s: T = self
            .data(pred)
            .iter()
            .zip(target)
            .map(|(&p, &y)| (p - y) * (p - y))
            .sum();
        Ok(self.push(Tensor::scalar(s / n), Op::Mse { pred: pred.0, target: target.to_vec() }, &[pred.0]))
    }

    /// Mean absolute error against a constant target.
    pub fn mae_loss(&mut self, pred: Var, target: &[T]) -> Result<Var> {
        self.check_target("mae_loss", pred, target)?;
        let n = T::of(target.len() as f64);
        let s: T = self.data(pred).iter().zip(target).map(|(&p, &y)| (p - y).abs()).sum();
        Ok(self.push(Tensor::scalar(s / n), Op::Mae { pred: pred.0, target: target.to_vec() }, &[pred.0]))
    }

    /// Reverse pass from a scalar `loss`. Consumes the tape: a second call fails.
    pub fn backward(&mut self, loss: Var) -> Result<Gradients<T>> {
        if self.consumed {
            return Err(Error::Autodiff("backward already ran on this tape".into()));
        }
        if self.value(loss).len() != 1 {
            return Err(Error::Autodiff(format!(
                "loss must be a scalar, got shape {:?}",
                self.shape(loss)
            )));
        }
        self.consumed = true;
        let grads = backward::run(self, loss.0, self.corrupt_matmul_grad);
        Ok(Gradients { grads })
    }
}

#[cfg(test)]
mod tests;
