use super::kernels::{axpy, dot, segment_runs};
use super::{Op, Tape};
use crate::tensor::Tensor;
use crate::Scalar;

struct Acc<'t, T> {
    grads: Vec<Option<Vec<T>>>,
    tape: &'t Tape<T>,
}

impl<'t, T: Scalar> Acc<'t, T> {
    fn wants(&self, i: usize) -> bool {
        self.tape.nodes[i].requires_grad
    }

    /// Adds `g` into the gradient slot of node `i`.
    fn add(&mut self, i: usize, g: Vec<T>) {
        if !self.wants(i) {
            return;
        }
        match &mut self.grads[i] {
            Some(acc) => acc.iter_mut().zip(&g).for_each(|(a, &b)| *a += b),
            slot @ None => *slot = Some(g),
        }
    }

    /// Slot for node `i`, zero-initialised on first use.
    fn slot(&mut self, i: usize) -> &mut Vec<T> {
        let len = self.tape.nodes[i].value.len();
        self.grads[i].get_or_insert_with(|| vec![T::zero(); len])
    }

    fn val(&self, i: usize) -> &'t [T] {
        self.tape.nodes[i].value.data()
    }
}

/// `ga += g . b^T` for `c = a [m, k] x b [k, n]`.
fn matmul_grad_a<T: Scalar>(g: &[T], b: &[T], m: usize, k: usize, n: usize, ga: &mut [T]) {
    for r in 0..m {
        let gr = &g[r * n..(r + 1) * n];
        for kk in 0..k {
            ga[r * k + kk] += dot(gr, &b[kk * n..(kk + 1) * n]);
        }
    }
}

/// `gb += a^T . g` for `c = a [m, k] x b [k, n]`.
fn matmul_grad_b<T: Scalar>(g: &[T], a: &[T], m: usize, k: usize, n: usize, gb: &mut [T]) {
    for r in 0..m {
        let gr = &g[r * n..(r + 1) * n];
        for kk in 0..k {
            let x = a[r * k + kk];
            if x != T::zero() {
                axpy(&mut gb[kk * n..(kk + 1) * n], x, gr);
            }
        }
    }
}

/// Sums `g` (shape of the broadcast result) down to `len` trailing elements.
fn reduce_broadcast<T: Scalar>(g: &[T], len: usize) -> Vec<T> {
    if g.len() == len {
        return g.to_vec();
    }
    let mut out = vec![T::zero(); len];
    for chunk in g.chunks(len) {
        out.iter_mut().zip(chunk).for_each(|(o, &x)| *o += x);
    }
    out
}

pub(super) fn run<T: Scalar>(tape: &Tape<T>, loss: usize, corrupt: bool) -> Vec<Option<Tensor<T>>> {
    let mut acc = Acc {
        grads: vec![None; tape.nodes.len()],
        tape,
    };
    acc.grads[loss] = Some(vec![T::one()]);

    for i in (0..=loss).rev() {
        let node = &tape.nodes[i];
        if !node.requires_grad || matches!(node.op, Op::Leaf) {
            continue;
        }
        let Some(g) = acc.grads[i].take() else { continue };
        let out = node.value.data();

        match &node.op {
            Op::Leaf => unreachable!(),
            &Op::MatMul { a, b, m, k, n } => {
                if acc.wants(a) {
                    let bv = acc.val(b);
                    matmul_grad_a(&g, bv, m, k, n, acc.slot(a));
                }
                if acc.wants(b) {
                    let av = acc.val(a);
                    let gb = acc.slot(b);
                    matmul_grad_b(&g, av, m, k, n, gb);
                    if corrupt {
                        let f = T::of(1.001);
                        gb.iter_mut().for_each(|v| *v *= f);
                    }
                }
            }
            &Op::Bmm { a, b, batch, m, k, n, trans_b } => {
                let (av, bv) = (acc.val(a), acc.val(b));
                let mut ga = vec![T::zero(); av.len()];
                let mut gb = vec![T::zero(); bv.len()];
                for bi in 0..batch {
                    let ab = &av[bi * m * k..(bi + 1) * m * k];
                    let bb = &bv[bi * k * n..(bi + 1) * k * n];
                    let gab = &mut ga[bi * m * k..(bi + 1) * m * k];
                    let gbb = &mut gb[bi * k * n..(bi + 1) * k * n];
                    let gc = &g[bi * m * n..(bi + 1) * m * n];
                    if trans_b {
                        // c[r, j] = a[r, :] . b[j, :]
                        for r in 0..m {
                            for j in 0..n {
                                let d = gc[r * n + j];
                                axpy(&mut gab[r * k..(r + 1) * k], d, &bb[j * k..(j + 1) * k]);
                                axpy(&mut gbb[j * k..(j + 1) * k], d, &ab[r * k..(r + 1) * k]);
                            }
                        }
                    } else {
                        matmul_grad_a(gc, bb, m, k, n, gab);
                        matmul_grad_b(gc, ab, m, k, n, gbb);
                    }
                }
                acc.add(a, ga);
                acc.add(b, gb);
            }
            &Op::Add { a, b } => {
                let lb = acc.val(b).len();
                acc.add(b, reduce_broadcast(&g, lb));
                acc.add(a, g);
            }
            &Op::Sub { a, b } => {
                let lb = acc.val(b).len();
                let neg: Vec<T> = reduce_broadcast(&g, lb).into_iter().map(|x| -x).collect();
                acc.add(b, neg);
                acc.add(a, g);
            }
            &Op::Mul { a, b } => {
                let (av, bv) = (acc.val(a), acc.val(b));
                let lb = bv.len();
                if acc.wants(b) {
                    let prod: Vec<T> = g.iter().zip(av).map(|(&x, &y)| x * y).collect();
                    acc.add(b, reduce_broadcast(&prod, lb));
                }
                if acc.wants(a) {
                    let ga: Vec<T> = g
                        .chunks(lb.max(1))
                        .flat_map(|row| row.iter().zip(bv).map(|(&x, &y)| x * y))
                        .collect();
                    acc.add(a, ga);
                }
            }
            &Op::Scale { a, c } => acc.add(a, g.iter().map(|&x| x * c).collect()),
            Op::Concat { parts } => {
                let total: usize = parts.iter().map(|p| p.1).sum();
                let rows = if total == 0 { 0 } else { g.len() / total };
                let mut offset = 0;
                for &(p, w) in parts {
                    if acc.wants(p) {
                        let mut gp = Vec::with_capacity(rows * w);
                        for r in 0..rows {
                            gp.extend_from_slice(&g[r * total + offset..r * total + offset + w]);
                        }
                        acc.add(p, gp);
                    }
                    offset += w;
                }
            }
            &Op::SliceLast { a, start, width } => {
                let w_in = acc.tape.nodes[a].value.last_dim();
                let rows = if width == 0 { 0 } else { g.len() / width };
                let ga = acc.slot(a);
                for r in 0..rows {
                    for c in 0..width {
                        ga[r * w_in + start + c] += g[r * width + c];
                    }
                }
            }
            &Op::Reshape { a } => acc.add(a, g),
            &Op::Relu { a } => {
                let ga = acc.val(a).iter().zip(&g).map(|(&x, &d)| if x > T::zero() { d } else { T::zero() }).collect();
                acc.add(a, ga);
            }
            &Op::LeakyRelu { a, slope } => {
                let ga = acc.val(a).iter().zip(&g).map(|(&x, &d)| if x > T::zero() { d } else { d * slope }).collect();
                acc.add(a, ga);
            }
            &Op::Sigmoid { a } => {
                let ga = out.iter().zip(&g).map(|(&y, &d)| d * y * (T::one() - y)).collect();
                acc.add(a, ga);
            }
            &Op::Softmax { a } => {
                let w = node.value.last_dim();
                let mut ga = Vec::with_capacity(g.len());
                for (yr, gr) in out.chunks(w).zip(g.chunks(w)) {
                    let s = dot(yr, gr);
                    ga.extend(yr.iter().zip(gr).map(|(&y, &d)| y * (d - s)));
                }
                acc.add(a, ga);
            }
            Op::Dropout { a, mask } => {
                acc.add(*a, g.iter().zip(mask).map(|(&d, &m)| d * m).collect());
            }
            Op::LayerNorm { a, xhat, rstd } => {
                let w = node.value.last_dim();
                let wt = T::of(w as f64);
                let mut ga = Vec::with_capacity(g.len());
                for ((xr, gr), &r) in xhat.chunks(w).zip(g.chunks(w)).zip(rstd) {
                    let sum_g: T = gr.iter().copied().sum();
                    let sum_gx = dot(gr, xr);
                    ga.extend(
                        xr.iter()
                            .zip(gr)
                            .map(|(&x, &d)| r / wt * (wt * d - sum_g - x * sum_gx)),
                    );
                }
                acc.add(*a, ga);
            }
            &Op::SumAxis { a, outer, len, inner, mean } => {
                let f = if mean && len > 0 { T::one() / T::of(len as f64) } else { T::one() };
                let mut ga = Vec::with_capacity(outer * len * inner);
                for o in 0..outer {
                    for _ in 0..len {
                        ga.extend(g[o * inner..(o + 1) * inner].iter().map(|&x| x * f));
                    }
                }
                acc.add(a, ga);
            }
            &Op::SumAll { a } => {
                let n = acc.val(a).len();
                acc.add(a, vec![g[0]; n]);
            }
            Op::SegmentSum { a, seg, mean, counts } => {
                let w = if seg.is_empty() { 0 } else { acc.val(*a).len() / seg.len() };
                let mut ga = Vec::with_capacity(seg.len() * w);
                for &s in seg {
                    let f = if *mean { T::one() / T::of(counts[s] as f64) } else { T::one() };
                    ga.extend(g[s * w..(s + 1) * w].iter().map(|&x| x * f));
                }
                acc.add(*a, ga);
            }
            Op::SegmentSoftmax { a, seg } => {
                let w = if seg.is_empty() { 0 } else { out.len() / seg.len() };
                let mut ga = vec![T::zero(); g.len()];
                for (start, end) in segment_runs(seg) {
                    for c in 0..w {
                        let mut s = T::zero();
                        for r in start..end {
                            s += out[r * w + c] * g[r * w + c];
                        }
                        for r in start..end {
                            ga[r * w + c] = out[r * w + c] * (g[r * w + c] - s);
                        }
                    }
                }
                acc.add(*a, ga);
            }
            Op::GatherRows { a, idx } => {
                let w = if idx.is_empty() { 0 } else { g.len() / idx.len() };
                let ga = acc.slot(*a);
                for (r, &src) in idx.iter().enumerate() {
                    ga[src * w..(src + 1) * w]
                        .iter_mut()
                        .zip(&g[r * w..(r + 1) * w])
                        .for_each(|(t, &x)| *t += x);
                }
            }
            &Op::RowScale { a, s } => {
                let (av, sv) = (acc.val(a), acc.val(s));
                let w = if sv.is_empty() { 0 } else { av.len() / sv.len() };
                if acc.wants(s) {
                    let gs = (0..sv.len())
                        .map(|r| dot(&g[r * w..(r + 1) * w], &av[r * w..(r + 1) * w]))
                        .collect();
                    acc.add(s, gs);
                }
                if acc.wants(a) {
                    let mut ga = Vec::with_capacity(g.len());
                    for (r, &f) in sv.iter().enumerate() {
                        ga.extend(g[r * w..(r + 1) * w].iter().map(|&x| x * f));
                    }
                    acc.add(a, ga);
                }
            }
            Op::Mse { pred, target } => {
                let f = g[0] * T::of(2.0) / T::of(target.len() as f64);
                let gp = acc.val(*pred).iter().zip(target).map(|(&p, &y)| (p - y) * f).collect();
                acc.add(*pred, gp);
            }
            Op::Mae { pred, target } => {
                let f = g[0] / T::of(target.len() as f64);
                let gp = acc
                    .val(*pred)
                    .iter()
                    .zip(target)
                    .map(|(&p, &y)| {
                        let d = p - y;
                        if d > T::zero() {
                            f
                        } else if d < T::zero() {
                            -f
                        } else {
                            T::zero()
                        }
                    })
                    .collect();
                acc.add(*pred, gp);
            }
        }
    }

    acc.grads
        .into_iter()
        .enumerate()
        .map(|(i, g)| match (&tape.nodes[i].op, g) {
            (Op::Leaf, Some(g)) if tape.nodes[i].requires_grad => {
                Some(Tensor::from_vec(tape.nodes[i].value.shape().to_vec(), g))
            }
            _ => None,
        })
        .collect()
}
