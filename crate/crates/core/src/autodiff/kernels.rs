//! Dense loops shared by the forward and backward passes. All reductions run
//! in a fixed index order.

use crate::Scalar;

/// `[m, k] x [k, n]`. Zero entries of `a` are skipped (binned inputs are sparse).
pub(crate) fn matmul<T: Scalar>(a: &[T], b: &[T], m: usize, k: usize, n: usize) -> Vec<T> {
    let mut out = vec![T::zero(); m * n];
    for i in 0..m {
        let row = &mut out[i * n..(i + 1) * n];
        for kk in 0..k {
            let x = a[i * k + kk];
            if x == T::zero() {
                continue;
            }
            axpy(row, x, &b[kk * n..(kk + 1) * n]);
        }
    }
    out
}

pub(crate) fn bmm<T: Scalar>(a: &[T], b: &[T], batch: usize, m: usize, k: usize, n: usize, trans_b: bool) -> Vec<T> {
    let mut out = Vec::with_capacity(batch * m * n);
    for bi in 0..batch {
        let ab = &a[bi * m * k..(bi + 1) * m * k];
        let bb = &b[bi * k * n..(bi + 1) * k * n];
        if trans_b {
            for i in 0..m {
                let ar = &ab[i * k..(i + 1) * k];
                for j in 0..n {
                    out.push(dot(ar, &bb[j * k..(j + 1) * k]));
                }
            }
        } else {
            out.extend(matmul(ab, bb, m, k, n));
        }
    }
    out
}

#[inline]
pub(crate) fn axpy<T: Scalar>(y: &mut [T], alpha: T, x: &[T]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

#[inline]
pub(crate) fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    let mut s = T::zero();
    for (&x, &y) in a.iter().zip(b) {
        s += x * y;
    }
    s
}

#[inline]
pub(crate) fn sigmoid<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

pub(crate) fn softmax_in_place<T: Scalar>(row: &mut [T]) {
    let max = row.iter().copied().fold(T::neg_infinity(), T::max);
    let mut total = T::zero();
    for x in row.iter_mut() {
        *x = (*x - max).exp();
        total += *x;
    }
    for x in row.iter_mut() {
        *x /= total;
    }
}

/// `[start, end)` ranges of equal ids in a sorted id list.
pub(crate) fn segment_runs(seg: &[usize]) -> Vec<(usize, usize)> {
    let mut runs = Vec::new();
    let mut start = 0;
    for i in 1..=seg.len() {
        if i == seg.len() || seg[i] != seg[start] {
            if i > start {
                runs.push((start, i));
            }
            start = i;
        }
    }
    runs
}
