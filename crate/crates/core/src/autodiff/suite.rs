//! Randomized finite-difference checks for every primitive on the tape.
//!
//! Each case draws shapes of rank up to 3 with dims up to 8, builds a scalar
//! objective around one primitive, and compares reverse-mode gradients with
//! central differences in `f64`.

use super::{grad_check, grad_check_multi, Tape, Var};
use crate::rng::{self, SpecRng};
use crate::tensor::Tensor;
use crate::Result;

type T64 = Tensor<f64>;

/// Central-difference step used by the suite.
pub const EPS: f64 = 1e-6;

/// Worst relative error seen for one primitive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrimitiveReport {
    pub name: &'static str,
    pub cases: usize,
    pub worst: f64,
}

type Case = fn(&mut SpecRng, u64) -> Result<f64>;

const CASES: &[(&str, Case)] = &[
    ("matmul", matmul),
    ("bmm", bmm),
    ("add", add),
    ("sub", sub),
    ("mul", mul),
    ("scale_reshape_sum", scale_reshape_sum),
    ("concat_slice", concat_slice),
    ("relu", relu),
    ("leaky_relu", leaky_relu),
    ("sigmoid", sigmoid),
    ("softmax", softmax),
    ("dropout", dropout),
    ("layer_norm", layer_norm),
    ("mean_sum_axis", mean_sum_axis),
    ("segment_sum", segment_sum),
    ("segment_mean", segment_mean),
    ("segment_softmax", segment_softmax),
    ("gather_rows", gather_rows),
    ("row_scale", row_scale),
    ("mse_loss", mse_loss),
    ("mae_loss", mae_loss),
];

/// Names of the checked primitives, in suite order.
pub fn primitive_names() -> impl Iterator<Item = &'static str> {
    CASES.iter().map(|(n, _)| *n)
}

/// Runs `cases` random cases per primitive.
pub fn primitive_suite(cases: usize, seed: u64) -> Result<Vec<PrimitiveReport>> {
    CASES
        .iter()
        .enumerate()
        .map(|(k, &(name, case))| {
            let mut r = rng::seeded(rng::derive_seed(seed, k as u64));
            let mut worst: f64 = 0.0;
            for i in 0..cases {
                worst = worst.max(case(&mut r, i as u64)?);
            }
            Ok(PrimitiveReport { name, cases, worst })
        })
        .collect()
}

fn rand_shape(r: &mut SpecRng, min_rank: usize, max_rank: usize) -> Vec<usize> {
    let rank = rng::uniform_int(r, min_rank, max_rank);
    (0..rank).map(|_| rng::uniform_int(r, 1, 8)).collect()
}

fn rand_tensor(r: &mut SpecRng, shape: &[usize]) -> T64 {
    let n = shape.iter().product();
    T64::from_vec(shape.to_vec(), (0..n).map(|_| rng::uniform(r, -1.0, 1.0)).collect())
}

/// Values with magnitude in [0.1, 1], keeping kinks farther than `EPS` away.
fn rand_away_from_zero(r: &mut SpecRng, shape: &[usize]) -> T64 {
    let n = shape.iter().product();
    let data = (0..n)
        .map(|_| {
            let m = rng::uniform(r, 0.1, 1.0);
            if rng::unit(r) < 0.5 { -m } else { m }
        })
        .collect();
    T64::from_vec(shape.to_vec(), data)
}

fn rand_segments(r: &mut SpecRng, max_rows: usize, max_seg: usize) -> Vec<usize> {
    let rows = rng::uniform_int(r, 1, max_rows);
    let mut seg: Vec<usize> = (0..rows).map(|_| rng::uniform_int(r, 0, max_seg - 1)).collect();
    seg.sort_unstable();
    seg
}

/// `sum(v * w)` for fixed pseudo-random weights, so that no output's
/// gradient is trivially constant.
fn weighted_sum(t: &mut Tape<f64>, v: Var, seed: u64) -> Result<Var> {
    let shape = t.shape(v).to_vec();
    let mut r = rng::seeded(seed);
    let w = t.constant(rand_tensor(&mut r, &shape));
    let p = t.mul(v, w)?;
    Ok(t.sum(p))
}

fn matmul(r: &mut SpecRng, i: u64) -> Result<f64> {
    let lead = rand_shape(r, 1, 2);
    let k = rng::uniform_int(r, 1, 8);
    let n = rng::uniform_int(r, 1, 8);
    let mut sa = lead;
    sa.push(k);
    let inputs = [rand_tensor(r, &sa), rand_tensor(r, &[k, n])];
    let f = |t: &mut Tape<f64>, v: &[Var]| {
        let y = t.matmul(v[0], v[1])?;
        weighted_sum(t, y, i)
    };
    Ok(grad_check_multi(f, &inputs, EPS)?.max_rel_error)
}

fn bmm(r: &mut SpecRng, i: u64) -> Result<f64> {
    let (b, m, k, n) = (
        rng::uniform_int(r, 1, 4),
        rng::uniform_int(r, 1, 8),
        rng::uniform_int(r, 1, 8),
        rng::uniform_int(r, 1, 8),
    );
    let trans = i % 2 == 0;
    let sb = if trans { [b, n, k] } else { [b, k, n] };
    let inputs = [rand_tensor(r, &[b, m, k]), rand_tensor(r, &sb)];
    let f = |t: &mut Tape<f64>, v: &[Var]| {
        let y = t.bmm(v[0], v[1], trans)?;
        weighted_sum(t, y, i)
    };
    Ok(grad_check_multi(f, &inputs, EPS)?.max_rel_error)
}

/// `b`'s shape is a suffix of `a`'s.
fn broadcast_pair(r: &mut SpecRng) -> [T64; 2] {
    let sa = rand_shape(r, 1, 3);
    let cut = rng::uniform_int(r, 0, sa.len());
    [rand_tensor(r, &sa), rand_tensor(r, &sa[cut..])]
}

fn binary(r: &mut SpecRng, i: u64, op: fn(&mut Tape<f64>, Var, Var) -> Result<Var>) -> Result<f64> {
    let inputs = broadcast_pair(r);
    let f = |t: &mut Tape<f64>, v: &[Var]| {
        let y = op(t, v[0], v[1])?;
        weighted_sum(t, y, i)
    };
    Ok(grad_check_multi(f, &inputs, EPS)?.max_rel_error)
}

fn add(r: &mut SpecRng, i: u64) -> Result<f64> {
    binary(r, i, |t, a, b| t.add(a, b))
}

fn sub(r: &mut SpecRng, i: u64) -> Result<f64> {
    binary(r, i, |t, a, b| t.sub(a, b))
}

fn mul(r: &mut SpecRng, i: u64) -> Result<f64> {
    binary(r, i, |t, a, b| t.mul(a, b))
}

fn scale_reshape_sum(r: &mut SpecRng, i: u64) -> Result<f64> {
    let shape = rand_shape(r, 1, 3);
    let x = rand_tensor(r, &shape);
    let n = x.len();
    grad_check(
        |t, v| {
            let y = t.scale(v, -1.7);
            let y = t.reshape(y, &[n])?;
            let w = weighted_sum(t, y, i)?;
            let s = t.sum(y);
            let ss = t.mul(s, s)?;
            t.add(w, ss)
        },
        &x,
        EPS,
    )
}

fn concat_slice(r: &mut SpecRng, i: u64) -> Result<f64> {
    let lead = rand_shape(r, 0, 2);
    let parts: Vec<T64> = (0..rng::uniform_int(r, 1, 3))
        .map(|_| {
            let mut s = lead.clone();
            s.push(rng::uniform_int(r, 1, 5));
            rand_tensor(r, &s)
        })
        .collect();
    let total: usize = parts.iter().map(|p| p.last_dim()).sum();
    let start = rng::uniform_int(r, 0, total - 1);
    let width = rng::uniform_int(r, 1, total - start);
    let f = |t: &mut Tape<f64>, v: &[Var]| {
        let c = t.concat(v)?;
        let a = weighted_sum(t, c, i)?;
        let s = t.slice_last(c, start, width)?;
        let sq = t.mul(s, s)?;
        let b = t.sum(sq);
        t.add(a, b)
    };
    Ok(grad_check_multi(f, &parts, EPS)?.max_rel_error)
}

fn unary(r: &mut SpecRng, i: u64, op: fn(&mut Tape<f64>, Var) -> Var) -> Result<f64> {
    let shape = rand_shape(r, 1, 3);
    let x = rand_away_from_zero(r, &shape);
    grad_check(
        |t, v| {
            let y = op(t, v);
            weighted_sum(t, y, i)
        },
        &x,
        EPS,
    )
}

fn relu(r: &mut SpecRng, i: u64) -> Result<f64> {
    unary(r, i, |t, v| t.relu(v))
}

fn leaky_relu(r: &mut SpecRng, i: u64) -> Result<f64> {
    unary(r, i, |t, v| t.leaky_relu(v, 0.2))
}

fn sigmoid(r: &mut SpecRng, i: u64) -> Result<f64> {
    unary(r, i, |t, v| t.sigmoid(v))
}

fn softmax(r: &mut SpecRng, i: u64) -> Result<f64> {
    let shape = rand_shape(r, 1, 3);
    let x = rand_tensor(r, &shape);
    grad_check(
        |t, v| {
            let y = t.softmax(v)?;
            weighted_sum(t, y, i)
        },
        &x,
        EPS,
    )
}

fn dropout(r: &mut SpecRng, i: u64) -> Result<f64> {
    let shape = rand_shape(r, 1, 3);
    let x = rand_tensor(r, &shape);
    grad_check(
        |t, v| {
            let mut dr = rng::seeded(i);
            let y = t.dropout(v, 0.4, true, &mut dr)?;
            let sq = t.mul(y, y)?;
            let a = t.sum(sq);
            let b = weighted_sum(t, y, i)?;
            t.add(a, b)
        },
        &x,
        EPS,
    )
}

fn layer_norm(r: &mut SpecRng, i: u64) -> Result<f64> {
    let mut shape = rand_shape(r, 0, 2);
    // Width-2 rows with nearly equal entries put the central difference in a
    // high-curvature region; widths from 3 keep it well resolved.
    shape.push(rng::uniform_int(r, 3, 8));
    let x = rand_tensor(r, &shape);
    grad_check(
        |t, v| {
            let y = t.layer_norm(v, 1e-5)?;
            weighted_sum(t, y, i)
        },
        &x,
        EPS,
    )
}

fn mean_sum_axis(r: &mut SpecRng, i: u64) -> Result<f64> {
    let shape = rand_shape(r, 1, 3);
    let axis = rng::uniform_int(r, 0, shape.len() - 1);
    let x = rand_tensor(r, &shape);
    grad_check(
        |t, v| {
            let m = t.mean(v, axis)?;
            let s = t.sum_axis(v, axis)?;
            let sq = t.mul(s, s)?;
            let a = weighted_sum(t, m, i)?;
            let b = t.sum(sq);
            t.add(a, b)
        },
        &x,
        EPS,
    )
}

fn segment(r: &mut SpecRng, i: u64, which: u8) -> Result<f64> {
    let seg = rand_segments(r, 10, 4);
    let mut shape = vec![seg.len()];
    shape.extend(rand_shape(r, 0, 2));
    let x = rand_tensor(r, &shape);
    grad_check(
        |t, v| {
            let y = match which {
                0 => t.segment_sum(v, &seg, 4)?,
                1 => t.segment_mean(v, &seg, 4)?,
                _ => t.segment_softmax(v, &seg)?,
            };
            weighted_sum(t, y, i)
        },
        &x,
        EPS,
    )
}

fn segment_sum(r: &mut SpecRng, i: u64) -> Result<f64> {
    segment(r, i, 0)
}

fn segment_mean(r: &mut SpecRng, i: u64) -> Result<f64> {
    segment(r, i, 1)
}

fn segment_softmax(r: &mut SpecRng, i: u64) -> Result<f64> {
    segment(r, i, 2)
}

fn gather_rows(r: &mut SpecRng, i: u64) -> Result<f64> {
    let shape = rand_shape(r, 1, 3);
    let idx: Vec<usize> = (0..rng::uniform_int(r, 1, 10))
        .map(|_| rng::uniform_int(r, 0, shape[0] - 1))
        .collect();
    let x = rand_tensor(r, &shape);
    grad_check(
        |t, v| {
            let y = t.gather_rows(v, &idx)?;
            weighted_sum(t, y, i)
        },
        &x,
        EPS,
    )
}

fn row_scale(r: &mut SpecRng, i: u64) -> Result<f64> {
    let shape = rand_shape(r, 1, 3);
    let inputs = [rand_tensor(r, &shape), rand_tensor(r, &[shape[0]])];
    let f = |t: &mut Tape<f64>, v: &[Var]| {
        let y = t.row_scale(v[0], v[1])?;
        weighted_sum(t, y, i)
    };
    Ok(grad_check_multi(f, &inputs, EPS)?.max_rel_error)
}

fn loss(r: &mut SpecRng, mae: bool) -> Result<f64> {
    let shape = rand_shape(r, 1, 2);
    let x = rand_tensor(r, &shape);
    // Every residual stays at least 0.1 away from the MAE kink.
    let target: Vec<f64> = x
        .data()
        .iter()
        .map(|&p| p + if rng::unit(r) < 0.5 { -1.0 } else { 1.0 } * rng::uniform(r, 0.1, 1.0))
        .collect();
    grad_check(|t, v| if mae { t.mae_loss(v, &target) } else { t.mse_loss(v, &target) }, &x, EPS)
}

fn mse_loss(r: &mut SpecRng, _: u64) -> Result<f64> {
    loss(r, false)
}

fn mae_loss(r: &mut SpecRng, _: u64) -> Result<f64> {
    loss(r, true)
}
