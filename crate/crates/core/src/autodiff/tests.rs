use super::*;
use crate::rng::{self, SpecRng};

type T64 = Tensor<f64>;

const TOL: f64 = 1e-6;
const EPS: f64 = 1e-6;
const CASES: usize = 100;

fn rand_shape(r: &mut SpecRng, min_rank: usize, max_rank: usize) -> Vec<usize> {
    let rank = rng::uniform_int(r, min_rank, max_rank);
    (0..rank).map(|_| rng::uniform_int(r, 1, 8)).collect()
}

fn rand_tensor(r: &mut SpecRng, shape: &[usize]) -> T64 {
    let n = shape.iter().product();
    T64::from_vec(shape.to_vec(), (0..n).map(|_| rng::uniform(r, -1.0, 1.0)).collect())
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

fn rand_segments(r: &mut SpecRng, max_rows: usize, max_seg: usize) -> Vec<usize> {
    let rows = rng::uniform_int(r, 1, max_rows);
    let mut seg: Vec<usize> = (0..rows).map(|_| rng::uniform_int(r, 0, max_seg - 1)).collect();
    seg.sort_unstable();
    seg
}

#[test]
fn relu_example() {
    let mut t = Tape::<f64>::new();
    let x = t.param(T64::from_vec(vec![2], vec![-1.0, 2.0]));
    let y = t.relu(x);
    assert_eq!(t.value(y).data(), &[0.0, 2.0]);
    let s = t.sum(y);
    let g = t.backward(s).unwrap();
    assert_eq!(g.get(x).unwrap().data(), &[0.0, 1.0]);
}

#[test]
fn relu_subgradient_at_zero_is_left_limit() {
    let mut t = Tape::<f64>::new();
    let x = t.param(T64::from_vec(vec![1], vec![0.0]));
    let y = t.leaky_relu(x, 0.2);
    let s = t.sum(y);
    assert_eq!(t.backward(s).unwrap().get(x).unwrap().data(), &[0.2]);
}

#[test]
fn softmax_example() {
    let mut t = Tape::<f64>::new();
    let x = t.constant(T64::from_vec(vec![2], vec![0.0, 0.0]));
    let y = t.softmax(x).unwrap();
    assert_eq!(t.value(y).data(), &[0.5, 0.5]);
}

#[test]
fn segment_softmax_example() {
    let mut t = Tape::<f64>::new();
    let x = t.constant(T64::from_vec(vec![3], vec![1.0, 1.0, 2.0]));
    let y = t.segment_softmax(x, &[0, 0, 1]).unwrap();
    assert_eq!(t.value(y).data(), &[0.5, 0.5, 1.0]);
}

#[test]
fn unsorted_segments_rejected() {
    let mut t = Tape::<f64>::new();
    let x = t.constant(T64::zeros(&[3]));
    assert!(t.segment_sum(x, &[1, 0, 1], 2).is_err());
    assert!(t.segment_sum(x, &[0, 0, 2], 2).is_err());
}

#[test]
fn mse_chain_rule_example() {
    let mut t = Tape::<f64>::new();
    let w = t.param(T64::from_vec(vec![1, 1], vec![1.0]));
    let x = t.constant(T64::from_vec(vec![1, 1], vec![2.0]));
    let y = t.matmul(x, w).unwrap();
    let loss = t.mse_loss(y, &[0.0]).unwrap();
    assert_eq!(t.value(loss).data(), &[4.0]);
    assert_eq!(t.backward(loss).unwrap().get(w).unwrap().data(), &[8.0]);
}

#[test]
fn fan_out_accumulates() {
    let mut t = Tape::<f64>::new();
    let x = t.param(T64::scalar(3.0));
    let y = t.add(x, x).unwrap();
    let s = t.sum(y);
    assert_eq!(t.backward(s).unwrap().get(x).unwrap().data(), &[2.0]);
}

#[test]
fn backward_errors() {
    let mut t = Tape::<f64>::new();
    let x = t.param(T64::zeros(&[2]));
    let y = t.relu(x);
    assert!(t.backward(y).is_err(), "non-scalar loss");
    let s = t.sum(y);
    t.backward(s).unwrap();
    assert!(t.backward(s).is_err(), "double backward");
}

#[test]
fn shape_errors_name_the_op() {
    let mut t = Tape::<f64>::new();
    let a = t.constant(T64::zeros(&[2, 3]));
    let b = t.constant(T64::zeros(&[2, 3]));
    let err = t.matmul(a, b).unwrap_err();
    assert!(err.to_string().starts_with("matmul"), "{err}");
    let c = t.constant(T64::zeros(&[2]));
    assert!(t.add(a, c).unwrap_err().to_string().starts_with("add"));
    let mut r = rng::seeded(1);
    assert!(t.dropout(a, 1.0, true, &mut r).is_err());
    assert!(t.dropout(a, -0.1, false, &mut r).is_err());
}

#[test]
fn grad_check_sum_of_squares() {
    let mut r = rng::seeded(5);
    let x = rand_tensor(&mut r, &[4, 3]);
    let err = grad_check(
        |t, v| {
            let sq = t.mul(v, v)?;
            Ok(t.sum(sq))
        },
        &x,
        EPS,
    )
    .unwrap();
    assert!(err < 1e-9, "{err:e}");
}

#[test]
fn grad_check_linear_is_exact() {
    let mut r = rng::seeded(6);
    let x = rand_tensor(&mut r, &[5]);
    let err = grad_check(|t, v| weighted_sum(t, v, 99), &x, 1e-3).unwrap();
    assert!(err < 1e-12, "{err:e}");
}

#[test]
fn grad_check_catches_corruption() {
    let mut r = rng::seeded(8);
    let inputs = [rand_tensor(&mut r, &[3, 4]), rand_tensor(&mut r, &[4, 2])];
    let f = |t: &mut Tape<f64>, v: &[Var]| {
        let y = t.matmul(v[0], v[1])?;
        weighted_sum(t, y, 1)
    };
    assert!(grad_check_multi(f, &inputs, EPS).unwrap().passes(TOL));
    assert!(!grad_check_faulty(f, &inputs, EPS).unwrap().passes(TOL));
}

#[test]
fn dropout_eval_is_identity() {
    let mut r = rng::seeded(2);
    let x = rand_tensor(&mut r, &[3, 3]);
    let mut t = Tape::<f64>::new();
    let v = t.constant(x.clone());
    let y = t.dropout(v, 0.5, false, &mut r).unwrap();
    assert_eq!(t.value(y), &x);
}

#[test]
fn dropout_train_reproducible_and_unbiased() {
    let x = T64::full(&[1], 1.5);
    let run = |seed: u64| {
        let mut t = Tape::<f64>::new();
        let v = t.constant(x.clone());
        let mut r = rng::seeded(seed);
        let y = t.dropout(v, 0.3, true, &mut r).unwrap();
        t.value(y).data()[0]
    };
    assert_eq!(run(4), run(4));
    let trials = 10_000;
    let mean = (0..trials).map(|s| run(s as u64)).sum::<f64>() / trials as f64;
    // Each draw is 0 or x/(1-p): std = x * sqrt(p / (1-p)).
    let sd = 1.5 * (0.3f64 / 0.7).sqrt() / (trials as f64).sqrt();
    assert!((mean - 1.5).abs() < 3.0 * sd, "mean {mean}, 3 sd = {}", 3.0 * sd);
}

#[test]
fn matmul_identity() {
    let mut r = rng::seeded(12);
    let x = Tensor::<f32>::from_vec(vec![3, 4], (0..12).map(|_| rng::uniform(&mut r, -2.0, 2.0) as f32).collect());
    let mut eye = Tensor::<f32>::zeros(&[4, 4]);
    for i in 0..4 {
        eye.data_mut()[i * 4 + i] = 1.0;
    }
    let mut t = Tape::<f32>::new();
    let a = t.constant(x.clone());
    let b = t.constant(eye);
    let y = t.matmul(a, b).unwrap();
    assert_eq!(t.value(y), &x);
}

#[test]
fn softmax_rows_sum_to_one() {
    let mut r = rng::seeded(13);
    for _ in 0..50 {
        let shape = rand_shape(&mut r, 1, 3);
        let mut x = rand_tensor(&mut r, &shape);
        x.data_mut().iter_mut().for_each(|v| *v *= 20.0);
        let mut t = Tape::<f64>::new();
        let v = t.constant(x);
        let y = t.softmax(v).unwrap();
        let w = *shape.last().unwrap();
        for row in t.value(y).data().chunks(w) {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-6);
        }
    }
}

#[test]
fn segment_softmax_sums_per_segment() {
    let mut r = rng::seeded(14);
    for _ in 0..50 {
        let seg = rand_segments(&mut r, 12, 4);
        let x = rand_tensor(&mut r, &[seg.len(), 2]);
        let mut t = Tape::<f64>::new();
        let v = t.constant(x);
        let y = t.segment_softmax(v, &seg).unwrap();
        let s = t.segment_sum(y, &seg, seg.last().unwrap() + 1).unwrap();
        for (g, chunk) in t.value(s).data().chunks(2).enumerate() {
            if seg.contains(&g) {
                assert!(chunk.iter().all(|&v| (v - 1.0).abs() < 1e-6));
            }
        }
    }
}

#[test]
fn primitive_suite_within_tolerance() {
    let reports = suite::primitive_suite(CASES, 0xC0FFEE).unwrap();
    assert_eq!(reports.len(), suite::primitive_names().count());
    for rep in reports {
        assert_eq!(rep.cases, CASES);
        assert!(rep.worst < TOL, "{}: worst relative error {:e}", rep.name, rep.worst);
    }
}
