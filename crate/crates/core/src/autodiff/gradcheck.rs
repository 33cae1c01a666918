use super::{Tape, Var};
use crate::tensor::Tensor;
use crate::Result;

/// Outcome of a central-difference gradient check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckReport {
    /// Worst `|analytic_i - numeric_i| / scale`, where `scale` is the largest
    /// analytic or numeric component across all inputs, floored at 1e-12.
    pub max_rel_error: f64,
    pub worst_input: usize,
    pub worst_index: usize,
    pub evaluations: usize,
}

impl GradCheckReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_rel_error < tol
    }
}

const DENOM_FLOOR: f64 = 1e-12;

/// Compares reverse-mode gradients of `f` at `inputs` with central differences
/// `(f(x + eps) - f(x - eps)) / (2 eps)`, one element at a time.
///
/// Relative error is measured against the largest gradient magnitude over
/// every input, so components whose true derivative is zero (a key bias under
/// softmax, say) do not turn rounding noise into a failure.
pub fn grad_check_multi<F>(f: F, inputs: &[Tensor<f64>], eps: f64) -> Result<GradCheckReport>
where
    F: Fn(&mut Tape<f64>, &[Var]) -> Result<Var>,
{
    check(f, inputs, eps, false)
}

/// [`grad_check_multi`] with the matmul weight gradient deliberately perturbed.
#[doc(hidden)]
pub fn grad_check_faulty<F>(f: F, inputs: &[Tensor<f64>], eps: f64) -> Result<GradCheckReport>
where
    F: Fn(&mut Tape<f64>, &[Var]) -> Result<Var>,
{
    check(f, inputs, eps, true)
}

fn check<F>(f: F, inputs: &[Tensor<f64>], eps: f64, corrupt: bool) -> Result<GradCheckReport>
where
    F: Fn(&mut Tape<f64>, &[Var]) -> Result<Var>,
{
    let mut tape = Tape::new();
    tape.corrupt_matmul_grad(corrupt);
    let vars: Vec<Var> = inputs.iter().map(|t| tape.param(t.clone())).collect();
    let loss = f(&mut tape, &vars)?;
    let grads = tape.backward(loss)?;

    let eval = |xs: &[Tensor<f64>]| -> Result<f64> {
        let mut t = Tape::new();
        let vs: Vec<Var> = xs.iter().map(|x| t.constant(x.clone())).collect();
        let out = f(&mut t, &vs)?;
        Ok(t.value(out).data()[0])
    };

    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst_input: 0,
        worst_index: 0,
        evaluations: 1,
    };
    let mut work = inputs.to_vec();
    let mut pairs: Vec<(Vec<f64>, Vec<f64>)> = Vec::with_capacity(vars.len());
    for (ti, v) in vars.iter().enumerate() {
        let analytic = match grads.get(*v) {
            Some(g) => g.data().to_vec(),
            None => vec![0.0; inputs[ti].len()],
        };
        let mut numeric = Vec::with_capacity(analytic.len());
        for j in 0..inputs[ti].len() {
            let orig = inputs[ti].data()[j];
            work[ti].data_mut()[j] = orig + eps;
            let plus = eval(&work)?;
            work[ti].data_mut()[j] = orig - eps;
            let minus = eval(&work)?;
            work[ti].data_mut()[j] = orig;
            report.evaluations += 2;
            numeric.push((plus - minus) / (2.0 * eps));
        }
        pairs.push((analytic, numeric));
    }
    let scale = pairs
        .iter()
        .flat_map(|(a, n)| a.iter().chain(n))
        .fold(DENOM_FLOOR, |m, &x| m.max(x.abs()));
    for (ti, (analytic, numeric)) in pairs.iter().enumerate() {
        for (j, (&a, &n)) in analytic.iter().zip(numeric).enumerate() {
            let err = (a - n).abs() / scale;
            if err > report.max_rel_error {
                report.max_rel_error = err;
                report.worst_input = ti;
                report.worst_index = j;
            }
        }
    }
    Ok(report)
}

/// Single-input form of [`grad_check_multi`]; returns the worst relative error.
pub fn grad_check<F>(f: F, x: &Tensor<f64>, eps: f64) -> Result<f64>
where
    F: Fn(&mut Tape<f64>, Var) -> Result<Var>,
{
    grad_check_multi(|t, v| f(t, v[0]), std::slice::from_ref(x), eps).map(|r| r.max_rel_error)
}
