use crate::autodiff::{Gradients, Var};
use crate::models::ModelParams;
use crate::scalar::Scalar;

/// Adam with bias correction; moments kept per parameter tensor.
#[derive(Debug, Clone)]
pub struct Adam<T> {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    step: u32,
    m: Vec<Vec<T>>,
    v: Vec<Vec<T>>,
}

impl<T: Scalar> Adam<T> {
    pub fn new(params: &ModelParams<T>, lr: f64, beta1: f64, beta2: f64, eps: f64) -> Self {
        let zeros = || params.entries().iter().map(|e| vec![T::zero(); e.tensor.len()]).collect();
        Adam { lr, beta1, beta2, eps, step: 0, m: zeros(), v: zeros() }
    }

    pub fn steps_taken(&self) -> u32 {
        self.step
    }

    /// Applies one update from `grads`, where `vars[i]` is the tape leaf bound
    /// to parameter `i`. Returns the number of scalars that received a
    /// gradient.
    pub fn step(&mut self, params: &mut ModelParams<T>, vars: &[Var], grads: &Gradients<T>) -> usize {
        self.step += 1;
        let c1 = 1.0 - self.beta1.powi(self.step as i32);
        let c2 = 1.0 - self.beta2.powi(self.step as i32);
        let (b1, b2) = (T::of(self.beta1), T::of(self.beta2));
        let (one_b1, one_b2) = (T::of(1.0 - self.beta1), T::of(1.0 - self.beta2));
        let step_size = T::of(self.lr / c1);
        let inv_c2 = T::of(1.0 / c2);
        let eps = T::of(self.eps);

        let mut touched = 0;
        for (i, entry) in params.entries_mut().iter_mut().enumerate() {
            let Some(g) = grads.get(vars[i]) else { continue };
            touched += g.len();
            let (m, v) = (&mut self.m[i], &mut self.v[i]);
            for (((p, &gj), mj), vj) in entry.tensor.data_mut().iter_mut().zip(g.data()).zip(m).zip(v) {
                *mj = b1 * *mj + one_b1 * gj;
                *vj = b2 * *vj + one_b2 * gj * gj;
                *p -= step_size * *mj / ((*vj * inv_c2).sqrt() + eps);
            }
        }
        touched
    }
}
