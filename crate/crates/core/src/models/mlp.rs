use rand::RngCore;
use serde::{Deserialize, Serialize};

use super::{linear, linear_specs, BoundParams, ParamSpec};
use crate::autodiff::{Tape, Var};
use crate::tensor::Tensor;
use crate::{Error, Result, Scalar};

/// Fully connected regressor on binned spectra: hidden layers with ReLU and
/// dropout, then a single linear output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MlpConfig {
    pub input_dim: usize,
    pub hidden_dims: Vec<usize>,
    pub dropout_p: f64,
}

impl Default for MlpConfig {
    fn default() -> Self {
        MlpConfig {
            input_dim: 10_000,
            hidden_dims: vec![1024, 512],
            dropout_p: 0.5,
        }
    }
}

impl MlpConfig {
    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.hidden_dims.contains(&0) {
            return Err(Error::Config("MLP dimensions must be >= 1".into()));
        }
        if !(0.0..1.0).contains(&self.dropout_p) {
            return Err(Error::Config(format!("dropout_p {} outside [0, 1)", self.dropout_p)));
        }
        Ok(())
    }

    fn widths(&self) -> Vec<usize> {
        let mut w = vec![self.input_dim];
        w.extend(&self.hidden_dims);
        w.push(1);
        w
    }

    pub fn param_specs(&self) -> Vec<ParamSpec> {
        let w = self.widths();
        let n = w.len() - 1;
        (0..n)
            .flat_map(|i| {
                let name = if i + 1 == n { "head".to_string() } else { format!("fc{i}") };
                linear_specs(&name, w[i], w[i + 1])
            })
            .collect()
    }

    /// `sum over layers of (fan_in + 1) * fan_out`.
    pub fn param_count(&self) -> usize {
        self.widths().windows(2).map(|p| (p[0] + 1) * p[1]).sum()
    }

    pub(crate) fn forward<T: Scalar, R: RngCore + ?Sized>(
        &self,
        tape: &mut Tape<T>,
        p: &BoundParams,
        x: &Tensor<T>,
        train: bool,
        rng: &mut R,
    ) -> Result<Var> {
        if x.rank() != 2 || x.shape()[1] != self.input_dim {
            return Err(Error::shape(
                "mlp_forward",
                format!("input {:?}, expected [B, {}]", x.shape(), self.input_dim),
            ));
        }
        let b = x.shape()[0];
        let mut h = tape.constant(x.clone());
        for i in 0..self.hidden_dims.len() {
            h = linear(tape, p, &format!("fc{i}"), h)?;
            h = tape.relu(h);
            h = tape.dropout(h, self.dropout_p, train, rng)?;
        }
        let out = linear(tape, p, "head", h)?;
        tape.reshape(out, &[b])
    }
}
