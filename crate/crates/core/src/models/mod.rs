//! The three reference regressors, each mapping one representation to a
//! scalar per spectrum: an MLP on binned vectors, a set transformer on
//! (m/z, intensity) sets, and a graph attention network on peak chains.

mod batch;
mod gat;
mod mlp;
mod params;
mod set_transformer;
mod toy;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Var};
use crate::encode::Representation;
use crate::{Error, Result, Scalar};

pub use batch::{Batch, GraphBatch};
pub use gat::GatConfig;
pub use mlp::MlpConfig;
pub use params::{BoundParams, InitScheme, ModelParams, ParamEntry, ParamSpec};
pub use set_transformer::SetTransformerConfig;
pub use toy::{default_toy_dims, toy_config, toy_gradient_check};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Mlp,
    SetTransformer,
    Gat,
}

impl ModelKind {
    pub fn representation(self) -> Representation {
        match self {
            ModelKind::Mlp => Representation::Binned,
            ModelKind::SetTransformer => Representation::Set,
            ModelKind::Gat => Representation::Graph,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Mlp => "mlp",
            ModelKind::SetTransformer => "set_transformer",
            ModelKind::Gat => "gat",
        }
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mlp" => Ok(ModelKind::Mlp),
            "set_transformer" | "set" => Ok(ModelKind::SetTransformer),
            "gat" | "gnn" => Ok(ModelKind::Gat),
            other => Err(Error::Config(format!("unknown model kind '{other}'"))),
        }
    }
}

/// Architecture hyperparameters for one of the three models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelConfig {
    Mlp(MlpConfig),
    SetTransformer(SetTransformerConfig),
    Gat(GatConfig),
}

impl ModelConfig {
    pub fn default_for(kind: ModelKind) -> Self {
        match kind {
            ModelKind::Mlp => ModelConfig::Mlp(MlpConfig::default()),
            ModelKind::SetTransformer => ModelConfig::SetTransformer(SetTransformerConfig::default()),
            ModelKind::Gat => ModelConfig::Gat(GatConfig::default()),
        }
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            ModelConfig::Mlp(_) => ModelKind::Mlp,
            ModelConfig::SetTransformer(_) => ModelKind::SetTransformer,
            ModelConfig::Gat(_) => ModelKind::Gat,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ModelConfig::Mlp(c) => c.validate(),
            ModelConfig::SetTransformer(c) => c.validate(),
            ModelConfig::Gat(c) => c.validate(),
        }
    }

    /// Named parameter tensors in initialization order.
    pub fn param_specs(&self) -> Vec<ParamSpec> {
        match self {
            ModelConfig::Mlp(c) => c.param_specs(),
            ModelConfig::SetTransformer(c) => c.param_specs(),
            ModelConfig::Gat(c) => c.param_specs(),
        }
    }

    /// Trainable scalar count from the closed-form expression for each architecture.
    pub fn param_count(&self) -> usize {
        match self {
            ModelConfig::Mlp(c) => c.param_count(),
            ModelConfig::SetTransformer(c) => c.param_count(),
            ModelConfig::Gat(c) => c.param_count(),
        }
    }

    pub fn init_params<T: Scalar>(&self, seed: u64) -> Result<ModelParams<T>> {
        self.validate()?;
        ModelParams::initialize(&self.param_specs(), seed)
    }

    /// Predictions `[B]` for one batch.
    pub fn forward<T: Scalar, R: RngCore + ?Sized>(
        &self,
        tape: &mut Tape<T>,
        params: &BoundParams,
        batch: &Batch<T>,
        train: bool,
        rng: &mut R,
    ) -> Result<Var> {
        match (self, batch) {
            (ModelConfig::Mlp(c), Batch::Binned { x }) => c.forward(tape, params, x, train, rng),
            (ModelConfig::SetTransformer(c), Batch::Set { pairs, mask }) => c.forward(tape, params, pairs, mask),
            (ModelConfig::Gat(c), Batch::Graph(g)) => c.forward(tape, params, g),
            (cfg, b) => Err(Error::Config(format!(
                "model '{}' cannot consume a {} batch",
                cfg.kind(),
                b.representation()
            ))),
        }
    }

    /// Eval-mode predictions as `f64`, without gradient tracking.
    pub fn predict<T: Scalar>(&self, params: &ModelParams<T>, batch: &Batch<T>) -> Result<Vec<f64>> {
        let mut tape = Tape::new();
        let bound = params.bind_constant(&mut tape);
        let mut unused = crate::rng::seeded(0);
        let out = self.forward(&mut tape, &bound, batch, false, &mut unused)?;
        Ok(tape.value(out).data().iter().map(|v| v.as_f64()).collect())
    }
}

/// `x W + b` with parameters `{prefix}.weight [in, out]` and `{prefix}.bias [out]`.
pub(crate) fn linear<T: Scalar>(tape: &mut Tape<T>, p: &BoundParams, prefix: &str, x: Var) -> Result<Var> {
    let w = p.get(&format!("{prefix}.weight"))?;
    let b = p.get(&format!("{prefix}.bias"))?;
    let y = tape.matmul(x, w)?;
    tape.add(y, b)
}

pub(crate) fn linear_specs(prefix: &str, fan_in: usize, fan_out: usize) -> [ParamSpec; 2] {
    [
        ParamSpec::new(format!("{prefix}.weight"), vec![fan_in, fan_out], InitScheme::KaimingUniform { fan_in }),
        ParamSpec::new(format!("{prefix}.bias"), vec![fan_out], InitScheme::Zeros),
    ]
}

/// Finite-difference check of `mse(forward(batch), targets)` with respect to
/// every parameter tensor. Dropout, if active, replays the same mask on every
/// evaluation (`dropout_seed`).
#[allow(clippy::too_many_arguments)]
pub fn gradient_check(
    config: &ModelConfig,
    params: &ModelParams<f64>,
    batch: &Batch<f64>,
    targets: &[f64],
    train: bool,
    dropout_seed: u64,
    eps: f64,
    faulty: bool,
) -> Result<crate::autodiff::GradCheckReport> {
    let names: Vec<String> = params.entries().iter().map(|e| e.name.clone()).collect();
    let inputs: Vec<_> = params.entries().iter().map(|e| e.tensor.clone()).collect();
    let f = |tape: &mut Tape<f64>, vars: &[Var]| {
        let bound = BoundParams::from_vars(&names, vars.to_vec());
        let mut r = crate::rng::seeded(dropout_seed);
        let pred = config.forward(tape, &bound, batch, train, &mut r)?;
        tape.mse_loss(pred, targets)
    };
    if faulty {
        crate::autodiff::grad_check_faulty(f, &inputs, eps)
    } else {
        crate::autodiff::grad_check_multi(f, &inputs, eps)
    }
}

#[cfg(test)]
mod tests;
