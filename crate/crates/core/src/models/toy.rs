//! Small configurations for finite-difference checks.

use super::{gradient_check, Batch, GatConfig, MlpConfig, ModelConfig, ModelKind, SetTransformerConfig};
use crate::autodiff::GradCheckReport;
use crate::encode::{encode_binned, encode_graph, encode_set, preprocess, BinConfig};
use crate::error::{Error, Result};
use crate::spectrum::{generate_synthetic, SyntheticConfig};

/// Default toy dimensions: MLP `[input, hidden..]`, SetTransformer block
/// widths, GAT `[layers, channels]`.
pub fn default_toy_dims(kind: ModelKind) -> Vec<usize> {
    match kind {
        ModelKind::Mlp => vec![16, 4],
        ModelKind::SetTransformer => vec![4, 4],
        ModelKind::Gat => vec![2, 8],
    }
}

/// Single-head toy configuration from `dims` (see [`default_toy_dims`]).
pub fn toy_config(kind: ModelKind, dims: &[usize]) -> Result<ModelConfig> {
    let cfg = match kind {
        ModelKind::Mlp => {
            let (&input_dim, hidden) = dims
                .split_first()
                .ok_or_else(|| Error::Config("mlp toy dims need at least the input width".into()))?;
            ModelConfig::Mlp(MlpConfig { input_dim, hidden_dims: hidden.to_vec(), dropout_p: 0.5 })
        }
        ModelKind::SetTransformer => ModelConfig::SetTransformer(SetTransformerConfig {
            block_dims: dims.to_vec(),
            num_heads: 1,
            ..Default::default()
        }),
        ModelKind::Gat => match dims {
            &[num_layers, hidden_channels] => ModelConfig::Gat(GatConfig {
                num_layers,
                hidden_channels,
                num_heads: 1,
                ..Default::default()
            }),
            _ => return Err(Error::Config("gat toy dims are [layers, channels]".into())),
        },
    };
    cfg.validate()?;
    Ok(cfg)
}

/// Checks the mse-loss gradient of a toy model on four small synthetic
/// spectra, in train mode (dropout mask fixed by `seed`).
pub fn toy_gradient_check(kind: ModelKind, dims: &[usize], seed: u64, faulty: bool) -> Result<GradCheckReport> {
    const EPS: f64 = 1e-6;
    let cfg = toy_config(kind, dims)?;
    let spectra = generate_synthetic(&SyntheticConfig {
        seed,
        n_spectra: 4,
        peaks_min: 2,
        peaks_max: 6,
        ..Default::default()
    })?;
    let pre = spectra.iter().map(preprocess).collect::<Result<Vec<_>>>()?;
    let targets: Vec<f64> = spectra.iter().map(|s| s.label.unwrap_or_default()).collect();
    let batch: Batch<f64> = match &cfg {
        ModelConfig::Mlp(m) => {
            let bins = BinConfig { max_mz: 1000.0, bin_width: 1000.0 / m.input_dim as f64, ..Default::default() };
            let vecs = pre.iter().map(|s| encode_binned(s, &bins).map(|v| v.0)).collect::<Result<Vec<_>>>()?;
            Batch::binned(&vecs.iter().collect::<Vec<_>>())?
        }
        ModelConfig::SetTransformer(_) => {
            let sets: Vec<_> = pre.iter().map(encode_set).collect();
            Batch::sets(&sets.iter().collect::<Vec<_>>())
        }
        ModelConfig::Gat(_) => {
            let graphs: Vec<_> = pre.iter().map(encode_graph).collect();
            Batch::graphs(&graphs.iter().collect::<Vec<_>>())
        }
    };
    let params = cfg.init_params::<f64>(seed)?;
    gradient_check(&cfg, &params, &batch, &targets, true, seed, EPS, faulty)
}
