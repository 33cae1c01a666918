//! Binned, set, and graph encodings of tandem mass spectra, plus the three
//! reference regressors that consume them (MLP, SetTransformer, GAT).
//!
//! The numerical core ([`tensor`], [`autodiff`], [`models`], [`train`]) is
//! generic over the floating-point scalar through [`Scalar`]. Training runs in
//! `f32`; gradient checks run in `f64`. Concrete aliases for both live at the
//! crate root.

pub mod autodiff;
pub mod encode;
pub mod error;
pub mod metrics;
pub mod models;
pub mod rng;
pub mod scalar;
pub mod spectrum;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub use autodiff::{GradCheckReport, Gradients, Tape, Var};
pub use encode::{BinAggregation, BinConfig, BinnedVector, PeakGraph, PeakSet};
pub use metrics::RegressionMetrics;
pub use models::{GatConfig, ModelConfig, ModelKind, ModelParams, MlpConfig, SetTransformerConfig};
pub use spectrum::{DatasetSplit, Peak, Spectrum, SyntheticConfig};
pub use tensor::Tensor;
pub use train::{RunHistory, TrainConfig, TrainOutcome};

/// Single-precision tensor, used for training and checkpoints.
pub type TensorF32 = Tensor<f32>;
/// Double-precision tensor, used for finite-difference checks.
pub type TensorF64 = Tensor<f64>;
pub type TapeF32 = Tape<f32>;
pub type TapeF64 = Tape<f64>;
pub type ModelParamsF32 = ModelParams<f32>;
pub type ModelParamsF64 = ModelParams<f64>;
