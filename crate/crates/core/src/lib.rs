//! Cross-modal guided thermal super-resolution: tensors, autodiff, network,
//! losses, metrics, degradation and synthetic scene generation.

pub mod autodiff;
pub mod degrade;
pub mod error;
pub mod loss;
pub mod metrics;
pub mod model;
pub mod objective;
pub mod params;
pub mod scalar;
pub mod synth;
pub mod tensor;

pub use autodiff::{AttnMode, Gradients, Tape, Var};
pub use error::{Error, Result};
pub use model::{build_variant, BranchMode, ModelConfig, Network};
pub use params::{Init, ParamId, ParamStore};
pub use scalar::Scalar;
pub use tensor::{FeatureMap, Tensor};

pub type FeatureMapF32 = FeatureMap<f32>;
pub type FeatureMapF64 = FeatureMap<f64>;
pub type TensorF32 = Tensor<f32>;
pub type TensorF64 = Tensor<f64>;
pub type NetworkF32 = Network<f32>;
pub type NetworkF64 = Network<f64>;
pub type ScenePairF32 = synth::ScenePair<f32>;
pub type ScenePairF64 = synth::ScenePair<f64>;
