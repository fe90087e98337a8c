//! Dual-branch guided thermal super-resolution network.

mod config;
mod crme;
mod htl;
mod layers;
mod mgl;
mod network;
mod pdtm;
mod spl;
mod stage;

pub use config::{BranchMode, ModelConfig};
pub use crme::Crme;
pub use htl::Htl;
pub use layers::{Builder, Conv, Norm};
pub use mgl::Mgl;
pub use network::{build_variant, Network, Output, Prediction, RESIDUAL_OUTPUT_SUFFIXES};
pub use pdtm::{guided_edge_map, laplacian_response, Pdtm, PdtmOutput, EDGE_EPS};
pub use spl::{SplDown, SplUp};
pub use stage::{Stage, StageState};
