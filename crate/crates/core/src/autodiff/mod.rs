//! Reverse-mode automatic differentiation over HWC tensors.

mod attention;
mod conv;
mod elementwise;
mod norm;
mod tape;

pub use attention::AttnMode;
pub use tape::{Gradients, Tape, Var};

pub(crate) use elementwise::laplacian_kernel;
