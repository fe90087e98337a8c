//! Reconstruction and temperature-consistency losses, plus the region masks
//! they are evaluated on.

mod histogram;
mod masks;
mod tcl;

pub use histogram::{bin_index, wasserstein_1d, Histogram, DEFAULT_BINS};
pub use masks::{extract_region_masks, MaskParams, RegionMasks};
pub use tcl::{
    boundary_loss, l1_loss, l1_with_grad, region_histogram, region_loss, total_loss, total_loss_with_grad,
    LossBreakdown, LossWeights,
};
pub(crate) use tcl::forward_diff;
