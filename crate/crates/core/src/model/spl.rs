//! Learnable resolution alignment between the two branches.

use crate::autodiff::{Tape, Var};
use crate::error::{invalid, Result};
use crate::scalar::Scalar;

use super::layers::{Builder, Conv};

/// `2H x 2W x C` to `H x W x C` by a stride-2 `3 x 3` convolution.
pub struct SplDown {
    conv: Conv,
}

impl SplDown {
    pub fn new<T: Scalar>(b: &mut Builder<'_, T>, channels: usize) -> Self {
        Self { conv: b.conv("down", 3, channels, channels, 2) }
    }

    /// Variant without bias, for inputs to shift-invariant consumers.
    pub fn without_bias<T: Scalar>(b: &mut Builder<'_, T>, channels: usize) -> Self {
        Self { conv: b.strided_linear("down", 3, channels, channels, 2) }
    }

    pub fn forward<T: Scalar>(&self, tape: &mut Tape<'_, T>, x: Var) -> Result<Var> {
        let (h, w, _) = tape.hwc(x);
        if h % 2 != 0 || w % 2 != 0 {
            return invalid(format!("down-projection needs even dims, got {h}x{w}"));
        }
        self.conv.forward(tape, x)
    }
}

/// `H x W x C` to `2H x 2W x C` by a pointwise expansion to `4C` and a
/// factor-2 pixel shuffle.
pub struct SplUp {
    conv: Conv,
}

impl SplUp {
    pub fn new<T: Scalar>(b: &mut Builder<'_, T>, channels: usize) -> Self {
        Self { conv: b.conv("up", 1, channels, 4 * channels, 1) }
    }

    pub fn forward<T: Scalar>(&self, tape: &mut Tape<'_, T>, x: Var) -> Result<Var> {
        let e = self.conv.forward(tape, x)?;
        tape.pixel_shuffle(e, 2)
    }
}
