//! Shape-preserving transformer layer: windowed spatial self-attention,
//! windowed channel self-attention and a feed-forward block, each residual.

use crate::autodiff::{AttnMode, Tape, Var};
use crate::error::Result;
use crate::scalar::Scalar;

use super::layers::{padded_attention, Builder, Conv, Norm};

const FFN_RATIO: usize = 2;

struct AttnBlock {
    norm: Norm,
    q: Conv,
    k: Conv,
    v: Conv,
    out: Conv,
    mode: AttnMode,
}

impl AttnBlock {
    fn new<T: Scalar>(b: &mut Builder<'_, T>, c: usize, mode: AttnMode, out_name: &str) -> Self {
        Self {
            norm: b.norm("norm", c),
            q: b.conv("q", 1, c, c, 1),
            // a key bias shifts every score of a query equally, which the
            // spatial softmax cancels
            k: match mode {
                AttnMode::Spatial => b.linear("k", c, c, false),
                AttnMode::Channel => b.conv("k", 1, c, c, 1),
            },
            v: b.conv("v", 1, c, c, 1),
            out: b.zero_conv(out_name, 1, c, c),
            mode,
        }
    }

    fn forward<T: Scalar>(&self, tape: &mut Tape<'_, T>, x: Var, window: usize, heads: usize) -> Result<Var> {
        let n = self.norm.forward(tape, x)?;
        let q = self.q.forward(tape, n)?;
        let k = self.k.forward(tape, n)?;
        let v = self.v.forward(tape, n)?;
        let a = padded_attention(tape, q, k, v, window, heads, self.mode)?;
        let o = self.out.forward(tape, a)?;
        tape.add(x, o)
    }
}

pub struct Htl {
    spatial: AttnBlock,
    channel: AttnBlock,
    ffn_norm: Norm,
    fc1: Conv,
    fc2: Conv,
    window: usize,
    heads: usize,
}

impl Htl {
    pub fn new<T: Scalar>(b: &mut Builder<'_, T>, channels: usize, window: usize, heads: usize) -> Self {
        Self {
            spatial: AttnBlock::new(&mut b.scope("spatial"), channels, AttnMode::Spatial, "s_out"),
            channel: AttnBlock::new(&mut b.scope("channel"), channels, AttnMode::Channel, "c_out"),
            ffn_norm: b.norm("ffn_norm", channels),
            fc1: b.conv("fc1", 1, channels, FFN_RATIO * channels, 1),
            fc2: b.zero_conv("ffn_out", 1, FFN_RATIO * channels, channels),
            window,
            heads,
        }
    }

    pub fn forward<T: Scalar>(&self, tape: &mut Tape<'_, T>, x: Var) -> Result<Var> {
        let x = self.spatial.forward(tape, x, self.window, self.heads)?;
        let x = self.channel.forward(tape, x, self.window, self.heads)?;
        let n = self.ffn_norm.forward(tape, x)?;
        let h = self.fc1.forward(tape, n)?;
        let h = tape.gelu(h);
        let o = self.fc2.forward(tape, h)?;
        tape.add(x, o)
    }
}
