//! Cross-attention from one branch (query) into the aligned other branch
//! (key and value), added back onto the query.

use crate::autodiff::{AttnMode, Tape, Var};
use crate::error::{invalid, Result};
use crate::scalar::Scalar;

use super::layers::{padded_attention, Builder, Conv, Norm};

pub struct Mgl {
    q_norm: Norm,
    kv_norm: Norm,
    wq: Conv,
    wk: Conv,
    wv: Conv,
    window: usize,
    heads: usize,
}

impl Mgl {
    pub fn new<T: Scalar>(b: &mut Builder<'_, T>, channels: usize, window: usize, heads: usize) -> Self {
        Self {
            q_norm: b.norm("q_norm", channels),
            kv_norm: b.norm("kv_norm", channels),
            wq: b.linear("wq", channels, channels, false),
            wk: b.linear("wk", channels, channels, false),
            wv: b.linear("wv", channels, channels, true),
            window,
            heads,
        }
    }

    pub fn forward<T: Scalar>(&self, tape: &mut Tape<'_, T>, query: Var, context: Var) -> Result<Var> {
        if tape.shape(query) != tape.shape(context) {
            return invalid(format!(
                "cross-attention operands differ: query {:?} context {:?}",
                tape.shape(query),
                tape.shape(context)
            ));
        }
        let qn = self.q_norm.forward(tape, query)?;
        let cn = self.kv_norm.forward(tape, context)?;
        let q = self.wq.forward(tape, qn)?;
        let k = self.wk.forward(tape, cn)?;
        let v = self.wv.forward(tape, cn)?;
        let a = padded_attention(tape, q, k, v, self.window, self.heads, AttnMode::Spatial)?;
        tape.add(query, a)
    }
}
