//! Parameterised building blocks shared by the network modules.

use rand_chacha::ChaCha8Rng;

use crate::autodiff::{AttnMode, Tape, Var};
use crate::error::Result;
use crate::params::{Init, ParamId, ParamStore};
use crate::scalar::Scalar;

/// Registers parameter groups under a dotted name prefix.
pub struct Builder<'a, T> {
    pub(crate) store: &'a mut ParamStore<T>,
    pub(crate) rng: &'a mut ChaCha8Rng,
    prefix: String,
    std: f64,
}

impl<'a, T: Scalar> Builder<'a, T> {
    pub fn new(store: &'a mut ParamStore<T>, rng: &'a mut ChaCha8Rng, std: f64) -> Self {
        Self { store, rng, prefix: String::new(), std }
    }

    /// A builder whose names are nested one level below this one.
    pub fn scope(&mut self, name: &str) -> Builder<'_, T> {
        let prefix = if self.prefix.is_empty() { name.to_string() } else { format!("{}.{}", self.prefix, name) };
        Builder { store: self.store, rng: self.rng, prefix, std: self.std }
    }

    fn add(&mut self, name: &str, shape: &[usize], init: Init) -> ParamId {
        let full = if self.prefix.is_empty() { name.to_string() } else { format!("{}.{}", self.prefix, name) };
        self.store.add(&full, shape, init, self.rng)
    }

    fn weight_init(&self, zero: bool) -> Init {
        if zero {
            Init::Zeros
        } else {
            Init::TruncNormal(self.std)
        }
    }

    /// `k x k` convolution, padded to keep the size at stride 1.
    pub fn conv(&mut self, name: &str, k: usize, cin: usize, cout: usize, stride: usize) -> Conv {
        self.conv_with(name, k, cin, cout, stride, true, false)
    }

    /// Convolution whose weights and bias start at zero.
    pub fn zero_conv(&mut self, name: &str, k: usize, cin: usize, cout: usize) -> Conv {
        self.conv_with(name, k, cin, cout, 1, true, true)
    }

    /// Bias-free pointwise projection.
    pub fn linear(&mut self, name: &str, cin: usize, cout: usize, zero: bool) -> Conv {
        self.conv_with(name, 1, cin, cout, 1, false, zero)
    }

    /// Bias-free `k x k` convolution.
    pub fn strided_linear(&mut self, name: &str, k: usize, cin: usize, cout: usize, stride: usize) -> Conv {
        self.conv_with(name, k, cin, cout, stride, false, false)
    }

    #[allow(clippy::too_many_arguments)]
    fn conv_with(
        &mut self,
        name: &str,
        k: usize,
        cin: usize,
        cout: usize,
        stride: usize,
        bias: bool,
        zero: bool,
    ) -> Conv {
        let mut s = self.scope(name);
        let init = s.weight_init(zero);
        let w = s.add("w", &[k, k, cin, cout], init);
        let b = bias.then(|| s.add("b", &[cout], Init::Zeros));
        Conv { w, b, stride, pad: k / 2 }
    }

    pub fn norm(&mut self, name: &str, c: usize) -> Norm {
        let mut s = self.scope(name);
        let gamma = s.add("gamma", &[c], Init::Ones);
        let beta = s.add("beta", &[c], Init::Zeros);
        Norm { gamma, beta }
    }
}

#[derive(Clone, Debug)]
pub struct Conv {
    pub w: ParamId,
    pub b: Option<ParamId>,
    pub stride: usize,
    pub pad: usize,
}

impl Conv {
    pub fn forward<T: Scalar>(&self, tape: &mut Tape<'_, T>, x: Var) -> Result<Var> {
        let w = tape.param(self.w);
        let b = self.b.map(|b| tape.param(b));
        tape.conv2d(x, w, b, self.stride, self.pad)
    }

    pub fn params(&self) -> impl Iterator<Item = ParamId> {
        std::iter::once(self.w).chain(self.b)
    }
}

/// Per-pixel layer normalisation with learnable affine terms.
#[derive(Clone, Debug)]
pub struct Norm {
    pub gamma: ParamId,
    pub beta: ParamId,
}

impl Norm {
    pub fn forward<T: Scalar>(&self, tape: &mut Tape<'_, T>, x: Var) -> Result<Var> {
        let g = tape.param(self.gamma);
        let b = tape.param(self.beta);
        tape.layer_norm(x, g, b)
    }
}

/// Smallest multiple of `m` that is at least `n`.
pub(crate) fn round_up(n: usize, m: usize) -> usize {
    n.div_ceil(m) * m
}

/// Window attention on maps whose size need not divide the window: operands
/// are reflect-padded at the bottom/right and the result cropped back.
pub(crate) fn padded_attention<T: Scalar>(
    tape: &mut Tape<'_, T>,
    q: Var,
    k: Var,
    v: Var,
    window: usize,
    heads: usize,
    mode: AttnMode,
) -> Result<Var> {
    let (h, w, _) = tape.hwc(q);
    let (ph, pw) = (round_up(h, window), round_up(w, window));
    let q = tape.pad_reflect(q, ph, pw)?;
    let k = tape.pad_reflect(k, ph, pw)?;
    let v = tape.pad_reflect(v, ph, pw)?;
    let o = tape.window_attention(q, k, v, window, heads, mode)?;
    tape.crop(o, h, w)
}
