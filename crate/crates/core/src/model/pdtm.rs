//! Laplacian-guided diffusivity response injected into the thermal branch.

use crate::autodiff::{laplacian_kernel, Tape, Var};
use crate::error::{invalid, Result};
use crate::scalar::Scalar;
use crate::tensor::FeatureMap;

use super::layers::{Builder, Conv};
use super::spl::SplDown;

/// Keeps the per-channel max normalisation strictly below one.
pub const EDGE_EPS: f64 = 1e-8;

/// Replicate-padded 5-point Laplacian of every channel.
pub fn laplacian_response<T: Scalar>(feat: &FeatureMap<T>) -> FeatureMap<T> {
    let (h, w, c) = feat.shape();
    let mut out = FeatureMap::zeros(h, w, c);
    laplacian_kernel(feat.data(), h, w, c, out.data_mut());
    out
}

fn channel_normalised_abs<T: Scalar>(m: &FeatureMap<T>) -> Vec<T> {
    let c = m.channels();
    let mut mx = vec![T::zero(); c];
    for px in m.data().chunks_exact(c) {
        for (a, &v) in mx.iter_mut().zip(px) {
            *a = a.max(v.abs());
        }
    }
    let eps = T::lit(EDGE_EPS);
    m.data().iter().enumerate().map(|(i, &v)| v.abs() / (mx[i % c] + eps)).collect()
}

/// `lambda_t |lap_t| / (max|lap_t| + eps) + lambda_o |lap_o| / (max|lap_o| + eps)`
/// with the max taken per channel.
pub fn guided_edge_map<T: Scalar>(
    lap_t: &FeatureMap<T>,
    lap_o: &FeatureMap<T>,
    lambda_t: f64,
    lambda_o: f64,
) -> Result<FeatureMap<T>> {
    if !lap_t.same_shape(lap_o) {
        return invalid(format!("edge maps differ in shape: {:?} vs {:?}", lap_t.shape(), lap_o.shape()));
    }
    let (h, w, c) = lap_t.shape();
    let (lt, lo) = (T::lit(lambda_t), T::lit(lambda_o));
    let data = channel_normalised_abs(lap_t)
        .into_iter()
        .zip(channel_normalised_abs(lap_o))
        .map(|(a, b)| lt * a + lo * b)
        .collect();
    FeatureMap::new(h, w, c, data)
}

pub struct PdtmOutput {
    pub out: Var,
    /// Diffusivity response, in (0, 1).
    pub response: Var,
}

pub struct Pdtm {
    down: SplDown,
    pre1: Conv,
    pre2: Conv,
    fuse_out: Conv,
    lambda_t: f64,
    lambda_o: f64,
}

impl Pdtm {
    pub fn new<T: Scalar>(b: &mut Builder<'_, T>, channels: usize, lambda_t: f64, lambda_o: f64) -> Self {
        Self {
            // the Laplacian annihilates a bias
            down: SplDown::without_bias(b, channels),
            pre1: b.conv("pre1", 3, channels, channels, 1),
            pre2: b.conv("pre2", 3, channels, channels, 1),
            fuse_out: b.zero_conv("fuse_out", 3, 2 * channels, channels),
            lambda_t,
            lambda_o,
        }
    }

    /// `t` is the enhanced thermal feature (`H x W x C`), `o` the enhanced
    /// optical feature (`2H x 2W x C`).
    pub fn forward<T: Scalar>(&self, tape: &mut Tape<'_, T>, t: Var, o: Var) -> Result<PdtmOutput> {
        let eps = T::lit(EDGE_EPS);
        let lap_t = tape.laplacian(t);
        let abs_t = tape.abs(lap_t);
        let m_t = tape.channel_max_norm(abs_t, eps)?;
        let od = self.down.forward(tape, o)?;
        let lap_o = tape.laplacian(od);
        let abs_o = tape.abs(lap_o);
        let m_o = tape.channel_max_norm(abs_o, eps)?;
        let m = tape.lin_comb(&[(m_t, T::lit(self.lambda_t)), (m_o, T::lit(self.lambda_o))])?;
        let a = self.pre1.forward(tape, m)?;
        let a = tape.gelu(a);
        let a = self.pre2.forward(tape, a)?;
        let response = tape.sigmoid(a);
        let cat = tape.concat(t, response)?;
        let f = self.fuse_out.forward(tape, cat)?;
        let out = tape.add(t, f)?;
        Ok(PdtmOutput { out, response })
    }
}
