use crate::error::{invalid, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

use super::tape::{slot, Op, Tape, Var};

const LN_EPS: f64 = 1e-5;

impl<T: Scalar> Tape<'_, T> {
    /// Layer normalisation over the last (channel) axis.
    pub fn layer_norm(&mut self, x: Var, gamma: Var, beta: Var) -> Result<Var> {
        let c = *self.shape(x).last().expect("rank >= 1");
        if self.shape(gamma) != [c] || self.shape(beta) != [c] {
            return invalid(format!("layer_norm affine params must have shape [{c}]"));
        }
        let xv = self.value(x);
        let rows = xv.len() / c;
        let eps = T::lit(LN_EPS);
        let inv_c = T::lit(1.0 / c as f64);
        let gv = &self.value(gamma).data;
        let bv = &self.value(beta).data;
        let mut out = Tensor::zeros(&xv.shape);
        let mut mean = Vec::with_capacity(rows);
        let mut rstd = Vec::with_capacity(rows);
        for (row, orow) in xv.data.chunks_exact(c).zip(out.data.chunks_exact_mut(c)) {
            let m = row.iter().copied().sum::<T>() * inv_c;
            let var = row.iter().map(|&v| (v - m) * (v - m)).sum::<T>() * inv_c;
            let r = T::one() / (var + eps).sqrt();
            for i in 0..c {
                orow[i] = (row[i] - m) * r * gv[i] + bv[i];
            }
            mean.push(m);
            rstd.push(r);
        }
        Ok(self.push(out, Op::LayerNorm { x, gamma, beta, mean, rstd }))
    }
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn layer_norm_backward<T: Scalar>(
    tape: &Tape<'_, T>,
    g: &Tensor<T>,
    x: Var,
    gamma: Var,
    beta: Var,
    mean: &[T],
    rstd: &[T],
    grads: &mut [Option<Tensor<T>>],
) {
    let xv = &tape.value(x).data;
    let c = tape.value(gamma).len();
    let gv = tape.value(gamma).data.clone();
    let inv_c = T::lit(1.0 / c as f64);
    let mut dgamma = vec![T::zero(); c];
    let mut dbeta = vec![T::zero(); c];
    let mut dxhat = vec![T::zero(); c];
    let dx = slot(grads, x, tape);
    for (r, (row, grow)) in xv.chunks_exact(c).zip(g.data.chunks_exact(c)).enumerate() {
        let (m, s) = (mean[r], rstd[r]);
        let mut sum_d = T::zero();
        let mut sum_dx = T::zero();
        for i in 0..c {
            let xhat = (row[i] - m) * s;
            dgamma[i] += grow[i] * xhat;
            dbeta[i] += grow[i];
            dxhat[i] = grow[i] * gv[i];
            sum_d += dxhat[i];
            sum_dx += dxhat[i] * xhat;
        }
        let md = sum_d * inv_c;
        let mdx = sum_dx * inv_c;
        let drow = &mut dx.data[r * c..(r + 1) * c];
        for i in 0..c {
            let xhat = (row[i] - m) * s;
            drow[i] += s * (dxhat[i] - md - xhat * mdx);
        }
    }
    for (a, b) in slot(grads, gamma, tape).data.iter_mut().zip(&dgamma) {
        *a += *b;
    }
    for (a, b) in slot(grads, beta, tape).data.iter_mut().zip(&dbeta) {
        *a += *b;
    }
}
