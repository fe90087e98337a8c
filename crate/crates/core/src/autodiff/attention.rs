//! Multi-head attention inside non-overlapping square windows.
//!
//! `Spatial` mode attends over the `window^2` tokens of each window with
//! `softmax(Q K^T / sqrt(d)) V`. `Channel` mode transposes the roles: the
//! per-head `d x d` channel correlation `softmax(Q^T K / sqrt(n))` mixes the
//! value channels of every token in the window. Either way the cost is linear
//! in the number of windows.

use crate::error::{invalid, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

use super::tape::{slot, Op, Tape, Var};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AttnMode {
    Spatial,
    Channel,
}

struct Layout {
    h: usize,
    w: usize,
    c: usize,
    win: usize,
    d: usize,
    n: usize,
}

impl Layout {
    fn windows(&self) -> usize {
        (self.h / self.win) * (self.w / self.win)
    }

    /// Side of the per-head probability matrix.
    fn side(&self, mode: AttnMode) -> usize {
        match mode {
            AttnMode::Spatial => self.n,
            AttnMode::Channel => self.d,
        }
    }

    fn scale<T: Scalar>(&self, mode: AttnMode) -> T {
        match mode {
            AttnMode::Spatial => T::lit(1.0 / (self.d as f64).sqrt()),
            AttnMode::Channel => T::lit(1.0 / (self.n as f64).sqrt()),
        }
    }

    /// Copies window `wi` of an HWC buffer into a token-major `n x C` buffer.
    fn gather<T: Scalar>(&self, src: &[T], wi: usize, dst: &mut [T]) {
        let per_row = self.w / self.win;
        let (wy, wx) = (wi / per_row, wi % per_row);
        for ty in 0..self.win {
            let y = wy * self.win + ty;
            let s = (y * self.w + wx * self.win) * self.c;
            let d = ty * self.win * self.c;
            dst[d..d + self.win * self.c].copy_from_slice(&src[s..s + self.win * self.c]);
        }
    }

    fn scatter_add<T: Scalar>(&self, src: &[T], wi: usize, dst: &mut [T]) {
        let per_row = self.w / self.win;
        let (wy, wx) = (wi / per_row, wi % per_row);
        for ty in 0..self.win {
            let y = wy * self.win + ty;
            let d = (y * self.w + wx * self.win) * self.c;
            let s = ty * self.win * self.c;
            for (a, &b) in dst[d..d + self.win * self.c].iter_mut().zip(&src[s..s + self.win * self.c]) {
                *a += b;
            }
        }
    }
}

fn softmax_rows<T: Scalar>(m: &mut [T], side: usize) {
    for row in m.chunks_exact_mut(side) {
        let mx = row.iter().copied().fold(T::neg_infinity(), T::max);
        let mut s = T::zero();
        for v in row.iter_mut() {
            *v = (*v - mx).exp();
            s += *v;
        }
        let inv = T::one() / s;
        row.iter_mut().for_each(|v| *v *= inv);
    }
}

/// In-place `dS = P * (dP - rowsum(dP * P))`.
fn softmax_backward_rows<T: Scalar>(dp: &mut [T], p: &[T], side: usize) {
    for (drow, prow) in dp.chunks_exact_mut(side).zip(p.chunks_exact(side)) {
        let dot: T = drow.iter().zip(prow).map(|(&a, &b)| a * b).sum();
        for (d, &pv) in drow.iter_mut().zip(prow) {
            *d = pv * (*d - dot);
        }
    }
}

impl<T: Scalar> Tape<'_, T> {
    /// Windowed multi-head attention with pre-projected `q`, `k`, `v` (all
    /// `H x W x C`, spatial dims multiples of `window`).
    pub fn window_attention(
        &mut self,
        q: Var,
        k: Var,
        v: Var,
        window: usize,
        heads: usize,
        mode: AttnMode,
    ) -> Result<Var> {
        let (h, w, c) = self.hwc(q);
        if self.hwc(k) != (h, w, c) || self.hwc(v) != (h, w, c) {
            return invalid(format!(
                "attention operands differ in shape: q {:?} k {:?} v {:?}",
                self.shape(q),
                self.shape(k),
                self.shape(v)
            ));
        }
        if window == 0 || h % window != 0 || w % window != 0 {
            return invalid(format!("attention input {h}x{w} is not a multiple of window {window}"));
        }
        if heads == 0 || c % heads != 0 {
            return invalid(format!("{c} channels not divisible by {heads} heads"));
        }
        let lay = Layout { h, w, c, win: window, d: c / heads, n: window * window };
        let side = lay.side(mode);
        let scale: T = lay.scale(mode);
        let (n, d) = (lay.n, lay.d);
        let mut probs = vec![T::zero(); lay.windows() * heads * side * side];
        let mut out = Tensor::zeros(&[h, w, c]);
        let mut qb = vec![T::zero(); n * c];
        let mut kb = vec![T::zero(); n * c];
        let mut vb = vec![T::zero(); n * c];
        let mut ob = vec![T::zero(); n * c];
        {
            let (qv, kv, vv) = (&self.value(q).data, &self.value(k).data, &self.value(v).data);
            for wi in 0..lay.windows() {
                lay.gather(qv, wi, &mut qb);
                lay.gather(kv, wi, &mut kb);
                lay.gather(vv, wi, &mut vb);
                for hd in 0..heads {
                    let off = hd * d;
                    let pm = &mut probs[(wi * heads + hd) * side * side..(wi * heads + hd + 1) * side * side];
                    match mode {
                        AttnMode::Spatial => {
                            T::gemm(n, d, n, scale, &qb[off..], c, 1, &kb[off..], 1, c, T::zero(), pm, n, 1);
                            softmax_rows(pm, n);
                            T::gemm(n, n, d, T::one(), pm, n, 1, &vb[off..], c, 1, T::zero(), &mut ob[off..], c, 1);
                        }
                        AttnMode::Channel => {
                            T::gemm(d, n, d, scale, &qb[off..], 1, c, &kb[off..], c, 1, T::zero(), pm, d, 1);
                            softmax_rows(pm, d);
                            T::gemm(n, d, d, T::one(), &vb[off..], c, 1, pm, 1, d, T::zero(), &mut ob[off..], c, 1);
                        }
                    }
                }
                lay.scatter_add(&ob, wi, &mut out.data);
            }
        }
        Ok(self.push(out, Op::Attention { q, k, v, window, heads, mode, probs }))
    }
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn backward<T: Scalar>(
    tape: &Tape<'_, T>,
    g: &Tensor<T>,
    q: Var,
    k: Var,
    v: Var,
    window: usize,
    heads: usize,
    mode: AttnMode,
    probs: &[T],
    grads: &mut [Option<Tensor<T>>],
) {
    let (h, w, c) = tape.hwc(q);
    let lay = Layout { h, w, c, win: window, d: c / heads, n: window * window };
    let side = lay.side(mode);
    let scale: T = lay.scale(mode);
    let (n, d) = (lay.n, lay.d);
    let (qv, kv, vv) = (&tape.value(q).data, &tape.value(k).data, &tape.value(v).data);

    let mut dq = vec![T::zero(); h * w * c];
    let mut dk = vec![T::zero(); h * w * c];
    let mut dv = vec![T::zero(); h * w * c];
    let mut qb = vec![T::zero(); n * c];
    let mut kb = vec![T::zero(); n * c];
    let mut vb = vec![T::zero(); n * c];
    let mut gb = vec![T::zero(); n * c];
    let mut dqb = vec![T::zero(); n * c];
    let mut dkb = vec![T::zero(); n * c];
    let mut dvb = vec![T::zero(); n * c];
    let mut ds = vec![T::zero(); side * side];

    for wi in 0..lay.windows() {
        lay.gather(qv, wi, &mut qb);
        lay.gather(kv, wi, &mut kb);
        lay.gather(vv, wi, &mut vb);
        lay.gather(&g.data, wi, &mut gb);
        for hd in 0..heads {
            let off = hd * d;
            let pm = &probs[(wi * heads + hd) * side * side..(wi * heads + hd + 1) * side * side];
            match mode {
                AttnMode::Spatial => {
                    // dV = P^T dO
                    T::gemm(n, n, d, T::one(), pm, 1, n, &gb[off..], c, 1, T::zero(), &mut dvb[off..], c, 1);
                    // dP = dO V^T
                    T::gemm(n, d, n, T::one(), &gb[off..], c, 1, &vb[off..], 1, c, T::zero(), &mut ds, n, 1);
                    softmax_backward_rows(&mut ds, pm, n);
                    // dQ = s dS K, dK = s dS^T Q
                    T::gemm(n, n, d, scale, &ds, n, 1, &kb[off..], c, 1, T::zero(), &mut dqb[off..], c, 1);
                    T::gemm(n, n, d, scale, &ds, 1, n, &qb[off..], c, 1, T::zero(), &mut dkb[off..], c, 1);
                }
                AttnMode::Channel => {
                    // O = V P^T: dV = dO P, dP = dO^T V
                    T::gemm(n, d, d, T::one(), &gb[off..], c, 1, pm, d, 1, T::zero(), &mut dvb[off..], c, 1);
                    T::gemm(d, n, d, T::one(), &gb[off..], 1, c, &vb[off..], c, 1, T::zero(), &mut ds, d, 1);
                    softmax_backward_rows(&mut ds, pm, d);
                    // S = s Q^T K: dQ = s K dS^T, dK = s Q dS
                    T::gemm(n, d, d, scale, &kb[off..], c, 1, &ds, 1, d, T::zero(), &mut dqb[off..], c, 1);
                    T::gemm(n, d, d, scale, &qb[off..], c, 1, &ds, d, 1, T::zero(), &mut dkb[off..], c, 1);
                }
            }
        }
        lay.scatter_add(&dqb, wi, &mut dq);
        lay.scatter_add(&dkb, wi, &mut dk);
        lay.scatter_add(&dvb, wi, &mut dv);
    }
    for (var, buf) in [(q, dq), (k, dk), (v, dv)] {
        let acc = slot(grads, var, tape);
        for (a, b) in acc.data.iter_mut().zip(buf) {
            *a += b;
        }
    }
}
