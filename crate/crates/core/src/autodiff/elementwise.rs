//! Pointwise activations and fixed spatial rearrangements.

use crate::error::{invalid, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

use super::tape::{slot, Op, Tape, Var};

const SQRT_2_OVER_PI: f64 = 0.797_884_560_802_865_4;
const GELU_C: f64 = 0.044_715;

#[inline]
fn gelu<T: Scalar>(x: T) -> T {
    let half = T::lit(0.5);
    let u = T::lit(SQRT_2_OVER_PI) * (x + T::lit(GELU_C) * x * x * x);
    half * x * (T::one() + u.tanh())
}

#[inline]
fn gelu_grad<T: Scalar>(x: T) -> T {
    let half = T::lit(0.5);
    let u = T::lit(SQRT_2_OVER_PI) * (x + T::lit(GELU_C) * x * x * x);
    let t = u.tanh();
    let du = T::lit(SQRT_2_OVER_PI) * (T::one() + T::lit(3.0 * GELU_C) * x * x);
    half * (T::one() + t) + half * x * (T::one() - t * t) * du
}

/// Replicate-padded 5-point Laplacian of one `H x W x C` buffer.
pub(crate) fn laplacian_kernel<T: Scalar>(x: &[T], h: usize, w: usize, c: usize, out: &mut [T]) {
    let four = T::lit(4.0);
    for y in 0..h {
        let ym = y.saturating_sub(1);
        let yp = (y + 1).min(h - 1);
        for xx in 0..w {
            let xm = xx.saturating_sub(1);
            let xp = (xx + 1).min(w - 1);
            let base = (y * w + xx) * c;
            for ch in 0..c {
                let v = x[(ym * w + xx) * c + ch]
                    + x[(yp * w + xx) * c + ch]
                    + x[(y * w + xm) * c + ch]
                    + x[(y * w + xp) * c + ch]
                    - four * x[base + ch];
                out[base + ch] = v;
            }
        }
    }
}

/// Index of the source row/column after symmetric (edge-excluded) mirroring.
#[inline]
pub(crate) fn reflect_index(i: usize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n - 1);
    let r = i % period;
    if r < n {
        r
    } else {
        period - r
    }
}

/// Input channel feeding output `(y*r + dy, x*r + dx, ch)`: sub-channel
/// `k = dy * r + dx` of group `ch`.
#[inline]
fn shuffle_src(ch: usize, dy: usize, dx: usize, r: usize) -> usize {
    ch * r * r + dy * r + dx
}

pub(crate) fn pixel_shuffle_kernel<T: Scalar>(x: &[T], h: usize, w: usize, cin: usize, r: usize, out: &mut [T]) {
    let cout = cin / (r * r);
    let ow = w * r;
    for y in 0..h {
        for xx in 0..w {
            let src = &x[(y * w + xx) * cin..(y * w + xx + 1) * cin];
            for dy in 0..r {
                for dx in 0..r {
                    let dst = ((y * r + dy) * ow + xx * r + dx) * cout;
                    for ch in 0..cout {
                        out[dst + ch] = src[shuffle_src(ch, dy, dx, r)];
                    }
                }
            }
        }
    }
}

impl<T: Scalar> Tape<'_, T> {
    /// `sum_i c_i * x_i` over same-shape variables.
    pub fn lin_comb(&mut self, terms: &[(Var, T)]) -> Result<Var> {
        let Some(&(first, _)) = terms.first() else {
            return invalid("lin_comb needs at least one term");
        };
        let shape = self.shape(first).to_vec();
        let mut out = Tensor::zeros(&shape);
        for &(v, c) in terms {
            let val = self.value(v);
            if val.shape != shape {
                return invalid(format!("lin_comb shape mismatch {:?} vs {:?}", val.shape, shape));
            }
            for (o, &x) in out.data.iter_mut().zip(&val.data) {
                *o += c * x;
            }
        }
        Ok(self.push(out, Op::LinComb { terms: terms.to_vec() }))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.lin_comb(&[(a, T::one()), (b, T::one())])
    }

    pub fn gelu(&mut self, x: Var) -> Var {
        let v = self.value(x);
        let out = Tensor { shape: v.shape.clone(), data: v.data.iter().map(|&a| gelu(a)).collect() };
        self.push(out, Op::Gelu { x })
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        let v = self.value(x);
        let out = Tensor {
            shape: v.shape.clone(),
            data: v.data.iter().map(|&a| T::one() / (T::one() + (-a).exp())).collect(),
        };
        self.push(out, Op::Sigmoid { x })
    }

    pub fn abs(&mut self, x: Var) -> Var {
        let v = self.value(x);
        let out = Tensor { shape: v.shape.clone(), data: v.data.iter().map(|a| a.abs()).collect() };
        self.push(out, Op::Abs { x })
    }

    /// `x / (max_spatial(x) + eps)` per channel, for non-negative `x`.
    pub fn channel_max_norm(&mut self, x: Var, eps: T) -> Result<Var> {
        let (h, w, c) = self.hwc(x);
        let xv = &self.value(x).data;
        let mut argmax = vec![0usize; c];
        let mut maxv = vec![T::neg_infinity(); c];
        for p in 0..h * w {
            for ch in 0..c {
                let v = xv[p * c + ch];
                if v > maxv[ch] {
                    maxv[ch] = v;
                    argmax[ch] = p * c + ch;
                }
            }
        }
        let denom: Vec<T> = maxv.iter().map(|&m| m + eps).collect();
        let mut out = Tensor::zeros(&[h, w, c]);
        for (i, (o, &v)) in out.data.iter_mut().zip(xv).enumerate() {
            *o = v / denom[i % c];
        }
        Ok(self.push(out, Op::ChannelMaxNorm { x, argmax, denom }))
    }

    /// Fixed 5-point Laplacian per channel with replicate padding.
    pub fn laplacian(&mut self, x: Var) -> Var {
        let (h, w, c) = self.hwc(x);
        let mut out = Tensor::zeros(&[h, w, c]);
        laplacian_kernel(&self.value(x).data, h, w, c, &mut out.data);
        self.push(out, Op::Laplacian { x })
    }

    /// Channel concatenation `[a, b]`.
    pub fn concat(&mut self, a: Var, b: Var) -> Result<Var> {
        let (h, w, ca) = self.hwc(a);
        let (hb, wb, cb) = self.hwc(b);
        if (h, w) != (hb, wb) {
            return invalid(format!("concat spatial mismatch {h}x{w} vs {hb}x{wb}"));
        }
        let av = &self.value(a).data;
        let bv = &self.value(b).data;
        let mut out = Vec::with_capacity(h * w * (ca + cb));
        for p in 0..h * w {
            out.extend_from_slice(&av[p * ca..(p + 1) * ca]);
            out.extend_from_slice(&bv[p * cb..(p + 1) * cb]);
        }
        let t = Tensor { shape: vec![h, w, ca + cb], data: out };
        Ok(self.push(t, Op::Concat { a, b }))
    }

    /// `H x W x (C r^2)` to `rH x rW x C`.
    pub fn pixel_shuffle(&mut self, x: Var, r: usize) -> Result<Var> {
        let (h, w, c) = self.hwc(x);
        if r == 0 || c % (r * r) != 0 {
            return invalid(format!("pixel_shuffle: {c} channels not divisible by {r}^2"));
        }
        let mut out = Tensor::zeros(&[h * r, w * r, c / (r * r)]);
        pixel_shuffle_kernel(&self.value(x).data, h, w, c, r, &mut out.data);
        Ok(self.push(out, Op::PixelShuffle { x, r }))
    }

    /// Mirror-extends the bottom and right edges to `new_h x new_w`.
    pub fn pad_reflect(&mut self, x: Var, new_h: usize, new_w: usize) -> Result<Var> {
        let (h, w, c) = self.hwc(x);
        if new_h < h || new_w < w {
            return invalid("pad_reflect target smaller than input");
        }
        if (new_h, new_w) == (h, w) {
            return Ok(x);
        }
        let xv = &self.value(x).data;
        let mut out = Tensor::zeros(&[new_h, new_w, c]);
        for y in 0..new_h {
            let sy = reflect_index(y, h);
            for xx in 0..new_w {
                let sx = reflect_index(xx, w);
                let dst = (y * new_w + xx) * c;
                let src = (sy * w + sx) * c;
                out.data[dst..dst + c].copy_from_slice(&xv[src..src + c]);
            }
        }
        Ok(self.push(out, Op::PadReflect { x }))
    }

    /// Keeps the top-left `h x w` window.
    pub fn crop(&mut self, x: Var, h: usize, w: usize) -> Result<Var> {
        let (ih, iw, c) = self.hwc(x);
        if h > ih || w > iw || h == 0 || w == 0 {
            return invalid(format!("crop {h}x{w} outside {ih}x{iw}"));
        }
        if (h, w) == (ih, iw) {
            return Ok(x);
        }
        let xv = &self.value(x).data;
        let mut out = Vec::with_capacity(h * w * c);
        for y in 0..h {
            out.extend_from_slice(&xv[y * iw * c..(y * iw + w) * c]);
        }
        let t = Tensor { shape: vec![h, w, c], data: out };
        Ok(self.push(t, Op::Crop { x }))
    }
}

pub(crate) fn gelu_backward<T: Scalar>(tape: &Tape<'_, T>, g: &Tensor<T>, x: Var, grads: &mut [Option<Tensor<T>>]) {
    let xv = &tape.value(x).data;
    let dx = slot(grads, x, tape);
    for ((d, &gv), &xi) in dx.data.iter_mut().zip(&g.data).zip(xv) {
        *d += gv * gelu_grad(xi);
    }
}

pub(crate) fn sigmoid_backward<T: Scalar>(
    tape: &Tape<'_, T>,
    g: &Tensor<T>,
    y: &Tensor<T>,
    x: Var,
    grads: &mut [Option<Tensor<T>>],
) {
    let dx = slot(grads, x, tape);
    for ((d, &gv), &yi) in dx.data.iter_mut().zip(&g.data).zip(&y.data) {
        *d += gv * yi * (T::one() - yi);
    }
}

pub(crate) fn abs_backward<T: Scalar>(tape: &Tape<'_, T>, g: &Tensor<T>, x: Var, grads: &mut [Option<Tensor<T>>]) {
    let xv = &tape.value(x).data;
    let dx = slot(grads, x, tape);
    for ((d, &gv), &xi) in dx.data.iter_mut().zip(&g.data).zip(xv) {
        if xi > T::zero() {
            *d += gv;
        } else if xi < T::zero() {
            *d -= gv;
        }
    }
}

pub(crate) fn channel_max_norm_backward<T: Scalar>(
    tape: &Tape<'_, T>,
    g: &Tensor<T>,
    x: Var,
    argmax: &[usize],
    denom: &[T],
    grads: &mut [Option<Tensor<T>>],
) {
    let c = denom.len();
    let xv = &tape.value(x).data;
    let mut dmax = vec![T::zero(); c];
    let dx = slot(grads, x, tape);
    for (i, (&gv, &xi)) in g.data.iter().zip(xv).enumerate() {
        let ch = i % c;
        dx.data[i] += gv / denom[ch];
        dmax[ch] -= gv * xi / (denom[ch] * denom[ch]);
    }
    for ch in 0..c {
        dx.data[argmax[ch]] += dmax[ch];
    }
}

pub(crate) fn laplacian_backward<T: Scalar>(tape: &Tape<'_, T>, g: &Tensor<T>, x: Var, grads: &mut [Option<Tensor<T>>]) {
    let (h, w, c) = tape.hwc(x);
    let four = T::lit(4.0);
    let dx = slot(grads, x, tape);
    for y in 0..h {
        let ym = y.saturating_sub(1);
        let yp = (y + 1).min(h - 1);
        for xx in 0..w {
            let xm = xx.saturating_sub(1);
            let xp = (xx + 1).min(w - 1);
            let base = (y * w + xx) * c;
            for ch in 0..c {
                let gv = g.data[base + ch];
                dx.data[(ym * w + xx) * c + ch] += gv;
                dx.data[(yp * w + xx) * c + ch] += gv;
                dx.data[(y * w + xm) * c + ch] += gv;
                dx.data[(y * w + xp) * c + ch] += gv;
                dx.data[base + ch] -= four * gv;
            }
        }
    }
}

pub(crate) fn concat_backward<T: Scalar>(
    tape: &Tape<'_, T>,
    g: &Tensor<T>,
    a: Var,
    b: Var,
    grads: &mut [Option<Tensor<T>>],
) {
    let (h, w, ca) = tape.hwc(a);
    let cb = tape.hwc(b).2;
    let c = ca + cb;
    {
        let da = slot(grads, a, tape);
        for p in 0..h * w {
            for (d, &gv) in da.data[p * ca..(p + 1) * ca].iter_mut().zip(&g.data[p * c..p * c + ca]) {
                *d += gv;
            }
        }
    }
    let db = slot(grads, b, tape);
    for p in 0..h * w {
        for (d, &gv) in db.data[p * cb..(p + 1) * cb].iter_mut().zip(&g.data[p * c + ca..(p + 1) * c]) {
            *d += gv;
        }
    }
}

pub(crate) fn pixel_shuffle_backward<T: Scalar>(
    tape: &Tape<'_, T>,
    g: &Tensor<T>,
    x: Var,
    r: usize,
    grads: &mut [Option<Tensor<T>>],
) {
    let (h, w, cin) = tape.hwc(x);
    let cout = cin / (r * r);
    let ow = w * r;
    let dx = slot(grads, x, tape);
    for y in 0..h {
        for xx in 0..w {
            let dst = (y * w + xx) * cin;
            for dy in 0..r {
                for ddx in 0..r {
                    let src = ((y * r + dy) * ow + xx * r + ddx) * cout;
                    for ch in 0..cout {
                        dx.data[dst + shuffle_src(ch, dy, ddx, r)] += g.data[src + ch];
                    }
                }
            }
        }
    }
}

pub(crate) fn pad_reflect_backward<T: Scalar>(tape: &Tape<'_, T>, g: &Tensor<T>, x: Var, grads: &mut [Option<Tensor<T>>]) {
    let (h, w, c) = tape.hwc(x);
    let (nh, nw, _) = g.hwc();
    let dx = slot(grads, x, tape);
    for y in 0..nh {
        let sy = reflect_index(y, h);
        for xx in 0..nw {
            let sx = reflect_index(xx, w);
            let src = (y * nw + xx) * c;
            let dst = (sy * w + sx) * c;
            for ch in 0..c {
                dx.data[dst + ch] += g.data[src + ch];
            }
        }
    }
}

pub(crate) fn crop_backward<T: Scalar>(tape: &Tape<'_, T>, g: &Tensor<T>, x: Var, grads: &mut [Option<Tensor<T>>]) {
    let (_, iw, c) = tape.hwc(x);
    let (h, w, _) = g.hwc();
    let dx = slot(grads, x, tape);
    for y in 0..h {
        for (d, &gv) in dx.data[y * iw * c..(y * iw + w) * c].iter_mut().zip(&g.data[y * w * c..(y + 1) * w * c]) {
            *d += gv;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reflect_index_mirrors_without_repeating_edge() {
        let idx: Vec<usize> = (0..9).map(|i| reflect_index(i, 4)).collect();
        assert_eq!(idx, vec![0, 1, 2, 3, 2, 1, 0, 1, 2]);
        assert_eq!(reflect_index(5, 1), 0);
    }

    #[test]
    fn gelu_derivative_matches_difference_quotient() {
        for &x in &[-3.0f64, -0.7, 0.0, 0.4, 2.5] {
            let h = 1e-6;
            let fd = (gelu(x + h) - gelu(x - h)) / (2.0 * h);
            assert!((fd - gelu_grad(x)).abs() < 1e-8);
        }
    }
}
