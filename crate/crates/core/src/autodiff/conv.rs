//! 2-D convolution on `H x W x C` maps via im2col and gemm.
//!
//! Weights are stored `[k, k, c_in, c_out]` so that the flattened kernel is a
//! `(k*k*c_in) x c_out` matrix and the output lands directly in HWC order.

use crate::error::{invalid, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

use super::tape::{slot, Op, Tape, Var};

#[derive(Clone, Copy, Debug)]
pub(crate) struct Geom {
    h: usize,
    w: usize,
    cin: usize,
    k: usize,
    stride: usize,
    pad: usize,
    oh: usize,
    ow: usize,
}

impl Geom {
    fn new(h: usize, w: usize, cin: usize, k: usize, stride: usize, pad: usize) -> Result<Self> {
        if stride == 0 || k == 0 {
            return invalid("conv kernel and stride must be >= 1");
        }
        if h + 2 * pad < k || w + 2 * pad < k {
            return invalid(format!("conv input {h}x{w} too small for kernel {k} with pad {pad}"));
        }
        let oh = (h + 2 * pad - k) / stride + 1;
        let ow = (w + 2 * pad - k) / stride + 1;
        Ok(Self { h, w, cin, k, stride, pad, oh, ow })
    }

    #[inline]
    fn pixels(&self) -> usize {
        self.oh * self.ow
    }

    #[inline]
    fn cols(&self) -> usize {
        self.k * self.k * self.cin
    }

    fn is_pointwise(&self) -> bool {
        self.k == 1 && self.stride == 1 && self.pad == 0
    }
}

fn im2col<T: Scalar>(x: &[T], g: &Geom, col: &mut [T]) {
    let kc = g.cols();
    let cin = g.cin;
    for oy in 0..g.oh {
        for ox in 0..g.ow {
            let row = &mut col[(oy * g.ow + ox) * kc..(oy * g.ow + ox + 1) * kc];
            for ky in 0..g.k {
                let iy = (oy * g.stride + ky) as isize - g.pad as isize;
                for kx in 0..g.k {
                    let ix = (ox * g.stride + kx) as isize - g.pad as isize;
                    let dst = &mut row[(ky * g.k + kx) * cin..(ky * g.k + kx + 1) * cin];
                    if iy < 0 || ix < 0 || iy >= g.h as isize || ix >= g.w as isize {
                        dst.iter_mut().for_each(|v| *v = T::zero());
                    } else {
                        let src = (iy as usize * g.w + ix as usize) * cin;
                        dst.copy_from_slice(&x[src..src + cin]);
                    }
                }
            }
        }
    }
}

fn col2im<T: Scalar>(col: &[T], g: &Geom, dx: &mut [T]) {
    let kc = g.cols();
    let cin = g.cin;
    for oy in 0..g.oh {
        for ox in 0..g.ow {
            let row = &col[(oy * g.ow + ox) * kc..(oy * g.ow + ox + 1) * kc];
            for ky in 0..g.k {
                let iy = (oy * g.stride + ky) as isize - g.pad as isize;
                if iy < 0 || iy >= g.h as isize {
                    continue;
                }
                for kx in 0..g.k {
                    let ix = (ox * g.stride + kx) as isize - g.pad as isize;
                    if ix < 0 || ix >= g.w as isize {
                        continue;
                    }
                    let dst = (iy as usize * g.w + ix as usize) * cin;
                    let src = &row[(ky * g.k + kx) * cin..(ky * g.k + kx + 1) * cin];
                    for (d, &s) in dx[dst..dst + cin].iter_mut().zip(src) {
                        *d += s;
                    }
                }
            }
        }
    }
}

impl<T: Scalar> Tape<'_, T> {
    /// Zero-padded convolution. `w` has shape `[k, k, c_in, c_out]`, `b`
    /// (optional) has shape `[c_out]`.
    pub fn conv2d(&mut self, x: Var, w: Var, b: Option<Var>, stride: usize, pad: usize) -> Result<Var> {
        let (h, wd, cin) = {
            let s = self.shape(x);
            if s.len() != 3 {
                return invalid(format!("conv2d input must be HxWxC, got {:?}", s));
            }
            (s[0], s[1], s[2])
        };
        let ws = self.shape(w).to_vec();
        if ws.len() != 4 || ws[0] != ws[1] || ws[2] != cin {
            return invalid(format!("conv2d weight {:?} incompatible with {} input channels", ws, cin));
        }
        let (k, cout) = (ws[0], ws[3]);
        if let Some(b) = b {
            if self.shape(b) != [cout] {
                return invalid(format!("conv2d bias shape {:?} != [{}]", self.shape(b), cout));
            }
        }
        let g = Geom::new(h, wd, cin, k, stride, pad)?;
        let p = g.pixels();
        let mut out = Tensor::zeros(&[g.oh, g.ow, cout]);
        {
            let xv = &self.value(x).data;
            let wv = &self.value(w).data;
            if g.is_pointwise() {
                T::gemm(p, cin, cout, T::one(), xv, cin, 1, wv, cout, 1, T::zero(), &mut out.data, cout, 1);
            } else {
                let kc = g.cols();
                let mut col = vec![T::zero(); p * kc];
                im2col(xv, &g, &mut col);
                T::gemm(p, kc, cout, T::one(), &col, kc, 1, wv, cout, 1, T::zero(), &mut out.data, cout, 1);
            }
            if let Some(b) = b {
                let bv = &self.value(b).data;
                for row in out.data.chunks_exact_mut(cout) {
                    for (o, &bb) in row.iter_mut().zip(bv) {
                        *o += bb;
                    }
                }
            }
        }
        Ok(self.push(out, Op::Conv2d { x, w, b, stride, pad }))
    }
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn backward<T: Scalar>(
    tape: &Tape<'_, T>,
    g: &Tensor<T>,
    x: Var,
    w: Var,
    b: Option<Var>,
    stride: usize,
    pad: usize,
    grads: &mut [Option<Tensor<T>>],
) {
    let (h, wd, cin) = tape.hwc(x);
    let ws = tape.shape(w);
    let (k, cout) = (ws[0], ws[3]);
    let geom = Geom::new(h, wd, cin, k, stride, pad).expect("geometry validated in forward");
    let p = geom.pixels();
    let kc = geom.cols();
    let xv = &tape.value(x).data;
    let wv = &tape.value(w).data;

    if let Some(b) = b {
        let db = slot(grads, b, tape);
        for row in g.data.chunks_exact(cout) {
            for (d, &gv) in db.data.iter_mut().zip(row) {
                *d += gv;
            }
        }
    }

    if geom.is_pointwise() {
        let dw = slot(grads, w, tape);
        T::gemm(cin, p, cout, T::one(), xv, 1, cin, &g.data, cout, 1, T::one(), &mut dw.data, cout, 1);
        let dx = slot(grads, x, tape);
        T::gemm(p, cout, cin, T::one(), &g.data, cout, 1, wv, 1, cout, T::one(), &mut dx.data, cin, 1);
        return;
    }

    let mut col = vec![T::zero(); p * kc];
    im2col(xv, &geom, &mut col);
    {
        let dw = slot(grads, w, tape);
        T::gemm(kc, p, cout, T::one(), &col, 1, kc, &g.data, cout, 1, T::one(), &mut dw.data, cout, 1);
    }
    // reuse the buffer for d(col)
    T::gemm(p, cout, kc, T::one(), &g.data, cout, 1, wv, 1, cout, T::zero(), &mut col, kc, 1);
    let dx = slot(grads, x, tape);
    col2im(&col, &geom, &mut dx.data);
}

#[cfg(test)]
mod tests {
    use crate::params::ParamStore;

    use super::*;

    fn naive_conv(x: &Tensor<f64>, w: &Tensor<f64>, stride: usize, pad: usize) -> Tensor<f64> {
        let (h, wd, cin) = x.hwc();
        let (k, cout) = (w.shape[0], w.shape[3]);
        let oh = (h + 2 * pad - k) / stride + 1;
        let ow = (wd + 2 * pad - k) / stride + 1;
        let mut out = Tensor::zeros(&[oh, ow, cout]);
        for oy in 0..oh {
            for ox in 0..ow {
                for o in 0..cout {
                    let mut s = 0.0;
                    for ky in 0..k {
                        for kx in 0..k {
                            let iy = (oy * stride + ky) as isize - pad as isize;
                            let ix = (ox * stride + kx) as isize - pad as isize;
                            if iy < 0 || ix < 0 || iy >= h as isize || ix >= wd as isize {
                                continue;
                            }
                            for c in 0..cin {
                                s += x.data[(iy as usize * wd + ix as usize) * cin + c]
                                    * w.data[((ky * k + kx) * cin + c) * cout + o];
                            }
                        }
                    }
                    out.data[(oy * ow + ox) * cout + o] = s;
                }
            }
        }
        out
    }

    fn ramp(shape: &[usize], f: f64) -> Tensor<f64> {
        let n: usize = shape.iter().product();
        Tensor::from_vec(shape, (0..n).map(|i| ((i as f64) * f).sin()).collect()).unwrap()
    }

    #[test]
    fn matches_naive_for_strides_and_kernels() {
        let store = ParamStore::<f64>::new();
        for &(k, stride, pad) in &[(3, 1, 1), (3, 2, 1), (1, 1, 0), (5, 1, 2)] {
            let mut tape = Tape::new(&store);
            let x = tape.leaf(ramp(&[6, 8, 3], 0.7));
            let w = tape.leaf(ramp(&[k, k, 3, 4], 0.3));
            let y = tape.conv2d(x, w, None, stride, pad).unwrap();
            let want = naive_conv(tape.value(x), tape.value(w), stride, pad);
            assert_eq!(tape.shape(y), &want.shape[..]);
            for (a, b) in tape.value(y).data.iter().zip(&want.data) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rejects_channel_mismatch() {
        let store = ParamStore::<f64>::new();
        let mut tape = Tape::new(&store);
        let x = tape.leaf(Tensor::zeros(&[4, 4, 2]));
        let w = tape.leaf(Tensor::zeros(&[3, 3, 3, 1]));
        assert!(tape.conv2d(x, w, None, 1, 1).is_err());
    }
}
