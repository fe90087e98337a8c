//! Full-reference quality metrics.

use crate::degrade::gaussian_kernel;
use crate::error::{invalid, Result};
use crate::loss::forward_diff;
use crate::scalar::Scalar;
use crate::tensor::FeatureMap;

/// Reported PSNR for identical images.
pub const PSNR_IDENTICAL_DB: f64 = 99.0;

fn check_pair<T: Scalar>(a: &FeatureMap<T>, b: &FeatureMap<T>) -> Result<()> {
    if !a.same_shape(b) {
        return invalid(format!("image shapes differ: {:?} vs {:?}", a.shape(), b.shape()));
    }
    Ok(())
}

pub fn mse<T: Scalar>(a: &FeatureMap<T>, b: &FeatureMap<T>) -> Result<f64> {
    check_pair(a, b)?;
    let s: f64 = a.data().iter().zip(b.data()).map(|(x, y)| (x.as_f64() - y.as_f64()).powi(2)).sum();
    Ok(s / a.data().len() as f64)
}

/// `10 log10(peak^2 / MSE)` with the MSE pooled over all channels.
pub fn psnr_all<T: Scalar>(a: &FeatureMap<T>, b: &FeatureMap<T>, peak: f64) -> Result<f64> {
    if !(peak > 0.0) {
        return invalid(format!("PSNR peak must be positive, got {peak}"));
    }
    let m = mse(a, b)?;
    if m == 0.0 {
        return Ok(PSNR_IDENTICAL_DB);
    }
    Ok(10.0 * (peak * peak / m).log10())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SsimParams {
    pub window: usize,
    pub sigma: f64,
    pub k1: f64,
    pub k2: f64,
    /// Dynamic range of the pixel values.
    pub peak: f64,
}

impl Default for SsimParams {
    fn default() -> Self {
        Self { window: 11, sigma: 1.5, k1: 0.01, k2: 0.03, peak: 1.0 }
    }
}

/// Valid-mode separable filtering of one channel.
fn filter_valid(src: &[f64], h: usize, w: usize, k: &[f64]) -> Vec<f64> {
    let n = k.len();
    let (oh, ow) = (h - n + 1, w - n + 1);
    let mut mid = vec![0.0; h * ow];
    for y in 0..h {
        for x in 0..ow {
            mid[y * ow + x] = k.iter().enumerate().map(|(i, &kv)| kv * src[y * w + x + i]).sum();
        }
    }
    let mut out = vec![0.0; oh * ow];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = k.iter().enumerate().map(|(i, &kv)| kv * mid[(y + i) * ow + x]).sum();
        }
    }
    out
}

/// Gaussian-window SSIM per channel, averaged over channels.
pub fn ssim<T: Scalar>(a: &FeatureMap<T>, b: &FeatureMap<T>, p: &SsimParams) -> Result<f64> {
    check_pair(a, b)?;
    let (h, w, c) = a.shape();
    if p.window == 0 || h < p.window || w < p.window {
        return invalid(format!("image {h}x{w} smaller than SSIM window {}", p.window));
    }
    let k = gaussian_kernel(p.sigma, p.window);
    let c1 = (p.k1 * p.peak).powi(2);
    let c2 = (p.k2 * p.peak).powi(2);
    let mut acc = 0.0;
    for ch in 0..c {
        let x: Vec<f64> = a.data().iter().skip(ch).step_by(c).map(|v| v.as_f64()).collect();
        let y: Vec<f64> = b.data().iter().skip(ch).step_by(c).map(|v| v.as_f64()).collect();
        let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
        let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
        let xy: Vec<f64> = x.iter().zip(&y).map(|(p, q)| p * q).collect();
        let [mx, my, sxx, syy, sxy] = [&x, &y, &xx, &yy, &xy].map(|s| filter_valid(s, h, w, &k));
        let n = mx.len();
        let mut s = 0.0;
        for i in 0..n {
            let (ux, uy) = (mx[i], my[i]);
            let vx = sxx[i] - ux * ux;
            let vy = syy[i] - uy * uy;
            let cov = sxy[i] - ux * uy;
            s += ((2.0 * ux * uy + c1) * (2.0 * cov + c2)) / ((ux * ux + uy * uy + c1) * (vx + vy + c2));
        }
        acc += s / n as f64;
    }
    Ok(acc / c as f64)
}

#[derive(Clone, Debug)]
pub struct DifferenceMaps {
    /// `|lum(a) - lum(b)|`.
    pub temp_map: FeatureMap<f64>,
    /// Magnitude of the forward-difference gradient error of the luminance.
    pub grad_map: FeatureMap<f64>,
    pub temp_mae: f64,
    pub grad_mae: f64,
}

pub fn difference_maps<T: Scalar>(a: &FeatureMap<T>, b: &FeatureMap<T>) -> Result<DifferenceMaps> {
    check_pair(a, b)?;
    let (la, lb) = (a.luminance().cast::<f64>(), b.luminance().cast::<f64>());
    let (h, w, _) = la.shape();
    let temp_map = FeatureMap::from_fn(h, w, 1, |y, x, _| (la.get(y, x, 0) - lb.get(y, x, 0)).abs());
    let grad_map = FeatureMap::from_fn(h, w, 1, |y, x, _| {
        let (ax, ay) = forward_diff(&la, y, x, 0);
        let (bx, by) = forward_diff(&lb, y, x, 0);
        (ax - bx).hypot(ay - by)
    });
    let temp_mae = temp_map.mean();
    let grad_mae = grad_map.mean();
    Ok(DifferenceMaps { temp_map, grad_map, temp_mae, grad_mae })
}

#[derive(Clone, Debug)]
pub struct MetricReport {
    pub psnr: f64,
    pub ssim: f64,
    pub temp_mae: f64,
    pub grad_mae: f64,
    pub maps: Option<DifferenceMaps>,
}

/// All metrics for one `(prediction, reference)` pair on a `[0, peak]` scale.
pub fn evaluate_pair<T: Scalar>(pred: &FeatureMap<T>, reference: &FeatureMap<T>, peak: f64, keep_maps: bool) -> Result<MetricReport> {
    let psnr = psnr_all(pred, reference, peak)?;
    let ssim = ssim(pred, reference, &SsimParams { peak, ..Default::default() })?;
    let maps = difference_maps(pred, reference)?;
    Ok(MetricReport {
        psnr,
        ssim,
        temp_mae: maps.temp_mae,
        grad_mae: maps.grad_mae,
        maps: keep_maps.then_some(maps),
    })
}
