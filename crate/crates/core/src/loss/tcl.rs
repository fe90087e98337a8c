//! Reconstruction and temperature-consistency losses.
//!
//! Values are accumulated in `f64` whatever the image scalar type.

use crate::error::{invalid, Error, Result};
use crate::scalar::Scalar;
use crate::tensor::FeatureMap;

use super::histogram::{wasserstein_1d, Histogram, SoftCdf};
use super::masks::RegionMasks;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossWeights {
    /// Consistency weight; the L1 term gets `1 - lambda`.
    pub lambda: f64,
    /// Weight of the auxiliary L1 loss on the modality-conversion image.
    pub mc_aux: f64,
    pub bins: usize,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self { lambda: 0.03, mc_aux: 0.0, bins: super::histogram::DEFAULT_BINS }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(Error::Config(format!("lambda must lie in [0,1], got {}", self.lambda)));
        }
        if !(self.mc_aux >= 0.0 && self.mc_aux.is_finite()) {
            return Err(Error::Config(format!("mc_aux must be >= 0, got {}", self.mc_aux)));
        }
        if self.bins == 0 {
            return Err(Error::Config("bins must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LossBreakdown {
    pub total: f64,
    pub rec: f64,
    pub region: f64,
    pub boundary: f64,
    /// Set when the masks held no region, so the region term is zero.
    pub no_regions: bool,
}

fn check_pair<T: Scalar>(a: &FeatureMap<T>, b: &FeatureMap<T>) -> Result<()> {
    if !a.same_shape(b) {
        return invalid(format!("image shapes differ: {:?} vs {:?}", a.shape(), b.shape()));
    }
    Ok(())
}

fn check_masks<T: Scalar>(img: &FeatureMap<T>, masks: &RegionMasks) -> Result<()> {
    if (masks.height(), masks.width()) != (img.height(), img.width()) {
        return invalid(format!(
            "masks {}x{} do not cover image {}x{}",
            masks.height(),
            masks.width(),
            img.height(),
            img.width()
        ));
    }
    Ok(())
}

/// `mean |a - b|` over all pixels and channels.
pub fn l1_loss<T: Scalar>(a: &FeatureMap<T>, b: &FeatureMap<T>) -> Result<f64> {
    check_pair(a, b)?;
    let s: f64 = a.data().iter().zip(b.data()).map(|(x, y)| (x.as_f64() - y.as_f64()).abs()).sum();
    Ok(s / a.data().len() as f64)
}

fn luminance_f64<T: Scalar>(img: &FeatureMap<T>) -> Vec<f64> {
    let c = img.channels() as f64;
    img.data().chunks_exact(img.channels()).map(|px| px.iter().map(|v| v.as_f64()).sum::<f64>() / c).collect()
}

/// Hard-binned histogram of the luminance of `image` under `mask`.
pub fn region_histogram<T: Scalar>(image: &FeatureMap<T>, mask: &[bool], bins: usize) -> Result<Histogram> {
    if mask.len() != image.height() * image.width() {
        return invalid("mask size does not match image");
    }
    let lum = luminance_f64(image);
    Histogram::from_values(lum.iter().zip(mask).filter(|(_, &m)| m).map(|(&v, _)| v), bins)
}

/// Mean over regions of the Wasserstein distance between SR and HR
/// luminance histograms. Returns `(0, true)` when there are no regions.
pub fn region_loss<T: Scalar>(sr: &FeatureMap<T>, hr: &FeatureMap<T>, masks: &RegionMasks, bins: usize) -> Result<(f64, bool)> {
    check_pair(sr, hr)?;
    check_masks(sr, masks)?;
    let (ls, lh) = (luminance_f64(sr), luminance_f64(hr));
    let mut total = 0.0;
    let mut k = 0usize;
    for px in masks.region_pixels() {
        if px.is_empty() {
            continue;
        }
        let hs = Histogram::from_values(px.iter().map(|&i| ls[i]), bins)?;
        let hh = Histogram::from_values(px.iter().map(|&i| lh[i]), bins)?;
        total += wasserstein_1d(&hs, &hh)?;
        k += 1;
    }
    if k == 0 {
        return Ok((0.0, true));
    }
    Ok((total / k as f64, false))
}

/// Forward differences `(I[y][x+1] - I[y][x], I[y+1][x] - I[y][x])`, zero on
/// the last column / row.
#[inline]
pub(crate) fn forward_diff<T: Scalar>(img: &FeatureMap<T>, y: usize, x: usize, c: usize) -> (f64, f64) {
    let v = img.get(y, x, c).as_f64();
    let gx = if x + 1 < img.width() { img.get(y, x + 1, c).as_f64() - v } else { 0.0 };
    let gy = if y + 1 < img.height() { img.get(y + 1, x, c).as_f64() - v } else { 0.0 };
    (gx, gy)
}

/// `|| (grad SR - grad HR) * M_b ||_1 / |M_b|`, summed over both gradient
/// components and all channels.
pub fn boundary_loss<T: Scalar>(sr: &FeatureMap<T>, hr: &FeatureMap<T>, masks: &RegionMasks) -> Result<f64> {
    Ok(boundary_terms(sr, hr, masks, None)?)
}

fn boundary_terms<T: Scalar>(
    sr: &FeatureMap<T>,
    hr: &FeatureMap<T>,
    masks: &RegionMasks,
    mut grad: Option<&mut [f64]>,
) -> Result<f64> {
    check_pair(sr, hr)?;
    check_masks(sr, masks)?;
    let nb = masks.boundary_count();
    if nb == 0 {
        return Ok(0.0);
    }
    let (h, w, c) = sr.shape();
    let inv = 1.0 / nb as f64;
    let mut s = 0.0;
    for (p, _) in masks.boundary().iter().enumerate().filter(|(_, &b)| b) {
        let (y, x) = (p / w, p % w);
        for ch in 0..c {
            let (sx, sy) = forward_diff(sr, y, x, ch);
            let (hx, hy) = forward_diff(hr, y, x, ch);
            let (dx, dy) = (sx - hx, sy - hy);
            s += dx.abs() + dy.abs();
            if let Some(g) = grad.as_deref_mut() {
                let i = (p * c) + ch;
                if x + 1 < w {
                    let sg = dx.signum() * (dx != 0.0) as u8 as f64 * inv;
                    g[i + c] += sg;
                    g[i] -= sg;
                }
                if y + 1 < h {
                    let sg = dy.signum() * (dy != 0.0) as u8 as f64 * inv;
                    g[i + w * c] += sg;
                    g[i] -= sg;
                }
            }
        }
    }
    Ok(s * inv)
}

/// Evaluation-path loss with hard histograms.
pub fn total_loss<T: Scalar>(
    sr: &FeatureMap<T>,
    hr: &FeatureMap<T>,
    masks: &RegionMasks,
    weights: &LossWeights,
) -> Result<LossBreakdown> {
    weights.validate()?;
    let rec = l1_loss(sr, hr)?;
    let lam = weights.lambda;
    if lam == 0.0 {
        check_masks(sr, masks)?;
        return Ok(LossBreakdown { total: rec, rec, ..Default::default() });
    }
    let (region, no_regions) = region_loss(sr, hr, masks, weights.bins)?;
    let boundary = boundary_loss(sr, hr, masks)?;
    Ok(LossBreakdown { total: (1.0 - lam) * rec + lam * (region + boundary), rec, region, boundary, no_regions })
}

/// `mean |sr - hr|` and its subgradient (zero where the images agree).
pub fn l1_with_grad<T: Scalar>(sr: &FeatureMap<T>, hr: &FeatureMap<T>) -> Result<(f64, Vec<f64>)> {
    check_pair(sr, hr)?;
    let n = sr.data().len() as f64;
    let mut g = vec![0.0; sr.data().len()];
    let mut s = 0.0;
    for ((gi, a), b) in g.iter_mut().zip(sr.data()).zip(hr.data()) {
        let d = a.as_f64() - b.as_f64();
        s += d.abs();
        *gi = if d > 0.0 { 1.0 / n } else if d < 0.0 { -1.0 / n } else { 0.0 };
    }
    Ok((s / n, g))
}

/// Region term with soft CDFs for both images, and its gradient with
/// respect to the SR luminance.
fn soft_region_terms(ls: &[f64], lh: &[f64], masks: &RegionMasks, bins: usize, dlum: &mut [f64]) -> (f64, bool) {
    let soft = SoftCdf::new(bins);
    let regions: Vec<Vec<usize>> = masks.region_pixels().into_iter().filter(|p| !p.is_empty()).collect();
    if regions.is_empty() {
        return (0.0, true);
    }
    let inv_k = 1.0 / regions.len() as f64;
    let mut total = 0.0;
    let mut vs = Vec::new();
    let mut vh = Vec::new();
    let mut gv = Vec::new();
    for px in &regions {
        vs.clear();
        vh.clear();
        vs.extend(px.iter().map(|&i| ls[i]));
        vh.extend(px.iter().map(|&i| lh[i]));
        let fs = soft.cdf(&vs);
        let fh = soft.cdf(&vh);
        let mut dcdf = vec![0.0; bins];
        for b in 0..bins {
            let d = fs[b] - fh[b];
            total += d.abs() * inv_k;
            dcdf[b] = if d > 0.0 { inv_k } else if d < 0.0 { -inv_k } else { 0.0 };
        }
        gv.clear();
        gv.resize(vs.len(), 0.0);
        soft.backward(&vs, &dcdf, &mut gv);
        for (&i, &g) in px.iter().zip(&gv) {
            dlum[i] += g;
        }
    }
    (total, false)
}

/// Training-path loss: soft region histograms so the region term has a
/// gradient. Returns the breakdown and `d total / d sr`.
pub fn total_loss_with_grad<T: Scalar>(
    sr: &FeatureMap<T>,
    hr: &FeatureMap<T>,
    masks: &RegionMasks,
    weights: &LossWeights,
) -> Result<(LossBreakdown, Vec<f64>)> {
    weights.validate()?;
    check_masks(sr, masks)?;
    let lam = weights.lambda;
    let (rec, mut grad) = l1_with_grad(sr, hr)?;
    grad.iter_mut().for_each(|g| *g *= 1.0 - lam);
    if lam == 0.0 {
        return Ok((LossBreakdown { total: rec, rec, ..Default::default() }, grad));
    }
    let (h, w, c) = sr.shape();
    let mut tcl_grad = vec![0.0; h * w * c];
    let boundary = boundary_terms(sr, hr, masks, Some(&mut tcl_grad))?;
    let mut dlum = vec![0.0; h * w];
    let (region, no_regions) =
        soft_region_terms(&luminance_f64(sr), &luminance_f64(hr), masks, weights.bins, &mut dlum);
    let inv_c = 1.0 / c as f64;
    for (p, &dl) in dlum.iter().enumerate() {
        for ch in 0..c {
            tcl_grad[p * c + ch] += dl * inv_c;
        }
    }
    for (g, t) in grad.iter_mut().zip(&tcl_grad) {
        *g += lam * t;
    }
    let total = (1.0 - lam) * rec + lam * (region + boundary);
    Ok((LossBreakdown { total, rec, region, boundary, no_regions }, grad))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn step_edge_boundary_example() {
        let hr = FeatureMap::<f64>::from_fn(6, 6, 1, |_, x, _| if x >= 3 { 0.8 } else { 0.0 });
        let sr = FeatureMap::<f64>::zeros(6, 6, 1);
        let boundary: Vec<bool> = (0..36).map(|p| p % 6 == 2).collect();
        let masks = RegionMasks::new(6, 6, vec![1; 36], boundary, "t").unwrap();
        assert!((boundary_loss(&sr, &hr, &masks).unwrap() - 0.8).abs() < 1e-12);
    }

    #[test]
    fn lambda_zero_is_plain_mae() {
        let a = FeatureMap::<f64>::from_fn(8, 8, 3, |y, x, c| ((y * 8 + x + c) as f64 * 0.37).sin().abs());
        let b = a.map(|v| v * 0.5);
        let masks = RegionMasks::new(8, 8, vec![1; 64], vec![true; 64], "t").unwrap();
        let w = LossWeights { lambda: 0.0, ..Default::default() };
        let l = total_loss(&a, &b, &masks, &w).unwrap();
        assert_eq!(l.total, l1_loss(&a, &b).unwrap());
    }
}
