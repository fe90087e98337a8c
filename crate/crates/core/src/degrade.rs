//! Bicubic and blur-downscale degradation, plus registered patch cropping.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Error, Result};
use crate::loss::RegionMasks;
use crate::scalar::Scalar;
use crate::synth::ScenePair;
use crate::tensor::FeatureMap;

/// Cubic convolution parameter.
pub const CUBIC_A: f64 = -0.5;

/// Keys cubic convolution kernel, support `(-2, 2)`.
pub fn cubic_weight(x: f64) -> f64 {
    let a = CUBIC_A;
    let x = x.abs();
    if x <= 1.0 {
        ((a + 2.0) * x - (a + 3.0)) * x * x + 1.0
    } else if x < 2.0 {
        ((a * x - 5.0 * a) * x + 8.0 * a) * x - 4.0 * a
    } else {
        0.0
    }
}

/// Source taps and normalised weights for one output coordinate.
struct Taps {
    first: isize,
    weights: Vec<f64>,
}

/// Half-pixel-centred sampling positions; the kernel is stretched by the
/// scale factor when shrinking so it also acts as the antialias prefilter.
fn axis_taps(n_in: usize, n_out: usize) -> Vec<Taps> {
    let ratio = n_in as f64 / n_out as f64;
    let stretch = ratio.max(1.0);
    let support = 2.0 * stretch;
    (0..n_out)
        .map(|i| {
            let center = (i as f64 + 0.5) * ratio - 0.5;
            let first = (center - support).floor() as isize + 1;
            let last = (center + support).ceil() as isize - 1;
            let mut weights: Vec<f64> =
                (first..=last).map(|j| cubic_weight((j as f64 - center) / stretch)).collect();
            let s: f64 = weights.iter().sum();
            weights.iter_mut().for_each(|w| *w /= s);
            Taps { first, weights }
        })
        .collect()
}

#[inline]
fn clamp_index(j: isize, n: usize) -> usize {
    j.clamp(0, n as isize - 1) as usize
}

/// Separable resampling of an `H x W x C` map (computed in `f64`).
fn resample<T: Scalar>(img: &FeatureMap<T>, out_h: usize, out_w: usize, ty: &[Taps], tx: &[Taps]) -> FeatureMap<T> {
    let (h, w, c) = img.shape();
    let src = img.data();
    let mut mid = vec![0.0f64; h * out_w * c];
    for y in 0..h {
        for (ox, tap) in tx.iter().enumerate() {
            let dst = &mut mid[(y * out_w + ox) * c..(y * out_w + ox + 1) * c];
            for (k, &wt) in tap.weights.iter().enumerate() {
                let sx = clamp_index(tap.first + k as isize, w);
                let s = &src[(y * w + sx) * c..(y * w + sx + 1) * c];
                for (d, v) in dst.iter_mut().zip(s) {
                    *d += wt * v.as_f64();
                }
            }
        }
    }
    let mut out = vec![0.0f64; out_h * out_w * c];
    for (oy, tap) in ty.iter().enumerate() {
        for (k, &wt) in tap.weights.iter().enumerate() {
            let sy = clamp_index(tap.first + k as isize, h);
            let row = &mid[sy * out_w * c..(sy + 1) * out_w * c];
            for (d, v) in out[oy * out_w * c..(oy + 1) * out_w * c].iter_mut().zip(row) {
                *d += wt * v;
            }
        }
    }
    FeatureMap::new(out_h, out_w, c, out.into_iter().map(T::lit).collect()).expect("dims checked by caller")
}

/// Resizes with cubic convolution (`a = -0.5`), edge replication and an
/// antialiasing kernel stretch when downscaling.
pub fn bicubic_resize<T: Scalar>(img: &FeatureMap<T>, out_h: usize, out_w: usize) -> Result<FeatureMap<T>> {
    if out_h == 0 || out_w == 0 {
        return invalid(format!("resize target must be >= 1x1, got {out_h}x{out_w}"));
    }
    let ty = axis_taps(img.height(), out_h);
    let tx = axis_taps(img.width(), out_w);
    Ok(resample(img, out_h, out_w, &ty, &tx))
}

/// Normalised 1-D Gaussian of odd length `size`.
pub fn gaussian_kernel(sigma: f64, size: usize) -> Vec<f64> {
    let r = (size / 2) as f64;
    let mut k: Vec<f64> = (0..size).map(|i| (-(i as f64 - r).powi(2) / (2.0 * sigma * sigma)).exp()).collect();
    let s: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= s);
    k
}

/// Separable Gaussian blur with replicate borders.
pub fn gaussian_blur<T: Scalar>(img: &FeatureMap<T>, sigma: f64, size: usize) -> FeatureMap<T> {
    let (h, w, _) = img.shape();
    let k = gaussian_kernel(sigma, size);
    let r = (size / 2) as isize;
    let taps = |n: usize| -> Vec<Taps> {
        (0..n).map(|i| Taps { first: i as isize - r, weights: k.clone() }).collect()
    };
    resample(img, h, w, &taps(h), &taps(w))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum DegradationKind {
    /// Bicubic downscale.
    Bi,
    /// Gaussian blur, then bicubic downscale.
    Bd,
}

impl DegradationKind {
    pub fn as_str(self) -> &'static str {
        match self {
            DegradationKind::Bi => "bi",
            DegradationKind::Bd => "bd",
        }
    }
}

impl std::str::FromStr for DegradationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bi" => Ok(DegradationKind::Bi),
            "bd" => Ok(DegradationKind::Bd),
            _ => Err(Error::Config(format!("unknown degradation kind '{s}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DegradationSpec {
    pub kind: DegradationKind,
    pub scale: usize,
    pub blur_sigma: f64,
    pub kernel_size: usize,
}

impl DegradationSpec {
    /// Standard parameters per scale: BD uses `sigma = 0.4 s` with a kernel
    /// of `5 s + 1` taps.
    pub fn new(kind: DegradationKind, scale: usize) -> Result<Self> {
        let (blur_sigma, kernel_size) = match scale {
            4 => (1.6, 13),
            8 => (3.2, 21),
            _ => return Err(Error::Config(format!("scale must be 4 or 8, got {scale}"))),
        };
        let spec = Self { kind, scale, blur_sigma, kernel_size };
        spec.validate()?;
        Ok(spec)
    }

    pub fn bi(scale: usize) -> Result<Self> {
        Self::new(DegradationKind::Bi, scale)
    }

    pub fn bd(scale: usize) -> Result<Self> {
        Self::new(DegradationKind::Bd, scale)
    }

    pub fn validate(&self) -> Result<()> {
        if self.scale == 0 {
            return Err(Error::Config("scale must be >= 1".into()));
        }
        if self.kind == DegradationKind::Bd {
            let min = (6.0 * self.blur_sigma + 1.0).ceil() as usize;
            let min = min | 1;
            if !(self.blur_sigma > 0.0) || self.kernel_size % 2 == 0 || self.kernel_size < min {
                return Err(Error::Config(format!(
                    "blur kernel {} too small or even for sigma {} (need odd >= {min})",
                    self.kernel_size, self.blur_sigma
                )));
            }
        }
        Ok(())
    }
}

/// Produces the `H/s x W/s` low-resolution image.
pub fn degrade<T: Scalar>(img: &FeatureMap<T>, spec: &DegradationSpec) -> Result<FeatureMap<T>> {
    spec.validate()?;
    let (h, w, _) = img.shape();
    let s = spec.scale;
    if h % s != 0 || w % s != 0 {
        return invalid(format!("image {h}x{w} not divisible by scale {s}"));
    }
    match spec.kind {
        DegradationKind::Bi => bicubic_resize(img, h / s, w / s),
        DegradationKind::Bd => bicubic_resize(&gaussian_blur(img, spec.blur_sigma, spec.kernel_size), h / s, w / s),
    }
}

/// Registered training crops.
#[derive(Clone, Debug)]
pub struct PatchSet<T> {
    pub lr: FeatureMap<T>,
    pub optical: FeatureMap<T>,
    pub hr: FeatureMap<T>,
    pub masks: RegionMasks,
    /// Top-left corner on the LR grid.
    pub lr_origin: (usize, usize),
}

/// Crops an `lr_size` LR patch at a seeded uniform position and the matching
/// `s * lr_size` optical, HR and mask patches.
pub fn crop_aligned_patches<T: Scalar>(pair: &ScenePair<T>, lr_size: usize, seed: u64) -> Result<PatchSet<T>> {
    let (lh, lw, _) = pair.thermal_lr.shape();
    let s = pair.scale;
    if lh < lr_size || lw < lr_size || lr_size == 0 {
        return invalid(format!("LR image {lh}x{lw} smaller than patch {lr_size}"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let y = rng.gen_range(0..=lh - lr_size);
    let x = rng.gen_range(0..=lw - lr_size);
    let hs = lr_size * s;
    Ok(PatchSet {
        lr: pair.thermal_lr.crop(y, x, lr_size, lr_size)?,
        optical: pair.optical.crop(y * s, x * s, hs, hs)?,
        hr: pair.thermal_hr.crop(y * s, x * s, hs, hs)?,
        masks: pair.masks.crop(y * s, x * s, hs, hs)?,
        lr_origin: (y, x),
    })
}
