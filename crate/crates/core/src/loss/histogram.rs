//! Normalised intensity histograms and their 1-D Wasserstein distance.

use crate::error::{invalid, Error, Result};

/// Bin count for temperature histograms on `[0, 1]`.
pub const DEFAULT_BINS: usize = 256;

#[derive(Clone, Debug, PartialEq)]
pub struct Histogram {
    /// Non-negative masses summing to one.
    pub bins: Vec<f64>,
}

/// Hard bin of a value on `[0, 1]`; `1.0` and above land in the last bin.
#[inline]
pub fn bin_index(v: f64, bins: usize) -> usize {
    let b = (v.clamp(0.0, 1.0) * bins as f64).floor() as usize;
    b.min(bins - 1)
}

impl Histogram {
    /// Histogram of `values`; errors on an empty set.
    pub fn from_values(values: impl IntoIterator<Item = f64>, bins: usize) -> Result<Self> {
        if bins == 0 {
            return invalid("histogram needs at least one bin");
        }
        let mut counts = vec![0.0; bins];
        let mut n = 0usize;
        for v in values {
            counts[bin_index(v, bins)] += 1.0;
            n += 1;
        }
        if n == 0 {
            return Err(Error::EmptyRegion("histogram over an empty mask".into()));
        }
        let inv = 1.0 / n as f64;
        counts.iter_mut().for_each(|c| *c *= inv);
        Ok(Self { bins: counts })
    }

    pub fn len(&self) -> usize {
        self.bins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bins.is_empty()
    }

    pub fn cdf(&self) -> Vec<f64> {
        let mut acc = 0.0;
        self.bins
            .iter()
            .map(|&b| {
                acc += b;
                acc
            })
            .collect()
    }
}

/// `sum_b |CDF_1(b) - CDF_2(b)|`, in bin units.
pub fn wasserstein_1d(h1: &Histogram, h2: &Histogram) -> Result<f64> {
    if h1.len() != h2.len() {
        return invalid(format!("histogram bin counts differ: {} vs {}", h1.len(), h2.len()));
    }
    Ok(h1.cdf().iter().zip(h2.cdf()).map(|(a, b)| (a - b).abs()).sum())
}

/// Soft CDF used on the training path: each value contributes a Gaussian
/// CDF step of width `0.5` bins centred on itself, evaluated at every upper
/// bin edge. The last entry is exactly one. Steps are cut off at
/// `±SOFT_CUTOFF` standard deviations.
pub(crate) struct SoftCdf {
    pub bins: usize,
    pub sigma: f64,
}

pub(crate) const SOFT_CUTOFF: f64 = 8.0;

impl SoftCdf {
    pub fn new(bins: usize) -> Self {
        Self { bins, sigma: 0.5 / bins as f64 }
    }

    /// Upper edge of bin `b`.
    #[inline]
    fn edge(&self, b: usize) -> f64 {
        (b + 1) as f64 / self.bins as f64
    }

    /// Bin range whose edges lie within the cutoff of `v`.
    fn active(&self, v: f64) -> std::ops::Range<usize> {
        let r = SOFT_CUTOFF * self.sigma;
        let b = self.bins as f64;
        let lo = (((v - r) * b).floor() - 1.0).max(0.0) as usize;
        let hi = (((v + r) * b).ceil() + 1.0).clamp(0.0, (self.bins - 1) as f64) as usize;
        lo.min(self.bins - 1)..hi
    }

    pub fn cdf(&self, values: &[f64]) -> Vec<f64> {
        let mut f = vec![0.0; self.bins];
        let mut below = vec![0.0; self.bins + 1];
        for &v in values {
            let r = self.active(v);
            for b in r.clone() {
                f[b] += normal_cdf((self.edge(b) - v) / self.sigma);
            }
            // fully-counted bins beyond the window
            below[r.end] += 1.0;
        }
        let inv = 1.0 / values.len() as f64;
        let mut run = 0.0;
        for b in 0..self.bins {
            run += below[b];
            f[b] = (f[b] + run) * inv;
        }
        f[self.bins - 1] = 1.0;
        f
    }

    /// Adds `d loss / d value_i` given `d loss / d F(b)` for every bin except
    /// the fixed last one.
    pub fn backward(&self, values: &[f64], dcdf: &[f64], out: &mut [f64]) {
        let inv = 1.0 / values.len() as f64;
        for (o, &v) in out.iter_mut().zip(values) {
            let mut g = 0.0;
            for b in self.active(v) {
                if b + 1 == self.bins {
                    continue;
                }
                let z = (self.edge(b) - v) / self.sigma;
                g -= dcdf[b] * normal_pdf(z) / self.sigma;
            }
            *o += g * inv;
        }
    }
}

#[inline]
fn normal_cdf(z: f64) -> f64 {
    0.5 * (1.0 + libm::erf(z / std::f64::consts::SQRT_2))
}

#[inline]
fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}
