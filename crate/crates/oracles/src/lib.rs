//! Deliberately naive reference computations for tests.
//!
//! Nothing here shares code with the implementation crates; images are plain
//! row-major, channel-interleaved `f64` slices.

/// Plain `H x W x C` image.
#[derive(Clone, Debug, PartialEq)]
pub struct Img {
    pub h: usize,
    pub w: usize,
    pub c: usize,
    pub data: Vec<f64>,
}

impl Img {
    pub fn at(&self, y: usize, x: usize, c: usize) -> f64 {
        self.data[(y * self.w + x) * self.c + c]
    }
}

/// 1-D Wasserstein distance in bin units, recomputing each CDF value from
/// scratch at every threshold.
pub fn wasserstein_cdf(a: &[f64], b: &[f64]) -> f64 {
    let mut total = 0.0;
    for k in 0..a.len() {
        let mut ca = 0.0;
        let mut cb = 0.0;
        for i in 0..=k {
            ca += a[i];
            cb += b[i];
        }
        total += (ca - cb).abs();
    }
    total
}

/// 1-D Wasserstein distance as the cost of left-to-right greedy transport.
pub fn wasserstein_transport(a: &[f64], b: &[f64]) -> f64 {
    let mut carry = 0.0;
    let mut cost = 0.0;
    for (x, y) in a.iter().zip(b) {
        carry += x - y;
        cost += carry.abs();
    }
    cost
}

/// Gaussian-window SSIM (11 taps, sigma 1.5, valid windows) evaluated with
/// direct two-dimensional weighted sums, averaged over channels.
pub fn ssim(a: &Img, b: &Img, peak: f64) -> f64 {
    let (n, sigma) = (11usize, 1.5f64);
    let g: Vec<f64> = (0..n).map(|i| (-((i as f64 - 5.0).powi(2)) / (2.0 * sigma * sigma)).exp()).collect();
    let gs: f64 = g.iter().sum();
    let (c1, c2) = ((0.01 * peak).powi(2), (0.03 * peak).powi(2));
    let mut per_channel = 0.0;
    for c in 0..a.c {
        let mut acc = 0.0;
        let mut count = 0;
        for y0 in 0..=a.h - n {
            for x0 in 0..=a.w - n {
                let (mut mx, mut my, mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
                for i in 0..n {
                    for j in 0..n {
                        let wt = g[i] * g[j] / (gs * gs);
                        let (p, q) = (a.at(y0 + i, x0 + j, c), b.at(y0 + i, x0 + j, c));
                        mx += wt * p;
                        my += wt * q;
                        sxx += wt * p * p;
                        syy += wt * q * q;
                        sxy += wt * p * q;
                    }
                }
                let (vx, vy, cov) = (sxx - mx * mx, syy - my * my, sxy - mx * my);
                acc += (2.0 * mx * my + c1) * (2.0 * cov + c2) / ((mx * mx + my * my + c1) * (vx + vy + c2));
                count += 1;
            }
        }
        per_channel += acc / count as f64;
    }
    per_channel / a.c as f64
}

/// `10 log10(peak^2 / mse)` over every sample.
pub fn psnr(a: &Img, b: &Img, peak: f64) -> f64 {
    let mse = a.data.iter().zip(&b.data).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.data.len() as f64;
    10.0 * (peak * peak / mse).log10()
}

/// Keys cubic kernel with `a = -0.5`, in expanded polynomial form.
pub fn keys(t: f64) -> f64 {
    let t = t.abs();
    if t < 1.0 {
        1.5 * t * t * t - 2.5 * t * t + 1.0
    } else if t < 2.0 {
        -0.5 * t * t * t + 2.5 * t * t - 4.0 * t + 2.0
    } else {
        0.0
    }
}

/// Bicubic resize evaluated per output pixel over every source position,
/// with half-pixel centres, the kernel widened by the shrink factor and
/// replicated borders.
pub fn resize(img: &Img, oh: usize, ow: usize) -> Img {
    let (h, w) = (img.h as i64, img.w as i64);
    let (ry, rx) = (img.h as f64 / oh as f64, img.w as f64 / ow as f64);
    let (sy, sx) = (ry.max(1.0), rx.max(1.0));
    let mut data = Vec::with_capacity(oh * ow * img.c);
    for oy in 0..oh {
        for ox in 0..ow {
            let cy = (oy as f64 + 0.5) * ry - 0.5;
            let cx = (ox as f64 + 0.5) * rx - 0.5;
            for ch in 0..img.c {
                let (mut acc, mut norm) = (0.0, 0.0);
                for j in -4 * h..5 * h {
                    let wy = keys((j as f64 - cy) / sy);
                    if wy == 0.0 {
                        continue;
                    }
                    for i in -4 * w..5 * w {
                        let wx = keys((i as f64 - cx) / sx);
                        if wx == 0.0 {
                            continue;
                        }
                        acc += wy * wx * img.at(j.clamp(0, h - 1) as usize, i.clamp(0, w - 1) as usize, ch);
                        norm += wy * wx;
                    }
                }
                data.push(acc / norm);
            }
        }
    }
    Img { h: oh, w: ow, c: img.c, data }
}

/// 4-connected components of equal `class` values by depth-first flood fill.
pub fn components(class: &[usize], h: usize, w: usize) -> Vec<usize> {
    let mut comp = vec![usize::MAX; h * w];
    let mut next = 0;
    for start in 0..h * w {
        if comp[start] != usize::MAX {
            continue;
        }
        let mut stack = vec![start];
        comp[start] = next;
        while let Some(p) = stack.pop() {
            let (y, x) = (p / w, p % w);
            let mut nb = Vec::with_capacity(4);
            if y > 0 {
                nb.push(p - w);
            }
            if y + 1 < h {
                nb.push(p + w);
            }
            if x > 0 {
                nb.push(p - 1);
            }
            if x + 1 < w {
                nb.push(p + 1);
            }
            for q in nb {
                if comp[q] == usize::MAX && class[q] == class[p] {
                    comp[q] = next;
                    stack.push(q);
                }
            }
        }
        next += 1;
    }
    comp
}

/// Whether two labellings describe the same partition up to renaming.
pub fn same_partition<A: Copy + Eq + std::hash::Hash, B: Copy + Eq + std::hash::Hash>(a: &[A], b: &[B]) -> bool {
    use std::collections::HashMap;
    let mut fwd = HashMap::new();
    let mut back = HashMap::new();
    a.len() == b.len() && a.iter().zip(b).all(|(&x, &y)| *fwd.entry(x).or_insert(y) == y && *back.entry(y).or_insert(x) == x)
}

/// Five-point Laplacian at an interior point.
pub fn laplacian(img: &Img, y: usize, x: usize, c: usize) -> f64 {
    img.at(y - 1, x, c) + img.at(y + 1, x, c) + img.at(y, x - 1, c) + img.at(y, x + 1, c) - 4.0 * img.at(y, x, c)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn transport_and_cdf_agree_on_deltas() {
        let a = [0.0, 0.0, 1.0, 0.0, 0.0, 0.0];
        let b = [0.0, 0.0, 0.0, 0.0, 0.0, 1.0];
        assert_eq!(wasserstein_cdf(&a, &b), 3.0);
        assert_eq!(wasserstein_transport(&a, &b), 3.0);
    }

    #[test]
    fn keys_partitions_unity() {
        for k in 0..10 {
            let t = k as f64 / 10.0;
            let s: f64 = (-2..=2).map(|i| keys(i as f64 + t)).sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
    }
}
