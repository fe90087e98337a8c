//! Deterministic region and boundary masks from an HR thermal image.

use std::collections::VecDeque;

use crate::error::{invalid, Result};
use crate::scalar::Scalar;
use crate::tensor::FeatureMap;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MaskParams {
    /// Equal-width luminance bands on `[0, 1]`.
    pub bands: usize,
    /// Components smaller than this are merged into a neighbour.
    pub min_area: usize,
}

impl Default for MaskParams {
    fn default() -> Self {
        Self { bands: 8, min_area: 32 }
    }
}

/// Region labels (`0` = unassigned, `1..=K`) and a boundary mask on one grid.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RegionMasks {
    height: usize,
    width: usize,
    labels: Vec<u16>,
    regions: usize,
    boundary: Vec<bool>,
    pub source_id: String,
}

impl RegionMasks {
    pub fn new(
        height: usize,
        width: usize,
        labels: Vec<u16>,
        boundary: Vec<bool>,
        source_id: impl Into<String>,
    ) -> Result<Self> {
        let n = height * width;
        if labels.len() != n || boundary.len() != n {
            return invalid(format!("mask buffers must hold {n} pixels"));
        }
        let regions = labels.iter().copied().max().unwrap_or(0) as usize;
        let mut seen = vec![false; regions + 1];
        labels.iter().for_each(|&l| seen[l as usize] = true);
        if seen.iter().skip(1).any(|s| !s) {
            return invalid("region labels must be contiguous from 1");
        }
        Ok(Self { height, width, labels, regions, boundary, source_id: source_id.into() })
    }

    /// No regions and no boundary; every loss term over it is zero.
    pub fn empty(height: usize, width: usize) -> Self {
        let n = height * width;
        Self { height, width, labels: vec![0; n], regions: 0, boundary: vec![false; n], source_id: "empty".into() }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn region_count(&self) -> usize {
        self.regions
    }

    pub fn labels(&self) -> &[u16] {
        &self.labels
    }

    pub fn boundary(&self) -> &[bool] {
        &self.boundary
    }

    pub fn boundary_count(&self) -> usize {
        self.boundary.iter().filter(|&&b| b).count()
    }

    /// Binary mask of region `k` (1-based).
    pub fn region_mask(&self, k: usize) -> Vec<bool> {
        self.labels.iter().map(|&l| l as usize == k).collect()
    }

    /// Flat pixel indices of every region, in label order.
    pub fn region_pixels(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.regions];
        for (i, &l) in self.labels.iter().enumerate() {
            if l > 0 {
                out[l as usize - 1].push(i);
            }
        }
        out
    }

    /// Sub-window; regions absent from the window are dropped and the rest
    /// relabelled in order of first appearance.
    pub fn crop(&self, y0: usize, x0: usize, h: usize, w: usize) -> Result<Self> {
        if h == 0 || w == 0 || y0 + h > self.height || x0 + w > self.width {
            return invalid(format!("mask crop {h}x{w} at ({y0},{x0}) outside {}x{}", self.height, self.width));
        }
        let mut remap = vec![0u16; self.regions + 1];
        let mut next = 0u16;
        let mut labels = Vec::with_capacity(h * w);
        let mut boundary = Vec::with_capacity(h * w);
        for y in y0..y0 + h {
            for x in x0..x0 + w {
                let i = y * self.width + x;
                let l = self.labels[i] as usize;
                if l > 0 && remap[l] == 0 {
                    next += 1;
                    remap[l] = next;
                }
                labels.push(remap[l]);
                boundary.push(self.boundary[i]);
            }
        }
        Ok(Self { height: h, width: w, labels, regions: next as usize, boundary, source_id: self.source_id.clone() })
    }
}

/// 4-connected components of equal `class`, labelled `0..n` in raster order
/// of their first pixel. Returns labels and per-component areas.
pub(crate) fn connected_components(class: &[u32], h: usize, w: usize) -> (Vec<usize>, Vec<usize>) {
    const NONE: usize = usize::MAX;
    let mut comp = vec![NONE; h * w];
    let mut areas = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..h * w {
        if comp[start] != NONE {
            continue;
        }
        let id = areas.len();
        let mut area = 0;
        comp[start] = id;
        queue.push_back(start);
        while let Some(p) = queue.pop_front() {
            area += 1;
            for q in neighbours4(p, h, w) {
                if comp[q] == NONE && class[q] == class[p] {
                    comp[q] = id;
                    queue.push_back(q);
                }
            }
        }
        areas.push(area);
    }
    (comp, areas)
}

fn neighbours4(p: usize, h: usize, w: usize) -> impl Iterator<Item = usize> {
    let (y, x) = (p / w, p % w);
    [
        (y > 0).then(|| p - w),
        (x > 0).then(|| p - 1),
        (x + 1 < w).then(|| p + 1),
        (y + 1 < h).then(|| p + w),
    ]
    .into_iter()
    .flatten()
}

/// Quantises luminance into bands, keeps connected components of at least
/// `min_area` pixels (or the largest one if none qualify), grows survivors
/// over the discarded pixels by breadth-first search, and marks pixels whose
/// 4-neighbourhood spans two labels, dilated by one pixel.
pub fn extract_region_masks<T: Scalar>(img: &FeatureMap<T>, params: MaskParams) -> Result<RegionMasks> {
    if params.bands == 0 {
        return invalid("mask extraction needs at least one band");
    }
    let (h, w, _) = img.shape();
    let n = h * w;
    let bands = params.bands as f64;
    let class: Vec<u32> = (0..n)
        .map(|i| {
            let l = img.luminance_at(i / w, i % w).as_f64().clamp(0.0, 1.0);
            ((l * bands).floor() as u32).min(params.bands as u32 - 1)
        })
        .collect();
    let (comp, areas) = connected_components(&class, h, w);

    let mut keep: Vec<bool> = areas.iter().map(|&a| a >= params.min_area).collect();
    if !keep.iter().any(|&k| k) {
        let largest = (0..areas.len()).max_by(|&a, &b| areas[a].cmp(&areas[b]).then(b.cmp(&a))).expect("n >= 1");
        keep[largest] = true;
    }
    let mut new_id = vec![0u16; areas.len()];
    let mut next: usize = 0;
    for &c in &comp {
        if keep[c] && new_id[c] == 0 {
            next += 1;
            if next > u16::MAX as usize {
                return invalid("too many regions for 16-bit labels");
            }
            new_id[c] = next as u16;
        }
    }

    let mut labels = vec![0u16; n];
    let mut queue = VecDeque::new();
    for p in 0..n {
        if keep[comp[p]] {
            labels[p] = new_id[comp[p]];
            queue.push_back(p);
        }
    }
    while let Some(p) = queue.pop_front() {
        for q in neighbours4(p, h, w) {
            if labels[q] == 0 {
                labels[q] = labels[p];
                queue.push_back(q);
            }
        }
    }

    let seed: Vec<bool> = (0..n).map(|p| neighbours4(p, h, w).any(|q| labels[q] != labels[p])).collect();
    let mut boundary = vec![false; n];
    for p in (0..n).filter(|&p| seed[p]) {
        let (y, x) = (p / w, p % w);
        for yy in y.saturating_sub(1)..(y + 2).min(h) {
            for xx in x.saturating_sub(1)..(x + 2).min(w) {
                boundary[yy * w + xx] = true;
            }
        }
    }
    RegionMasks::new(h, w, labels, boundary, format!("bands{}-min{}", params.bands, params.min_area))
}
