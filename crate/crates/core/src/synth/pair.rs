//! Registered optical / thermal scene pairs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::degrade::{degrade, DegradationSpec};
use crate::error::{invalid, Result};
use crate::loss::{extract_region_masks, MaskParams, RegionMasks};
use crate::scalar::Scalar;
use crate::tensor::FeatureMap;

use super::heat::{heat_step, HeatField};
use super::material::{generate_material_map, MaterialMap, MaterialParams, Rect};

#[derive(Clone, Debug, PartialEq)]
pub struct PairConfig {
    pub size: usize,
    pub steps: usize,
    pub dt: f64,
    pub degradation: DegradationSpec,
    pub material: MaterialParams,
    /// Peak-to-peak amplitude of the iid optical texture noise.
    pub noise: f64,
    pub masks: MaskParams,
}

impl Default for PairConfig {
    fn default() -> Self {
        Self {
            size: 256,
            steps: 10,
            dt: 1.0,
            degradation: DegradationSpec::bi(4).expect("scale 4 is valid"),
            material: MaterialParams::default(),
            noise: 0.08,
            masks: MaskParams::default(),
        }
    }
}

impl PairConfig {
    pub fn scale(&self) -> usize {
        self.degradation.scale
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PairMeta {
    pub seed: u64,
    pub size: usize,
    pub steps: usize,
    pub dt: f64,
    pub noise: f64,
    /// Bounds of the striped panel, if the scene has one.
    pub panel: Option<Rect>,
    pub stripe_period: usize,
}

#[derive(Clone, Debug)]
pub struct ScenePair<T> {
    pub optical: FeatureMap<T>,
    pub thermal_hr: FeatureMap<T>,
    pub thermal_lr: FeatureMap<T>,
    pub masks: RegionMasks,
    pub scale: usize,
    pub degradation: DegradationSpec,
    pub meta: PairMeta,
}

impl<T: Scalar> ScenePair<T> {
    /// Assembles a pair from loaded images, checking registration shapes.
    pub fn from_parts(
        optical: FeatureMap<T>,
        thermal_hr: FeatureMap<T>,
        thermal_lr: FeatureMap<T>,
        masks: RegionMasks,
        degradation: DegradationSpec,
        meta: PairMeta,
    ) -> Result<Self> {
        let s = degradation.scale;
        let (h, w, _) = thermal_lr.shape();
        if optical.shape() != (h * s, w * s, 3) || thermal_hr.shape() != (h * s, w * s, 3) || thermal_lr.channels() != 3 {
            return invalid(format!(
                "pair shapes not registered at x{s}: optical {:?}, hr {:?}, lr {:?}",
                optical.shape(),
                thermal_hr.shape(),
                thermal_lr.shape()
            ));
        }
        if (masks.height(), masks.width()) != (h * s, w * s) {
            return invalid("mask grid does not match the HR image");
        }
        Ok(Self { optical, thermal_hr, thermal_lr, masks, scale: s, degradation, meta })
    }

    pub fn cast<U: Scalar>(&self) -> ScenePair<U> {
        ScenePair {
            optical: self.optical.cast(),
            thermal_hr: self.thermal_hr.cast(),
            thermal_lr: self.thermal_lr.cast(),
            masks: self.masks.clone(),
            scale: self.scale,
            degradation: self.degradation,
            meta: self.meta.clone(),
        }
    }
}

/// Runs `steps` heat steps from `u0 = emissivity`.
pub fn simulate_field(mat: &MaterialMap, steps: usize, dt: f64) -> Result<HeatField> {
    let u0 = mat.cells().iter().map(|c| c.emissivity).collect();
    let mut f = HeatField::new(mat.height(), mat.width(), u0);
    for _ in 0..steps {
        f = heat_step(&f, mat, dt)?;
    }
    Ok(f)
}

/// Material layout, albedo-plus-noise optical render, simulated thermal
/// field normalised to `[0, 1]`, its degradation and masks.
pub fn generate_pair<T: Scalar>(seed: u64, cfg: &PairConfig) -> Result<ScenePair<T>> {
    let size = cfg.size;
    if size % cfg.scale() != 0 {
        return invalid(format!("scene size {size} not divisible by scale {}", cfg.scale()));
    }
    let mat = generate_material_map(seed, size, &cfg.material)?;
    let mut noise_rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6f70_7469_6361_6c00);
    let noise = cfg.noise;
    let optical = FeatureMap::from_fn(size, size, 3, |y, x, c| {
        let n = if noise > 0.0 { noise_rng.gen_range(-0.5..0.5) * noise } else { 0.0 };
        T::lit((mat.cell(y, x).albedo[c] + n).clamp(0.0, 1.0))
    });

    let field = simulate_field(&mat, cfg.steps, cfg.dt)?;
    let (lo, hi) = field.min_max();
    let span = hi - lo;
    let norm: Vec<T> = field.u.iter().map(|&v| T::lit(if span > 0.0 { (v - lo) / span } else { 0.5 })).collect();
    let thermal_hr = FeatureMap::new(size, size, 1, norm)?.replicate_channels(3)?;
    let thermal_lr = degrade(&thermal_hr, &cfg.degradation)?;
    let masks = extract_region_masks(&thermal_hr, cfg.masks)?;
    let panel = mat.panel();
    let meta = PairMeta {
        seed,
        size,
        steps: cfg.steps,
        dt: cfg.dt,
        noise,
        panel: panel.map(|p| p.bounds),
        stripe_period: panel.map_or(0, |p| p.stripe_period),
    };
    Ok(ScenePair { optical, thermal_hr, thermal_lr, masks, scale: cfg.scale(), degradation: cfg.degradation, meta })
}

/// Mean absolute deviation of each row mean from the average of its two
/// neighbouring row means, over the interior of `rect` (shrunk by `margin`).
/// Horizontal stripes score high; smooth or linearly varying rows score zero.
pub fn stripe_amplitude<T: Scalar>(img: &FeatureMap<T>, rect: Rect, margin: usize) -> Result<f64> {
    let (y0, x0, h, w) = rect;
    if h <= 2 * margin + 2 || w <= 2 * margin || y0 + h > img.height() || x0 + w > img.width() {
        return invalid(format!("stripe rect {rect:?} too small or outside image"));
    }
    let rows: Vec<f64> = (y0 + margin..y0 + h - margin)
        .map(|y| {
            let s: f64 = (x0 + margin..x0 + w - margin).map(|x| img.luminance_at(y, x).as_f64()).sum();
            s / (w - 2 * margin) as f64
        })
        .collect();
    let dev: f64 = rows.windows(3).map(|r| (r[1] - 0.5 * (r[0] + r[2])).abs()).sum();
    Ok(dev / (rows.len() - 2) as f64)
}
