//! Full-image evaluation against HR targets, with a bicubic baseline.

use std::fmt::Write as _;
use std::path::Path;

use thermsr_core::degrade::bicubic_resize;
use thermsr_core::metrics::{evaluate_pair, MetricReport};
use thermsr_core::{FeatureMap, Network, Scalar};

use crate::error::{Error, Result};
use crate::io;
use crate::manifest::Dataset;

#[derive(Clone, Debug)]
pub struct PairEval {
    pub pair_id: String,
    pub model: MetricReport,
    pub bicubic: MetricReport,
}

/// Model and bicubic metrics for every pair the model can process. Pairs of
/// another scale are skipped with a warning on stderr.
pub fn evaluate<T: Scalar>(net: &Network<T>, data: &Dataset<T>, keep_maps: bool) -> Result<Vec<PairEval>> {
    let scale = net.config().scale;
    let mode = net.config().branch_mode;
    let mut rows = Vec::new();
    for (id, p) in data.ids.iter().zip(&data.pairs) {
        if p.scale != scale || p.thermal_lr.shape().0 * scale != p.thermal_hr.shape().0 {
            eprintln!("warning: skipping {id}: x{} pair for a x{scale} model", p.scale);
            continue;
        }
        let pred = net.infer(&p.thermal_lr, mode.has_optical().then_some(&p.optical))?;
        let (h, w, _) = p.thermal_hr.shape();
        let bic = bicubic_resize(&p.thermal_lr, h, w)?.clamp(T::zero(), T::one());
        rows.push(PairEval {
            pair_id: id.clone(),
            model: evaluate_pair(&pred.sr, &p.thermal_hr, 1.0, keep_maps)?,
            bicubic: evaluate_pair(&bic, &p.thermal_hr, 1.0, false)?,
        });
    }
    Ok(rows)
}

pub fn mean_psnr(rows: &[PairEval]) -> (f64, f64) {
    let n = rows.len().max(1) as f64;
    (
        rows.iter().map(|r| r.model.psnr).sum::<f64>() / n,
        rows.iter().map(|r| r.bicubic.psnr).sum::<f64>() / n,
    )
}

pub const CSV_HEADER: &str = "pair_id,psnr,ssim,temp_mae,grad_mae,bicubic_psnr,bicubic_ssim,delta_psnr";

/// One row per pair plus a final `mean` row.
pub fn to_csv(rows: &[PairEval]) -> String {
    let mut s = format!("{CSV_HEADER}\n");
    let mut sum = [0.0f64; 7];
    for r in rows {
        let v = [
            r.model.psnr,
            r.model.ssim,
            r.model.temp_mae,
            r.model.grad_mae,
            r.bicubic.psnr,
            r.bicubic.ssim,
            r.model.psnr - r.bicubic.psnr,
        ];
        sum.iter_mut().zip(v).for_each(|(a, b)| *a += b);
        writeln!(s, "{},{}", r.pair_id, fmt_row(&v)).expect("write to String");
    }
    let n = rows.len().max(1) as f64;
    writeln!(s, "mean,{}", fmt_row(&sum.map(|x| x / n))).expect("write to String");
    s
}

fn fmt_row(v: &[f64; 7]) -> String {
    format!("{:.4},{:.6},{:.6e},{:.6e},{:.4},{:.6},{:.4}", v[0], v[1], v[2], v[3], v[4], v[5], v[6])
}

/// Writes the temperature and gradient difference maps of every row that
/// kept them as 16-bit PNGs, scaled so that `full_scale` maps to white.
pub fn write_maps(dir: &Path, rows: &[PairEval], full_scale: f64) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for r in rows {
        let Some(m) = &r.model.maps else { continue };
        for (name, map) in [("temp", &m.temp_map), ("grad", &m.grad_map)] {
            let scaled: FeatureMap<f64> = map.map(|v| v / full_scale);
            io::write_png_gray16(&dir.join(format!("{}_{name}_diff.png", r.pair_id)), &scaled)?;
        }
    }
    Ok(())
}
