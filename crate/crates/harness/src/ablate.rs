//! Ablation grids: the component on/off grid and the collaboration grid.

use std::fmt::Write as _;
use std::str::FromStr;

use thermsr_core::model::BranchMode;
use thermsr_core::{build_variant, Network, Scalar};

use crate::config::ExperimentConfig;
use crate::error::Result;
use crate::eval::{evaluate, mean_psnr};
use crate::manifest::Dataset;
use crate::train::Trainer;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Grid {
    /// HTL always on; CRME, PDTM and the consistency loss toggled.
    Components,
    /// Single-branch, one-way guided and mutual variants.
    Collaboration,
}

impl FromStr for Grid {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "components" => Ok(Grid::Components),
            "collaboration" => Ok(Grid::Collaboration),
            _ => Err(format!("unknown grid '{s}' (expected components or collaboration)")),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Variant {
    pub name: String,
    pub cfg: ExperimentConfig,
}

/// The variants of `grid`, each a copy of `base` with only its flags changed.
pub fn variants(base: &ExperimentConfig, grid: Grid) -> Vec<Variant> {
    let with = |name: String, mode: BranchMode, crme: bool, pdtm: bool, tcl: bool| {
        let mut cfg = base.clone();
        cfg.model.branch_mode = mode;
        cfg.model.use_crme = crme;
        cfg.model.use_pdtm = pdtm;
        if !tcl {
            cfg.loss.lambda = 0.0;
        }
        Variant { name, cfg }
    };
    match grid {
        Grid::Components => {
            const ROWS: [(bool, bool, bool); 8] = [
                (false, false, false),
                (true, false, false),
                (false, true, false),
                (false, false, true),
                (true, true, false),
                (true, false, true),
                (false, true, true),
                (true, true, true),
            ];
            ROWS.iter()
                .map(|&(c, p, t)| {
                    let mut name = String::from("htl");
                    for (on, part) in [(c, "crme"), (p, "pdtm"), (t, "tcl")] {
                        if on {
                            name.push('+');
                            name.push_str(part);
                        }
                    }
                    with(name, BranchMode::Full, c, p, t)
                })
                .collect()
        }
        Grid::Collaboration => [
            (BranchMode::OnlySr, false, false),
            (BranchMode::OnlyMc, false, false),
            (BranchMode::GuidedSr, true, true),
            (BranchMode::GuidedMc, true, false),
            (BranchMode::Full, true, true),
        ]
        .into_iter()
        .map(|(m, c, p)| with(m.as_str().to_string(), m, c, p, base.loss.lambda > 0.0))
        .collect(),
    }
}

/// Parameter counts of a network split by component.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ComponentParams {
    pub total: usize,
    /// Cross-branch projections and attention; the per-branch HTLs inside
    /// the module are counted with their branch.
    pub crme: usize,
    pub pdtm: usize,
    pub thermal_branch: usize,
    pub optical_branch: usize,
    pub mc_head: usize,
}

pub fn component_params<T: Scalar>(net: &Network<T>) -> ComponentParams {
    let mut c = ComponentParams::default();
    for g in net.params().groups() {
        let n = g.value.len();
        let name = g.name.as_str();
        c.total += n;
        if name.contains(".crme.sr.") || name.contains(".crme.mc.") {
            c.crme += n;
        }
        if name.contains(".pdtm.") {
            c.pdtm += n;
        }
        if name.starts_with("enc_t.") || name.contains(".thermal.") || name.contains(".crme.htl_t.") {
            c.thermal_branch += n;
        }
        if name.starts_with("enc_o.") || name.contains(".optical.") || name.contains(".crme.htl_o.") {
            c.optical_branch += n;
        }
        if name.starts_with("mc_head.") {
            c.mc_head += n;
        }
    }
    c
}

#[derive(Clone, Debug)]
pub struct AblationRow {
    pub name: String,
    pub cfg: ExperimentConfig,
    pub params: ComponentParams,
    pub psnr: f64,
    pub ssim: f64,
    pub bicubic_psnr: f64,
    pub final_loss: f64,
}

/// Trains every variant for `steps` updates from the same seed and data, and
/// evaluates it on the training pairs.
pub fn run_ablation<T: Scalar>(
    base: &ExperimentConfig,
    grid: Grid,
    data: &Dataset<T>,
    steps: u64,
    mut progress: impl FnMut(&str),
) -> Result<Vec<AblationRow>> {
    let mut rows = Vec::new();
    for v in variants(base, grid) {
        let params = component_params(&build_variant::<T>(&v.cfg.model, v.cfg.train.seed)?);
        let mut t = Trainer::new(v.cfg.clone(), data.clone())?;
        let mut final_loss = f64::NAN;
        for _ in 0..steps {
            final_loss = t.step()?.objective;
        }
        let evals = evaluate(t.network(), data, false)?;
        let (psnr, bicubic_psnr) = mean_psnr(&evals);
        let ssim = evals.iter().map(|r| r.model.ssim).sum::<f64>() / evals.len().max(1) as f64;
        progress(&format!("{}: psnr {psnr:.3} dB after {steps} steps", v.name));
        rows.push(AblationRow { name: v.name, cfg: v.cfg, params, psnr, ssim, bicubic_psnr, final_loss });
    }
    Ok(rows)
}

pub const TABLE_HEADER: &str = "variant,branch_mode,crme,pdtm,tcl,params,psnr,ssim,bicubic_psnr,final_loss";

pub fn to_csv(rows: &[AblationRow]) -> String {
    let mut s = format!("{TABLE_HEADER}\n");
    for r in rows {
        let m = &r.cfg.model;
        writeln!(
            s,
            "{},{},{},{},{},{},{:.4},{:.6},{:.4},{:.6e}",
            r.name,
            m.branch_mode,
            u8::from(m.use_crme),
            u8::from(m.use_pdtm),
            u8::from(r.cfg.loss.lambda > 0.0),
            r.params.total,
            r.psnr,
            r.ssim,
            r.bicubic_psnr,
            r.final_loss
        )
        .expect("write to String");
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Preset;

    #[test]
    fn grids_have_the_published_row_counts() {
        let base = ExperimentConfig::preset(Preset::Tiny);
        let comp = variants(&base, Grid::Components);
        assert_eq!(comp.len(), 8);
        let flags: std::collections::HashSet<_> =
            comp.iter().map(|v| (v.cfg.model.use_crme, v.cfg.model.use_pdtm, v.cfg.loss.lambda > 0.0)).collect();
        assert_eq!(flags.len(), 8);
        assert_eq!(variants(&base, Grid::Collaboration).len(), 5);
    }

    #[test]
    fn disabled_components_own_no_parameters() {
        let base = ExperimentConfig::preset(Preset::Tiny);
        for grid in [Grid::Components, Grid::Collaboration] {
            for v in variants(&base, grid) {
                let m = &v.cfg.model;
                let p = component_params(&build_variant::<f32>(m, 0).unwrap());
                assert_eq!(p.crme == 0, !m.use_crme, "{}", v.name);
                assert_eq!(p.pdtm == 0, !m.use_pdtm, "{}", v.name);
                assert_eq!(p.optical_branch == 0, !m.branch_mode.has_optical(), "{}", v.name);
                assert_eq!(p.thermal_branch == 0, !m.branch_mode.has_thermal(), "{}", v.name);
                assert_eq!(p.mc_head == 0, !m.branch_mode.has_mc_head(), "{}", v.name);
            }
        }
    }
}
