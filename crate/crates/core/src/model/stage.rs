use crate::autodiff::{Tape, Var};
use crate::error::{invalid, Result};
use crate::scalar::Scalar;

use super::config::ModelConfig;
use super::crme::Crme;
use super::htl::Htl;
use super::layers::{Builder, Conv};
use super::pdtm::Pdtm;

/// Per-branch features between stages. Optical maps are exactly twice the
/// thermal size when both are present.
#[derive(Clone, Copy, Debug)]
pub struct StageState {
    pub thermal: Option<Var>,
    pub optical: Option<Var>,
}

impl StageState {
    pub fn check<T: Scalar>(&self, tape: &Tape<'_, T>) -> Result<()> {
        if let (Some(t), Some(o)) = (self.thermal, self.optical) {
            let (th, tw, tc) = tape.hwc(t);
            let (oh, ow, oc) = tape.hwc(o);
            if oh != 2 * th || ow != 2 * tw || oc != tc {
                return invalid(format!("optical state {oh}x{ow}x{oc} is not double thermal {th}x{tw}x{tc}"));
            }
        }
        Ok(())
    }
}

struct Branch {
    layers: Vec<Htl>,
    tail: Conv,
}

impl Branch {
    fn new<T: Scalar>(b: &mut Builder<'_, T>, cfg: &ModelConfig) -> Self {
        let layers = (0..cfg.htl_depth)
            .map(|i| Htl::new(&mut b.scope(&format!("htl{i}")), cfg.channels, cfg.window, cfg.heads))
            .collect();
        Self { layers, tail: b.zero_conv("tail", 3, cfg.channels, cfg.channels) }
    }

    /// `tail(HTL^K(x)) + skip`.
    fn forward<T: Scalar>(&self, tape: &mut Tape<'_, T>, x: Var, skip: Var) -> Result<Var> {
        let mut h = x;
        for l in &self.layers {
            h = l.forward(tape, h)?;
        }
        let h = self.tail.forward(tape, h)?;
        tape.add(h, skip)
    }
}

pub struct Stage {
    crme: Crme,
    pdtm: Option<Pdtm>,
    thermal: Option<Branch>,
    optical: Option<Branch>,
}

impl Stage {
    pub fn new<T: Scalar>(b: &mut Builder<'_, T>, cfg: &ModelConfig) -> Self {
        let mode = cfg.branch_mode;
        Self {
            crme: Crme::new(&mut b.scope("crme"), cfg),
            pdtm: cfg.use_pdtm.then(|| Pdtm::new(&mut b.scope("pdtm"), cfg.channels, cfg.lambda_t, cfg.lambda_o)),
            thermal: mode.has_thermal().then(|| Branch::new(&mut b.scope("thermal"), cfg)),
            optical: mode.has_optical().then(|| Branch::new(&mut b.scope("optical"), cfg)),
        }
    }

    pub fn forward<T: Scalar>(&self, tape: &mut Tape<'_, T>, state: StageState) -> Result<StageState> {
        state.check(tape)?;
        let (t, o) = self.crme.forward(tape, state.thermal, state.optical)?;
        let t = match (&self.pdtm, t, o) {
            (Some(p), Some(t), Some(o)) => Some(p.forward(tape, t, o)?.out),
            _ => t,
        };
        let thermal = match (&self.thermal, t, state.thermal) {
            (Some(b), Some(t), Some(skip)) => Some(b.forward(tape, t, skip)?),
            _ => None,
        };
        let optical = match (&self.optical, o, state.optical) {
            (Some(b), Some(o), Some(skip)) => Some(b.forward(tape, o, skip)?),
            _ => None,
        };
        Ok(StageState { thermal, optical })
    }
}
