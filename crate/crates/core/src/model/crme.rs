//! Mutual enhancement between the LR thermal and 2x optical branches.

use crate::autodiff::{Tape, Var};
use crate::error::Result;
use crate::scalar::Scalar;

use super::config::ModelConfig;
use super::htl::Htl;
use super::layers::Builder;
use super::mgl::Mgl;
use super::spl::{SplDown, SplUp};

pub struct Crme {
    htl_t: Option<Htl>,
    htl_o: Option<Htl>,
    to_thermal: Option<(SplDown, Mgl)>,
    to_optical: Option<(SplUp, Mgl)>,
}

impl Crme {
    pub fn new<T: Scalar>(b: &mut Builder<'_, T>, cfg: &ModelConfig) -> Self {
        let (c, win, heads) = (cfg.channels, cfg.window, cfg.heads);
        let mode = cfg.branch_mode;
        let htl_t = mode.has_thermal().then(|| Htl::new(&mut b.scope("htl_t"), c, win, heads));
        let htl_o = mode.has_optical().then(|| Htl::new(&mut b.scope("htl_o"), c, win, heads));
        let to_thermal = (cfg.use_crme && mode.guides_thermal()).then(|| {
            let mut s = b.scope("sr");
            (SplDown::new(&mut s, c), Mgl::new(&mut s.scope("mgl"), c, win, heads))
        });
        let to_optical = (cfg.use_crme && mode.guides_optical()).then(|| {
            let mut s = b.scope("mc");
            (SplUp::new(&mut s, c), Mgl::new(&mut s.scope("mgl"), c, win, heads))
        });
        Self { htl_t, htl_o, to_thermal, to_optical }
    }

    /// Returns the enhanced `(thermal, optical)` pair; a branch absent on
    /// input stays absent.
    pub fn forward<T: Scalar>(
        &self,
        tape: &mut Tape<'_, T>,
        t: Option<Var>,
        o: Option<Var>,
    ) -> Result<(Option<Var>, Option<Var>)> {
        let t_hat = match (&self.htl_t, t) {
            (Some(h), Some(t)) => Some(h.forward(tape, t)?),
            _ => t,
        };
        let o_hat = match (&self.htl_o, o) {
            (Some(h), Some(o)) => Some(h.forward(tape, o)?),
            _ => o,
        };
        let t_tilde = match (&self.to_thermal, t_hat, o_hat) {
            (Some((down, mgl)), Some(t), Some(o)) => {
                let ctx = down.forward(tape, o)?;
                Some(mgl.forward(tape, t, ctx)?)
            }
            _ => t_hat,
        };
        let o_tilde = match (&self.to_optical, t_hat, o_hat) {
            (Some((up, mgl)), Some(t), Some(o)) => {
                let ctx = up.forward(tape, t)?;
                Some(mgl.forward(tape, o, ctx)?)
            }
            _ => o_hat,
        };
        Ok((t_tilde, o_tilde))
    }
}
