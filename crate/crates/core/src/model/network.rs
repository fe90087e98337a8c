//! The assembled dual-branch network and its ablation variants.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{Tape, Var};
use crate::degrade::bicubic_resize;
use crate::error::{invalid, Result};
use crate::params::ParamStore;
use crate::scalar::Scalar;
use crate::tensor::FeatureMap;

use super::config::ModelConfig;
use super::layers::{Builder, Conv};
use super::spl::SplDown;
use super::stage::{Stage, StageState};

/// Name suffixes of every layer whose output is added onto a residual path.
/// Zeroing them turns each block into the identity.
pub const RESIDUAL_OUTPUT_SUFFIXES: &[&str] = &[
    ".s_out.w",
    ".s_out.b",
    ".c_out.w",
    ".c_out.b",
    ".ffn_out.w",
    ".ffn_out.b",
    ".wv.w",
    ".fuse_out.w",
    ".fuse_out.b",
    ".tail.w",
    ".tail.b",
];

struct SrHead {
    align: Option<SplDown>,
    fuse: Conv,
    expand: Conv,
    out: Conv,
}

pub struct Output {
    /// The image the variant is trained on (`sH x sW x 3`).
    pub sr: Var,
    /// Auxiliary modality-conversion image, when the variant has one.
    pub mc: Option<Var>,
}

pub struct Prediction<T> {
    pub sr: FeatureMap<T>,
    pub mc: Option<FeatureMap<T>>,
}

pub struct Network<T> {
    cfg: ModelConfig,
    params: ParamStore<T>,
    enc_t: Option<Conv>,
    enc_o: Vec<Conv>,
    stages: Vec<Stage>,
    sr_head: Option<SrHead>,
    mc_head: Option<Conv>,
}

/// Builds the network for `cfg` with parameters drawn from `seed`.
pub fn build_variant<T: Scalar>(cfg: &ModelConfig, seed: u64) -> Result<Network<T>> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = ParamStore::new();
    let mode = cfg.branch_mode;
    let (c, k, s) = (cfg.channels, cfg.kernel, cfg.scale);
    let mut b = Builder::new(&mut params, &mut rng, cfg.init_std);

    let enc_t = mode.has_thermal().then(|| b.conv("enc_t", k, 3, c, 1));
    let mut enc_o = Vec::new();
    if mode.has_optical() {
        let mut e = b.scope("enc_o");
        enc_o.push(e.conv("in", k, 3, c, 1));
        for i in 0..s.trailing_zeros() as usize - 1 {
            enc_o.push(e.conv(&format!("down{i}"), 3, c, c, 2));
        }
        enc_o.push(e.conv("out", k, c, c, 1));
    }
    let stages = (0..cfg.stages).map(|i| Stage::new(&mut b.scope(&format!("stage{i}")), cfg)).collect();
    let sr_head = mode.sr_head_output().then(|| {
        let mut h = b.scope("sr_head");
        let align = mode.has_optical().then(|| SplDown::new(&mut h.scope("align"), c));
        let fuse_in = if align.is_some() { 2 * c } else { c };
        SrHead {
            align,
            fuse: h.conv("fuse", k, fuse_in, c, 1),
            expand: h.conv("expand", k, c, 3 * s * s, 1),
            out: if cfg.bicubic_skip { h.zero_conv("out", k, 3, 3) } else { h.conv("out", k, 3, 3, 1) },
        }
    });
    let mc_head = mode.has_mc_head().then(|| {
        let r = s / 2;
        if cfg.bicubic_skip && mode.has_thermal() {
            b.zero_conv("mc_head", k, c, 3 * r * r)
        } else {
            b.conv("mc_head", k, c, 3 * r * r, 1)
        }
    });
    Ok(Network { cfg: cfg.clone(), params, enc_t, enc_o, stages, sr_head, mc_head })
}

impl<T: Scalar> Network<T> {
    pub fn config(&self) -> &ModelConfig {
        &self.cfg
    }

    pub fn params(&self) -> &ParamStore<T> {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore<T> {
        &mut self.params
    }

    /// Total number of scalar parameters.
    pub fn param_count(&self) -> usize {
        self.params.count()
    }

    pub fn tape(&self) -> Tape<'_, T> {
        Tape::new(&self.params)
    }

    /// Zeroes every residual output projection.
    pub fn zero_residual_outputs(&mut self) -> usize {
        self.params.zero_matching(RESIDUAL_OUTPUT_SUFFIXES)
    }

    pub fn encode_thermal(&self, tape: &mut Tape<'_, T>, x: Var) -> Result<Var> {
        let Some(enc) = &self.enc_t else { return invalid("variant has no thermal branch") };
        let (_, _, c) = tape.hwc(x);
        if c != 3 {
            return invalid(format!("thermal input must have 3 channels, got {c}"));
        }
        enc.forward(tape, x)
    }

    pub fn encode_optical(&self, tape: &mut Tape<'_, T>, x: Var) -> Result<Var> {
        if self.enc_o.is_empty() {
            return invalid("variant has no optical branch");
        }
        let (h, w, c) = tape.hwc(x);
        let stride = self.cfg.scale / 2;
        if c != 3 {
            return invalid(format!("optical input must have 3 channels, got {c}"));
        }
        if h % stride != 0 || w % stride != 0 {
            return invalid(format!("optical input {h}x{w} not divisible by {stride}"));
        }
        let mut y = x;
        for conv in &self.enc_o {
            y = conv.forward(tape, y)?;
        }
        Ok(y)
    }

    pub fn stage_forward(&self, tape: &mut Tape<'_, T>, index: usize, state: StageState) -> Result<StageState> {
        self.stages[index].forward(tape, state)
    }

    /// Reconstruction head: `out(shuffle(expand(fuse([F_T, down(F_O)]))))`.
    pub fn fuse_and_upsample(&self, tape: &mut Tape<'_, T>, t: Var, o: Option<Var>) -> Result<Var> {
        let Some(head) = &self.sr_head else { return invalid("variant has no SR head") };
        let f = match (&head.align, o) {
            (Some(align), Some(o)) => {
                let od = align.forward(tape, o)?;
                let cat = tape.concat(t, od)?;
                head.fuse.forward(tape, cat)?
            }
            (None, _) => head.fuse.forward(tape, t)?,
            (Some(_), None) => return invalid("fusion head needs the optical feature"),
        };
        let e = head.expand.forward(tape, f)?;
        let u = tape.pixel_shuffle(e, self.cfg.scale)?;
        head.out.forward(tape, u)
    }

    fn check_inputs(&self, lr: &FeatureMap<T>, opt: Option<&FeatureMap<T>>) -> Result<()> {
        let s = self.cfg.scale;
        if lr.channels() != 3 {
            return invalid(format!("thermal input must have 3 channels, got {}", lr.channels()));
        }
        match opt {
            Some(o) if o.shape() != (lr.height() * s, lr.width() * s, 3) => invalid(format!(
                "optical input {:?} is not {}x the thermal input {:?}",
                o.shape(),
                s,
                lr.shape()
            )),
            None if self.cfg.branch_mode.has_optical() => {
                invalid(format!("branch mode {} needs the optical input", self.cfg.branch_mode))
            }
            _ => Ok(()),
        }
    }

    /// Records the full forward pass. `opt` may be omitted for variants
    /// without an optical branch.
    pub fn forward(&self, tape: &mut Tape<'_, T>, lr: &FeatureMap<T>, opt: Option<&FeatureMap<T>>) -> Result<Output> {
        self.check_inputs(lr, opt)?;
        let mode = self.cfg.branch_mode;
        let s = self.cfg.scale;
        let thermal = match mode.has_thermal() {
            true => {
                let x = tape.input(lr);
                Some(self.encode_thermal(tape, x)?)
            }
            false => None,
        };
        let optical = match (mode.has_optical(), opt) {
            (true, Some(o)) => {
                let x = tape.input(o);
                Some(self.encode_optical(tape, x)?)
            }
            _ => None,
        };
        let mut state = StageState { thermal, optical };
        for i in 0..self.stages.len() {
            state = self.stage_forward(tape, i, state)?;
        }
        state.check(tape)?;
        let skip = if self.cfg.bicubic_skip && mode.has_thermal() {
            let up = bicubic_resize(lr, lr.height() * s, lr.width() * s)?;
            Some(tape.input(&up))
        } else {
            None
        };
        let with_skip = |tape: &mut Tape<'_, T>, v: Var| match skip {
            Some(sk) => tape.add(v, sk),
            None => Ok(v),
        };
        let sr_from_head = match (&self.sr_head, state.thermal) {
            (Some(_), Some(t)) => {
                let y = self.fuse_and_upsample(tape, t, state.optical)?;
                Some(with_skip(tape, y)?)
            }
            _ => None,
        };
        let mc = match (&self.mc_head, state.optical) {
            (Some(head), Some(o)) => {
                let y = head.forward(tape, o)?;
                let y = tape.pixel_shuffle(y, s / 2)?;
                Some(with_skip(tape, y)?)
            }
            _ => None,
        };
        match (sr_from_head, mc) {
            (Some(sr), mc) => Ok(Output { sr, mc }),
            (None, Some(mc)) => Ok(Output { sr: mc, mc: None }),
            (None, None) => invalid("variant produced no output image"),
        }
    }

    /// Inference pass with outputs clamped to `[0, 1]`.
    pub fn infer(&self, lr: &FeatureMap<T>, opt: Option<&FeatureMap<T>>) -> Result<Prediction<T>> {
        let mut tape = self.tape();
        let out = self.forward(&mut tape, lr, opt)?;
        let clamp = |v: Var| tape.feature_map(v).clamp(T::zero(), T::one());
        Ok(Prediction { sr: clamp(out.sr), mc: out.mc.map(clamp) })
    }
}
