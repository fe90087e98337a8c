//! Experiment configuration: a flat `key = value` text format with presets.
//!
//! Keys are applied on top of a preset (`preset = paper | desk | tiny`, paper
//! when absent). The resolved configuration prints back in the same format
//! with every key present, and parsing that echo reproduces it exactly.

use std::collections::HashMap;
use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use sha2::{Digest, Sha256};
use thermsr_core::loss::LossWeights;
use thermsr_core::model::ModelConfig;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Preset {
    /// Published hyperparameters.
    Paper,
    /// CPU-scale acceptance configuration.
    Desk,
    /// Smallest configuration, for smoke tests.
    Tiny,
}

impl Preset {
    pub fn as_str(self) -> &'static str {
        match self {
            Preset::Paper => "paper",
            Preset::Desk => "desk",
            Preset::Tiny => "tiny",
        }
    }
}

impl FromStr for Preset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "paper" => Ok(Preset::Paper),
            "desk" => Ok(Preset::Desk),
            "tiny" => Ok(Preset::Tiny),
            _ => Err(format!("unknown preset '{s}' (expected paper, desk or tiny)")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Precision {
    F32,
    F64,
}

impl Precision {
    pub fn as_str(self) -> &'static str {
        match self {
            Precision::F32 => "f32",
            Precision::F64 => "f64",
        }
    }
}

impl FromStr for Precision {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "f32" => Ok(Precision::F32),
            "f64" => Ok(Precision::F64),
            _ => Err(format!("expected f32 or f64, got '{s}'")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamParams {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamParams {
    fn default() -> Self {
        Self { beta1: 0.9, beta2: 0.99, eps: 1e-8 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainParams {
    pub lr: f64,
    pub lr_halving_period: usize,
    pub batch: usize,
    pub epochs: usize,
    /// Stop after this many optimizer steps; 0 runs all epochs.
    pub max_steps: usize,
    /// LR-grid side of the training crops.
    pub patch: usize,
    pub seed: u64,
    pub precision: Precision,
    /// Global gradient-norm clip; 0 disables it.
    pub grad_clip: f64,
    /// Checkpoint interval in steps; 0 writes only the final checkpoint.
    pub checkpoint_every: usize,
}

impl Default for TrainParams {
    fn default() -> Self {
        Self {
            lr: 1e-4,
            lr_halving_period: 200,
            batch: 8,
            epochs: 1000,
            max_steps: 0,
            patch: 48,
            seed: 0,
            precision: Precision::F32,
            grad_clip: 0.0,
            checkpoint_every: 0,
        }
    }
}

/// Where training pairs come from: a manifest on disk, or scenes generated
/// in memory from seeds `0..synthetic`.
#[derive(Clone, Debug, PartialEq)]
pub struct DataParams {
    pub manifest: Option<PathBuf>,
    pub synthetic: usize,
    pub size: usize,
    pub diffusion_steps: usize,
    /// Force a striped panel into the first synthetic scene.
    pub panel: bool,
}

impl Default for DataParams {
    fn default() -> Self {
        Self { manifest: None, synthetic: 0, size: 256, diffusion_steps: 10, panel: false }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub preset: Preset,
    pub model: ModelConfig,
    pub loss: LossWeights,
    pub adam: AdamParams,
    pub train: TrainParams,
    pub data: DataParams,
    pub out_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self::preset(Preset::Paper)
    }
}

/// Keys that do not change what a run computes, only how far it goes or where
/// it writes. They are excluded from the configuration hash so a run can be
/// resumed with a larger budget.
const RUN_EXTENT_KEYS: [&str; 4] = ["train.epochs", "train.max_steps", "train.checkpoint_every", "out_dir"];

impl ExperimentConfig {
    pub fn preset(p: Preset) -> Self {
        let base = Self {
            preset: p,
            model: ModelConfig::default(),
            loss: LossWeights::default(),
            adam: AdamParams::default(),
            train: TrainParams::default(),
            data: DataParams::default(),
            out_dir: PathBuf::from("runs/default"),
        };
        match p {
            Preset::Paper => base,
            Preset::Desk => Self {
                model: ModelConfig::desk(),
                train: TrainParams { lr: 1e-3, batch: 2, max_steps: 2000, patch: 32, ..base.train },
                data: DataParams { synthetic: 4, panel: true, ..base.data },
                out_dir: PathBuf::from("runs/desk"),
                ..base
            },
            Preset::Tiny => Self {
                model: ModelConfig::tiny(),
                train: TrainParams { lr: 1e-3, batch: 1, max_steps: 4, patch: 8, precision: Precision::F64, ..base.train },
                data: DataParams { synthetic: 2, size: 64, ..base.data },
                out_dir: PathBuf::from("runs/tiny"),
                ..base
            },
        }
    }

    /// Every key with its current value, in canonical order.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let m = &self.model;
        let t = &self.train;
        vec![
            ("preset", self.preset.as_str().to_string()),
            ("model.scale", m.scale.to_string()),
            ("model.stages", m.stages.to_string()),
            ("model.htl_depth", m.htl_depth.to_string()),
            ("model.channels", m.channels.to_string()),
            ("model.heads", m.heads.to_string()),
            ("model.window", m.window.to_string()),
            ("model.kernel", m.kernel.to_string()),
            ("model.lambda_t", m.lambda_t.to_string()),
            ("model.lambda_o", m.lambda_o.to_string()),
            ("model.use_crme", m.use_crme.to_string()),
            ("model.use_pdtm", m.use_pdtm.to_string()),
            ("model.branch_mode", m.branch_mode.to_string()),
            ("model.bicubic_skip", m.bicubic_skip.to_string()),
            ("model.init_std", m.init_std.to_string()),
            ("loss.lambda", self.loss.lambda.to_string()),
            ("loss.mc_aux", self.loss.mc_aux.to_string()),
            ("loss.bins", self.loss.bins.to_string()),
            ("optim.beta1", self.adam.beta1.to_string()),
            ("optim.beta2", self.adam.beta2.to_string()),
            ("optim.eps", self.adam.eps.to_string()),
            ("train.lr", t.lr.to_string()),
            ("train.lr_halving_period", t.lr_halving_period.to_string()),
            ("train.batch", t.batch.to_string()),
            ("train.epochs", t.epochs.to_string()),
            ("train.max_steps", t.max_steps.to_string()),
            ("train.patch", t.patch.to_string()),
            ("train.seed", t.seed.to_string()),
            ("train.precision", t.precision.as_str().to_string()),
            ("train.grad_clip", t.grad_clip.to_string()),
            ("train.checkpoint_every", t.checkpoint_every.to_string()),
            (
                "data.manifest",
                self.data.manifest.as_ref().map(|p| p.display().to_string()).unwrap_or_default(),
            ),
            ("data.synthetic", self.data.synthetic.to_string()),
            ("data.size", self.data.size.to_string()),
            ("data.diffusion_steps", self.data.diffusion_steps.to_string()),
            ("data.panel", self.data.panel.to_string()),
            ("out_dir", self.out_dir.display().to_string()),
        ]
    }

    fn set(&mut self, key: &str, v: &str) -> Result<(), String> {
        let m = &mut self.model;
        let t = &mut self.train;
        match key {
            "model.scale" => {
                m.scale = num(v)?;
                if m.scale != 4 && m.scale != 8 {
                    return Err(format!("must be 4 or 8, got {}", m.scale));
                }
            }
            "model.stages" => m.stages = positive(v)?,
            "model.htl_depth" => m.htl_depth = positive(v)?,
            "model.channels" => m.channels = positive(v)?,
            "model.heads" => m.heads = positive(v)?,
            "model.window" => m.window = positive(v)?,
            "model.kernel" => m.kernel = positive(v)?,
            "model.lambda_t" => m.lambda_t = unit(v)?,
            "model.lambda_o" => m.lambda_o = unit(v)?,
            "model.use_crme" => m.use_crme = flag(v)?,
            "model.use_pdtm" => m.use_pdtm = flag(v)?,
            "model.branch_mode" => m.branch_mode = v.parse().map_err(|e: thermsr_core::Error| e.to_string())?,
            "model.bicubic_skip" => m.bicubic_skip = flag(v)?,
            "model.init_std" => m.init_std = nonneg(v)?,
            "loss.lambda" => self.loss.lambda = unit(v)?,
            "loss.mc_aux" => self.loss.mc_aux = nonneg(v)?,
            "loss.bins" => self.loss.bins = positive(v)?,
            "optim.beta1" => self.adam.beta1 = beta(v)?,
            "optim.beta2" => self.adam.beta2 = beta(v)?,
            "optim.eps" => self.adam.eps = strictly_positive(v)?,
            "train.lr" => t.lr = strictly_positive(v)?,
            "train.lr_halving_period" => t.lr_halving_period = positive(v)?,
            "train.batch" => t.batch = positive(v)?,
            "train.epochs" => t.epochs = num(v)?,
            "train.max_steps" => t.max_steps = num(v)?,
            "train.patch" => t.patch = positive(v)?,
            "train.seed" => t.seed = num(v)?,
            "train.precision" => t.precision = v.parse()?,
            "train.grad_clip" => t.grad_clip = nonneg(v)?,
            "train.checkpoint_every" => t.checkpoint_every = num(v)?,
            "data.manifest" => self.data.manifest = (!v.is_empty()).then(|| PathBuf::from(v)),
            "data.synthetic" => self.data.synthetic = num(v)?,
            "data.size" => {
                self.data.size = num(v)?;
                if self.data.size < 64 {
                    return Err(format!("must be >= 64, got {}", self.data.size));
                }
            }
            "data.diffusion_steps" => self.data.diffusion_steps = num(v)?,
            "data.panel" => self.data.panel = flag(v)?,
            "out_dir" => self.out_dir = PathBuf::from(v),
            _ => return Err("unknown key".to_string()),
        }
        Ok(())
    }

    /// Parses configuration text.
    pub fn parse_str(text: &str) -> Result<Self> {
        let mut lines: Vec<(usize, String, String)> = Vec::new();
        let mut seen: HashMap<String, usize> = HashMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let Some((k, v)) = body.split_once('=') else {
                return Err(cfg_err(line, body, "expected 'key = value'"));
            };
            let (k, v) = (k.trim().to_string(), v.trim().to_string());
            if let Some(prev) = seen.insert(k.clone(), line) {
                return Err(cfg_err(line, &k, format!("duplicate key (first set on line {prev})")));
            }
            lines.push((line, k, v));
        }
        let mut cfg = match lines.iter().find(|(_, k, _)| k == "preset") {
            Some((line, k, v)) => Self::preset(v.parse().map_err(|e: String| cfg_err(*line, k, e))?),
            None => Self::default(),
        };
        for (line, k, v) in lines.iter().filter(|(_, k, _)| k != "preset") {
            cfg.set(k, v).map_err(|e| cfg_err(*line, k, e))?;
        }
        let line_of = |prefix: &str| {
            lines.iter().filter(|(_, k, _)| k.starts_with(prefix)).map(|(l, _, _)| *l).max().unwrap_or(0)
        };
        cfg.model.validate().map_err(|e| cfg_err(line_of("model."), "model", e))?;
        cfg.loss.validate().map_err(|e| cfg_err(line_of("loss."), "loss", e))?;
        if cfg.data.size % cfg.model.scale != 0 {
            return Err(cfg_err(line_of("data."), "data.size", "must be divisible by model.scale"));
        }
        if cfg.data.manifest.is_none() && cfg.train.patch * cfg.model.scale > cfg.data.size {
            return Err(cfg_err(line_of("train.patch"), "train.patch", "crop larger than the synthetic scenes"));
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_str(&text)
    }

    /// The resolved configuration in the input format, every key present.
    pub fn echo(&self) -> String {
        let mut s = String::new();
        for (k, v) in self.entries() {
            writeln!(s, "{k} = {v}").expect("writing to a String");
        }
        s
    }

    pub fn write_echo(&self, dir: &Path) -> Result<PathBuf> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let path = dir.join("config.resolved");
        std::fs::write(&path, self.echo()).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }

    /// SHA-256 over every key that affects what a run computes.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for (k, v) in self.entries() {
            if !RUN_EXTENT_KEYS.contains(&k) {
                h.update(format!("{k}={v}\n").as_bytes());
            }
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

impl fmt::Display for ExperimentConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.echo())
    }
}

fn cfg_err(line: usize, key: &str, message: impl fmt::Display) -> Error {
    Error::Config { line, key: key.to_string(), message: message.to_string().replace('\n', " ") }
}

fn num<N: FromStr>(v: &str) -> Result<N, String> {
    v.parse().map_err(|_| format!("expected a non-negative integer, got '{v}'"))
}

fn positive(v: &str) -> Result<usize, String> {
    match num(v)? {
        0 => Err("must be >= 1".to_string()),
        n => Ok(n),
    }
}

fn real(v: &str) -> Result<f64, String> {
    match v.parse::<f64>() {
        Ok(x) if x.is_finite() => Ok(x),
        _ => Err(format!("expected a finite number, got '{v}'")),
    }
}

fn nonneg(v: &str) -> Result<f64, String> {
    let x = real(v)?;
    if x < 0.0 {
        return Err(format!("must be >= 0, got {x}"));
    }
    Ok(x)
}

fn strictly_positive(v: &str) -> Result<f64, String> {
    let x = real(v)?;
    if x <= 0.0 {
        return Err(format!("must be > 0, got {x}"));
    }
    Ok(x)
}

fn unit(v: &str) -> Result<f64, String> {
    let x = real(v)?;
    if !(0.0..=1.0).contains(&x) {
        return Err(format!("must lie in [0, 1], got {x}"));
    }
    Ok(x)
}

fn beta(v: &str) -> Result<f64, String> {
    let x = real(v)?;
    if !(0.0..1.0).contains(&x) {
        return Err(format!("must lie in [0, 1), got {x}"));
    }
    Ok(x)
}

fn flag(v: &str) -> Result<bool, String> {
    match v {
        "true" | "1" => Ok(true),
        "false" | "0" => Ok(false),
        _ => Err(format!("expected true or false, got '{v}'")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text_is_the_paper_preset() {
        let c = ExperimentConfig::parse_str("# nothing set\n\n").unwrap();
        assert_eq!(c, ExperimentConfig::default());
        assert_eq!(c.model, ModelConfig::default());
        assert_eq!(c.loss.lambda, 0.03);
        assert_eq!(c.train.lr, 1e-4);
        assert_eq!(c.train.batch, 8);
        assert_eq!(c.train.lr_halving_period, 200);
        assert_eq!(c.adam, AdamParams { beta1: 0.9, beta2: 0.99, eps: 1e-8 });
    }

    #[test]
    fn echo_round_trips() {
        for p in [Preset::Paper, Preset::Desk, Preset::Tiny] {
            let mut c = ExperimentConfig::preset(p);
            c.data.manifest = Some("data/manifest.json".into());
            c.loss.lambda = 0.123456789;
            let back = ExperimentConfig::parse_str(&c.echo()).unwrap();
            assert_eq!(back, c);
            assert_eq!(back.hash(), c.hash());
        }
    }

    #[test]
    fn errors_name_line_and_key() {
        let e = ExperimentConfig::parse_str("preset = desk\n# note\nmodel.scale = 3\n").unwrap_err();
        assert_eq!(e.to_string(), "config: line 3: model.scale: must be 4 or 8, got 3");
        let e = ExperimentConfig::parse_str("preset = desk\nloss.lambda = 1.5").unwrap_err();
        assert!(e.to_string().starts_with("config: line 2: loss.lambda:"), "{e}");
        let e = ExperimentConfig::parse_str("preset = desk\nmodel.colour = red").unwrap_err();
        assert_eq!(e.to_string(), "config: line 2: model.colour: unknown key");
        let e = ExperimentConfig::parse_str("preset = desk\ntrain.batch = two").unwrap_err();
        assert!(e.to_string().contains("line 2: train.batch"), "{e}");
        let e = ExperimentConfig::parse_str("preset = desk\ntrain.seed = 1\ntrain.seed = 2").unwrap_err();
        assert!(e.to_string().contains("line 3: train.seed: duplicate"), "{e}");
    }

    #[test]
    fn cross_field_constraints_report_the_section() {
        let e = ExperimentConfig::parse_str("preset = desk\nmodel.heads = 5\n").unwrap_err();
        assert!(e.to_string().starts_with("config: line 2: model:"), "{e}");
    }

    #[test]
    fn hash_ignores_run_extent() {
        let a = ExperimentConfig::preset(Preset::Desk);
        let mut b = a.clone();
        b.train.max_steps = 99;
        b.out_dir = "elsewhere".into();
        assert_eq!(a.hash(), b.hash());
        b.train.seed = 7;
        assert_ne!(a.hash(), b.hash());
    }
}
