//! Deterministic training.
//!
//! The data stream is a pure function of `(seed, step)`: epoch `e` visits
//! the pairs in a permutation seeded by `(seed, e)`, and every crop position
//! is seeded by `(seed, step, slot)`. A checkpoint therefore only needs the
//! step counter to resume the stream exactly.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thermsr_core::degrade::{crop_aligned_patches, PatchSet};
use thermsr_core::objective::{loss_and_grad, Sample};
use thermsr_core::{build_variant, Network, Scalar, Tensor};

use crate::checkpoint::Checkpoint;
use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::io;
use crate::manifest::Dataset;
use crate::optim::{clip_global_norm, learning_rate, Adam};

/// SplitMix64 finalizer, used to derive independent stream seeds.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn derive(seed: u64, tag: u64, a: u64, b: u64) -> u64 {
    mix(mix(mix(seed ^ tag) ^ a) ^ b)
}

const EPOCH_TAG: u64 = 0x6570_6f63_6800_0000;
const CROP_TAG: u64 = 0x6372_6f70_0000_0000;

/// One logged optimizer step.
#[derive(Clone, Debug, PartialEq)]
pub struct StepLog {
    /// 1-based index of the update.
    pub step: u64,
    pub epoch: u64,
    pub lr: f64,
    pub lambda: f64,
    pub total: f64,
    pub rec: f64,
    pub region: f64,
    pub boundary: f64,
    pub objective: f64,
    pub grad_norm: f64,
}

impl StepLog {
    pub const CSV_HEADER: &'static str = "step,epoch,lr,lambda,total,rec,region,boundary,objective,grad_norm";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{:e},{},{:.9e},{:.9e},{:.9e},{:.9e},{:.9e},{:.6e}",
            self.step,
            self.epoch,
            self.lr,
            self.lambda,
            self.total,
            self.rec,
            self.region,
            self.boundary,
            self.objective,
            self.grad_norm
        )
    }
}

pub struct Trainer<T: Scalar> {
    cfg: ExperimentConfig,
    net: Network<T>,
    adam: Adam<T>,
    data: Dataset<T>,
    step: u64,
    dump_dir: Option<PathBuf>,
}

impl<T: Scalar> Trainer<T> {
    pub fn new(cfg: ExperimentConfig, data: Dataset<T>) -> Result<Self> {
        check_data(&cfg, &data)?;
        let net = build_variant::<T>(&cfg.model, cfg.train.seed)?;
        let adam = Adam::new(cfg.adam, net.params());
        Ok(Self { cfg, net, adam, data, step: 0, dump_dir: None })
    }

    /// Continues from `ckpt`. The checkpoint must come from a run with the
    /// same configuration hash.
    pub fn resume(cfg: ExperimentConfig, data: Dataset<T>, ckpt: Checkpoint<T>) -> Result<Self> {
        if ckpt.config_hash != cfg.hash() {
            return Err(Error::Checkpoint(format!(
                "configuration hash {} does not match the checkpoint's {}",
                &cfg.hash()[..12],
                &ckpt.config_hash[..12.min(ckpt.config_hash.len())]
            )));
        }
        let mut t = Self::new(cfg, data)?;
        t.net.params_mut().load_from(&ckpt.params)?;
        t.adam = ckpt.adam;
        t.step = ckpt.step;
        Ok(t)
    }

    /// Writes a diagnostic dump of any batch that produces a non-finite loss.
    pub fn with_dump_dir(mut self, dir: impl Into<PathBuf>) -> Self {
        self.dump_dir = Some(dir.into());
        self
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.cfg
    }

    pub fn network(&self) -> &Network<T> {
        &self.net
    }

    pub fn network_mut(&mut self) -> &mut Network<T> {
        &mut self.net
    }

    pub fn data(&self) -> &Dataset<T> {
        &self.data
    }

    pub fn steps_done(&self) -> u64 {
        self.step
    }

    pub fn steps_per_epoch(&self) -> u64 {
        self.data.len().div_ceil(self.cfg.train.batch) as u64
    }

    /// Epoch of the next update.
    pub fn epoch(&self) -> u64 {
        self.step / self.steps_per_epoch()
    }

    /// Learning rate of the next update.
    pub fn lr(&self) -> f64 {
        learning_rate(self.cfg.train.lr, self.cfg.train.lr_halving_period, self.epoch() as usize)
    }

    /// Total updates of the configured run.
    pub fn budget(&self) -> u64 {
        match self.cfg.train.max_steps {
            0 => self.cfg.train.epochs as u64 * self.steps_per_epoch(),
            m => m as u64,
        }
    }

    /// `(pair index, crop seed)` for every slot of the batch at `step`.
    pub fn batch_plan(&self, step: u64) -> Vec<(usize, u64)> {
        let spe = self.steps_per_epoch();
        let (epoch, pos) = (step / spe, (step % spe) as usize);
        let seed = self.cfg.train.seed;
        let mut order: Vec<usize> = (0..self.data.len()).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(derive(seed, EPOCH_TAG, epoch, 0)));
        let b = self.cfg.train.batch;
        let end = ((pos + 1) * b).min(order.len());
        order[pos * b..end]
            .iter()
            .enumerate()
            .map(|(slot, &i)| (i, derive(seed, CROP_TAG, step, slot as u64)))
            .collect()
    }

    /// One optimizer update on the next batch of the stream.
    pub fn step(&mut self) -> Result<StepLog> {
        let plan = self.batch_plan(self.step);
        let (epoch, lr) = (self.epoch(), self.lr());
        let n = self.net.params().len();
        let mut acc: Vec<Option<Tensor<T>>> = vec![None; n];
        let mut sums = [0.0f64; 5];
        let mut patches = Vec::with_capacity(plan.len());
        let optical_used = self.cfg.model.branch_mode.has_optical();
        for &(i, crop_seed) in &plan {
            patches.push(crop_aligned_patches(&self.data.pairs[i], self.cfg.train.patch, crop_seed)?);
        }
        for p in &patches {
            let s = Sample { lr: &p.lr, optical: optical_used.then_some(&p.optical), hr: &p.hr, masks: &p.masks };
            let out = match loss_and_grad(&self.net, s, &self.cfg.loss) {
                Ok(o) => o,
                Err(thermsr_core::Error::NonFinite(m)) => return Err(self.abort(&plan, &patches, &m)),
                Err(e) => return Err(e.into()),
            };
            let l = &out.loss;
            for (s, v) in sums.iter_mut().zip([l.total, l.rec, l.region, l.boundary, out.objective]) {
                *s += v;
            }
            for (a, g) in acc.iter_mut().zip(out.grads) {
                match (a, g) {
                    (Some(a), Some(g)) => a.add_assign(&g),
                    (a @ None, g) => *a = g,
                    (Some(_), None) => {}
                }
            }
        }
        let inv = T::lit(1.0 / plan.len() as f64);
        for g in acc.iter_mut().flatten() {
            g.data.iter_mut().for_each(|x| *x *= inv);
        }
        let grad_norm = clip_global_norm(&mut acc, self.cfg.train.grad_clip);
        if !grad_norm.is_finite() {
            return Err(self.abort(&plan, &patches, "gradient norm is not finite"));
        }
        self.adam.step(self.net.params_mut(), &acc, lr);
        self.step += 1;
        let k = plan.len() as f64;
        Ok(StepLog {
            step: self.step,
            epoch,
            lr,
            lambda: self.cfg.loss.lambda,
            total: sums[0] / k,
            rec: sums[1] / k,
            region: sums[2] / k,
            boundary: sums[3] / k,
            objective: sums[4] / k,
            grad_norm,
        })
    }

    fn abort(&self, plan: &[(usize, u64)], patches: &[PatchSet<T>], what: &str) -> Error {
        let mut msg = format!(
            "non-finite loss at step {} ({what}); batch pairs [{}]",
            self.step + 1,
            plan.iter().map(|(i, _)| self.data.ids[*i].as_str()).collect::<Vec<_>>().join(" ")
        );
        if let Some(dir) = &self.dump_dir {
            match dump_batch(dir, self.step + 1, plan, patches, &self.data.ids, what) {
                Ok(p) => write!(msg, "; dump at {}", p.display()).expect("write to String"),
                Err(e) => write!(msg, "; dump failed: {e}").expect("write to String"),
            }
        }
        Error::Training(msg)
    }

    pub fn checkpoint(&self) -> Checkpoint<T> {
        Checkpoint {
            step: self.step,
            epoch: self.epoch(),
            config_hash: self.cfg.hash(),
            config: self.cfg.clone(),
            params: self.net.params().clone(),
            adam: self.adam.clone(),
        }
    }
}

fn check_data<T: Scalar>(cfg: &ExperimentConfig, data: &Dataset<T>) -> Result<()> {
    if data.is_empty() {
        return Err(Error::Training("no training pairs".into()));
    }
    for (id, p) in data.ids.iter().zip(&data.pairs) {
        if p.scale != cfg.model.scale {
            return Err(Error::Training(format!("{id} is x{} but the model is x{}", p.scale, cfg.model.scale)));
        }
        let (h, w, _) = p.thermal_lr.shape();
        if h.min(w) < cfg.train.patch {
            return Err(Error::Training(format!("{id}: LR image {h}x{w} smaller than patch {}", cfg.train.patch)));
        }
    }
    Ok(())
}

fn dump_batch<T: Scalar>(
    dir: &Path,
    step: u64,
    plan: &[(usize, u64)],
    patches: &[PatchSet<T>],
    ids: &[String],
    what: &str,
) -> Result<PathBuf> {
    let d = dir.join(format!("nonfinite_step{step:06}"));
    std::fs::create_dir_all(&d).map_err(|e| Error::io(&d, e))?;
    let mut report = format!("step = {step}\nreason = {what}\n");
    for (slot, ((i, seed), p)) in plan.iter().zip(patches).enumerate() {
        writeln!(report, "slot {slot}: pair = {}, crop_seed = {seed}, lr_origin = {:?}", ids[*i], p.lr_origin)
            .expect("write to String");
        io::write_tfd(&d.join(format!("slot{slot}_lr.tfd")), &p.lr)?;
        io::write_tfd(&d.join(format!("slot{slot}_optical.tfd")), &p.optical)?;
        io::write_tfd(&d.join(format!("slot{slot}_hr.tfd")), &p.hr)?;
    }
    io::write_text(&d.join("batch.txt"), &report)?;
    Ok(d)
}

/// Result of a file-backed training run.
pub struct RunSummary {
    pub steps: u64,
    pub final_checkpoint: PathBuf,
    pub log: Vec<StepLog>,
}

/// Trains per `cfg`, writing the resolved config, a CSV step log and
/// checkpoints into `cfg.out_dir`. Resumes from `resume` when given.
pub fn run<T: Scalar>(cfg: &ExperimentConfig, resume: Option<&Path>) -> Result<RunSummary> {
    let out = cfg.out_dir.clone();
    cfg.write_echo(&out)?;
    let data = Dataset::<T>::from_config(&cfg.data, cfg.model.scale)?;
    let mut trainer = match resume {
        Some(p) => Trainer::resume(cfg.clone(), data, Checkpoint::load(p)?)?,
        None => Trainer::new(cfg.clone(), data)?,
    }
    .with_dump_dir(&out);
    let log_path = out.join("train_log.csv");
    let mut text = match (resume, std::fs::read_to_string(&log_path)) {
        (Some(_), Ok(prev)) => prev,
        _ => format!("{}\n", StepLog::CSV_HEADER),
    };
    let mut log = Vec::new();
    let budget = trainer.budget();
    while trainer.steps_done() < budget {
        let entry = trainer.step()?;
        writeln!(text, "{}", entry.csv_row()).expect("write to String");
        let every = cfg.train.checkpoint_every as u64;
        if every > 0 && entry.step % every == 0 {
            trainer.checkpoint().save(&out.join(format!("ckpt_{:06}.tsr", entry.step)))?;
        }
        log.push(entry);
    }
    io::write_text(&log_path, &text)?;
    let final_checkpoint = out.join("final.tsr");
    trainer.checkpoint().save(&final_checkpoint)?;
    Ok(RunSummary { steps: trainer.steps_done(), final_checkpoint, log })
}
