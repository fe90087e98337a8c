use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use thermsr::ablate::{self, Grid};
use thermsr::checkpoint::{self, Checkpoint};
use thermsr::config::{ExperimentConfig, Precision};
use thermsr::error::{Error, Result};
use thermsr::manifest::{self, Dataset};
use thermsr::{eval, io, train};
use thermsr_core::degrade::{DegradationKind, DegradationSpec};
use thermsr_core::metrics::evaluate_pair;
use thermsr_core::synth::PairConfig;
use thermsr_core::{build_variant, FeatureMap, Scalar};

#[derive(Parser)]
#[command(name = "thermsr", version, about = "Optics-guided thermal super-resolution experiments")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic registered scene pairs and a manifest.
    Simulate {
        /// Seed range `a..b` (end exclusive).
        #[arg(long)]
        seeds: String,
        #[arg(long, default_value_t = 256)]
        size: usize,
        #[arg(long, default_value_t = 4)]
        scale: usize,
        #[arg(long, default_value = "bi")]
        kind: String,
        /// Heat-diffusion steps per scene.
        #[arg(long, default_value_t = 10)]
        steps: usize,
        /// Put a striped panel into the first scene.
        #[arg(long)]
        panel_first: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Re-degrade the HR thermal images of a manifest.
    Degrade {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        kind: String,
        #[arg(long)]
        scale: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train from a configuration file.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Continue from a checkpoint of the same configuration.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Evaluate a checkpoint on full images.
    Eval {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        /// CSV destination; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Directory for difference-map PNGs.
        #[arg(long)]
        maps: Option<PathBuf>,
    },
    /// Train and evaluate every variant of an ablation grid.
    Ablate {
        #[arg(long)]
        grid: String,
        #[arg(long)]
        config: PathBuf,
        /// Updates per variant; the configured budget when absent.
        #[arg(long)]
        steps: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Full-reference metrics between two images (.png or .tfd).
    Metrics {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        peak: f64,
        #[arg(long)]
        maps: Option<PathBuf>,
    },
}

fn arg_err(key: &str, message: impl std::fmt::Display) -> Error {
    Error::Config { line: 0, key: key.to_string(), message: message.to_string() }
}

fn parse_seeds(s: &str) -> Result<std::ops::Range<u64>> {
    let (a, b) = s.split_once("..").ok_or_else(|| arg_err("--seeds", "expected a..b"))?;
    let a: u64 = a.trim().parse().map_err(|_| arg_err("--seeds", format!("bad start '{a}'")))?;
    let b: u64 = b.trim().parse().map_err(|_| arg_err("--seeds", format!("bad end '{b}'")))?;
    if b <= a {
        return Err(arg_err("--seeds", "empty range"));
    }
    Ok(a..b)
}

fn spec(kind: &str, scale: usize) -> Result<DegradationSpec> {
    let kind: DegradationKind = kind.parse()?;
    Ok(DegradationSpec::new(kind, scale)?)
}

fn write_or_print(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => io::write_text(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run_eval<T: Scalar>(ckpt: &Path, manifest: &Path, out: Option<&Path>, maps: Option<&Path>) -> Result<()> {
    let ck = Checkpoint::<T>::load(ckpt)?;
    let mut net = build_variant::<T>(&ck.config.model, ck.config.train.seed)?;
    net.params_mut().load_from(&ck.params)?;
    let data = Dataset::<T>::load(manifest)?;
    let rows = eval::evaluate(&net, &data, maps.is_some())?;
    if let Some(dir) = maps {
        eval::write_maps(dir, &rows, 0.1)?;
    }
    write_or_print(out, &eval::to_csv(&rows))
}

fn run_ablate<T: Scalar>(cfg: &ExperimentConfig, grid: Grid, steps: u64, out: Option<&Path>) -> Result<()> {
    let data = Dataset::<T>::from_config(&cfg.data, cfg.model.scale)?;
    let rows = ablate::run_ablation(cfg, grid, &data, steps, |m| eprintln!("{m}"))?;
    write_or_print(out, &ablate::to_csv(&rows))
}

fn load_map(p: &Path) -> Result<FeatureMap<f64>> {
    io::read_image(p)
}

fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Simulate { seeds, size, scale, kind, steps, panel_first, out } => {
            let cfg = PairConfig { size, steps, degradation: spec(&kind, scale)?, ..PairConfig::default() };
            let m = manifest::simulate(&out, parse_seeds(&seeds)?, &cfg, panel_first)?;
            eprintln!("wrote {} pairs to {}", m.records.len(), out.display());
        }
        Command::Degrade { input, kind, scale, out } => {
            let m = manifest::degrade_manifest(&input, &spec(&kind, scale)?, &out)?;
            eprintln!("degraded {} pairs into {}", m.records.len(), out.display());
        }
        Command::Train { config, resume } => {
            let cfg = ExperimentConfig::load(&config)?;
            let summary = match cfg.train.precision {
                Precision::F32 => train::run::<f32>(&cfg, resume.as_deref())?,
                Precision::F64 => train::run::<f64>(&cfg, resume.as_deref())?,
            };
            eprintln!("trained to step {}; checkpoint {}", summary.steps, summary.final_checkpoint.display());
        }
        Command::Eval { ckpt, manifest, out, maps } => match checkpoint::peek_dtype(&ckpt)?.as_str() {
            "f32" => run_eval::<f32>(&ckpt, &manifest, out.as_deref(), maps.as_deref())?,
            _ => run_eval::<f64>(&ckpt, &manifest, out.as_deref(), maps.as_deref())?,
        },
        Command::Ablate { grid, config, steps, out } => {
            let grid: Grid = grid.parse().map_err(|e| arg_err("--grid", e))?;
            let cfg = ExperimentConfig::load(&config)?;
            let steps = match steps {
                Some(s) => s,
                None => train::Trainer::new(cfg.clone(), Dataset::<f32>::from_config(&cfg.data, cfg.model.scale)?)?
                    .budget(),
            };
            match cfg.train.precision {
                Precision::F32 => run_ablate::<f32>(&cfg, grid, steps, out.as_deref())?,
                Precision::F64 => run_ablate::<f64>(&cfg, grid, steps, out.as_deref())?,
            }
        }
        Command::Metrics { a, b, peak, maps } => {
            let (ia, ib) = (load_map(&a)?, load_map(&b)?);
            let r = evaluate_pair(&ia, &ib, peak, maps.is_some())?;
            println!("pair_id,psnr,ssim,temp_mae,grad_mae");
            println!("{},{:.4},{:.6},{:.6e},{:.6e}", a.display(), r.psnr, r.ssim, r.temp_mae, r.grad_mae);
            if let Some(dir) = maps {
                let row = eval::PairEval { pair_id: "metrics".into(), bicubic: r.clone(), model: r };
                eval::write_maps(&dir, &[row], 0.1)?;
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
