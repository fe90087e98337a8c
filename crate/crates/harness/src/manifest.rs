//! Dataset manifests and the in-memory training set.
//!
//! A manifest is a JSON file with one record per registered pair. Relative
//! paths resolve against the manifest's directory.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thermsr_core::degrade::{degrade, DegradationKind, DegradationSpec};
use thermsr_core::synth::{generate_pair, PairConfig, PairMeta, ScenePair};
use thermsr_core::Scalar;

use crate::config::DataParams;
use crate::error::{Error, Result};
use crate::io;

pub const MANIFEST_VERSION: u32 = 1;
/// Cubic convolution parameter of the resampler, recorded for provenance.
pub const CUBIC_A: f64 = -0.5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DegradationRecord {
    pub kind: String,
    pub scale: usize,
    pub blur_sigma: f64,
    pub kernel_size: usize,
    pub cubic_a: f64,
    pub antialias: bool,
}

impl DegradationRecord {
    pub fn from_spec(s: &DegradationSpec) -> Self {
        Self {
            kind: s.kind.as_str().to_string(),
            scale: s.scale,
            blur_sigma: s.blur_sigma,
            kernel_size: s.kernel_size,
            cubic_a: CUBIC_A,
            antialias: true,
        }
    }

    pub fn to_spec(&self) -> thermsr_core::Result<DegradationSpec> {
        let kind: DegradationKind = self.kind.parse()?;
        let spec = DegradationSpec { kind, scale: self.scale, blur_sigma: self.blur_sigma, kernel_size: self.kernel_size };
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub seed: u64,
    pub size: usize,
    pub steps: usize,
    pub dt: f64,
    pub noise: f64,
    /// `[y, x, height, width]` of the striped panel.
    pub panel: Option<[usize; 4]>,
    pub stripe_period: usize,
}

impl GenerationRecord {
    pub fn from_meta(m: &PairMeta) -> Self {
        Self {
            seed: m.seed,
            size: m.size,
            steps: m.steps,
            dt: m.dt,
            noise: m.noise,
            panel: m.panel.map(|(y, x, h, w)| [y, x, h, w]),
            stripe_period: m.stripe_period,
        }
    }

    pub fn to_meta(&self) -> PairMeta {
        PairMeta {
            seed: self.seed,
            size: self.size,
            steps: self.steps,
            dt: self.dt,
            noise: self.noise,
            panel: self.panel.map(|[y, x, h, w]| (y, x, h, w)),
            stripe_period: self.stripe_period,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairRecord {
    pub pair_id: String,
    pub optical_path: PathBuf,
    pub thermal_hr_path: PathBuf,
    pub thermal_lr_path: PathBuf,
    /// Region label image.
    pub mask_path: PathBuf,
    pub boundary_path: PathBuf,
    pub degradation: DegradationRecord,
    pub generation: Option<GenerationRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u32,
    pub records: Vec<PairRecord>,
}

impl Manifest {
    pub fn new(records: Vec<PairRecord>) -> Self {
        Self { version: MANIFEST_VERSION, records }
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let m: Manifest = serde_json::from_str(&text).map_err(|e| Error::format(path, e))?;
        if m.version != MANIFEST_VERSION {
            return Err(Error::format(path, format!("unsupported manifest version {}", m.version)));
        }
        Ok(m)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        io::write_text(path, &(text + "\n"))
    }
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

/// Reads one record's files and checks registration.
pub fn load_pair<T: Scalar>(base: &Path, r: &PairRecord) -> Result<ScenePair<T>> {
    let path = |p: &Path| resolve(base, p);
    for p in [&r.optical_path, &r.thermal_hr_path, &r.thermal_lr_path, &r.mask_path, &r.boundary_path] {
        if !path(p).is_file() {
            return Err(Error::io(path(p), "referenced file does not exist"));
        }
    }
    let spec = r.degradation.to_spec().map_err(|e| Error::format(&r.pair_id, e))?;
    let masks = io::read_masks(&path(&r.mask_path), &path(&r.boundary_path), &r.pair_id)?;
    let meta = r.generation.as_ref().map(GenerationRecord::to_meta).unwrap_or(PairMeta {
        seed: 0,
        size: 0,
        steps: 0,
        dt: 0.0,
        noise: 0.0,
        panel: None,
        stripe_period: 0,
    });
    ScenePair::from_parts(
        io::read_image(&path(&r.optical_path))?,
        io::read_image(&path(&r.thermal_hr_path))?,
        io::read_image(&path(&r.thermal_lr_path))?,
        masks,
        spec,
        meta,
    )
    .map_err(|e| Error::format(&r.pair_id, e))
}

/// Writes every file of one pair into `dir` and returns its record with paths
/// relative to `dir`.
pub fn write_pair<T: Scalar>(dir: &Path, id: &str, pair: &ScenePair<T>) -> Result<PairRecord> {
    let name = |suffix: &str| PathBuf::from(format!("{id}_{suffix}"));
    let rec = PairRecord {
        pair_id: id.to_string(),
        optical_path: name("optical.tfd"),
        thermal_hr_path: name("thermal_hr.tfd"),
        thermal_lr_path: name("thermal_lr.tfd"),
        mask_path: name("labels.png"),
        boundary_path: name("boundary.png"),
        degradation: DegradationRecord::from_spec(&pair.degradation),
        generation: Some(GenerationRecord::from_meta(&pair.meta)),
    };
    io::write_tfd(&dir.join(&rec.optical_path), &pair.optical)?;
    io::write_tfd(&dir.join(&rec.thermal_hr_path), &pair.thermal_hr)?;
    io::write_tfd(&dir.join(&rec.thermal_lr_path), &pair.thermal_lr)?;
    io::write_png_rgb8(&dir.join(name("optical.png")), &pair.optical)?;
    io::write_png_gray16(&dir.join(name("thermal_hr.png")), &pair.thermal_hr)?;
    io::write_png_gray16(&dir.join(name("thermal_lr.png")), &pair.thermal_lr)?;
    io::write_label_png(&dir.join(&rec.mask_path), &pair.masks)?;
    io::write_boundary_png(&dir.join(&rec.boundary_path), &pair.masks)?;
    Ok(rec)
}

/// Generates pairs for `seeds`, writes them and a `manifest.json` into `dir`.
pub fn simulate(dir: &Path, seeds: std::ops::Range<u64>, cfg: &PairConfig, panel_first: bool) -> Result<Manifest> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut records = Vec::new();
    for seed in seeds.clone() {
        let mut c = cfg.clone();
        c.material.with_panel |= panel_first && seed == seeds.start;
        let pair = generate_pair::<f64>(seed, &c)?;
        records.push(write_pair(dir, &format!("pair_{seed:04}"), &pair)?);
    }
    let m = Manifest::new(records);
    m.write(&dir.join("manifest.json"))?;
    Ok(m)
}

/// Re-degrades every HR thermal image of a manifest with `spec`. LR images go
/// to `out`; the new manifest there points at the original optical, HR and
/// mask files.
pub fn degrade_manifest(manifest: &Path, spec: &DegradationSpec, out: &Path) -> Result<Manifest> {
    let src = Manifest::read(manifest)?;
    let base = manifest.parent().unwrap_or(Path::new("."));
    let base = base.canonicalize().map_err(|e| Error::io(base, e))?;
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let mut records = Vec::new();
    for r in &src.records {
        let hr_path = resolve(&base, &r.thermal_hr_path);
        let hr = io::read_image::<f64>(&hr_path)?;
        let lr = degrade(&hr, spec).map_err(|e| Error::format(&hr_path, e))?;
        let lr_name = PathBuf::from(format!("{}_thermal_lr_{}x{}.tfd", r.pair_id, spec.kind.as_str(), spec.scale));
        io::write_tfd(&out.join(&lr_name), &lr)?;
        io::write_png_gray16(&out.join(lr_name.with_extension("png")), &lr)?;
        records.push(PairRecord {
            thermal_lr_path: lr_name,
            optical_path: resolve(&base, &r.optical_path),
            thermal_hr_path: hr_path,
            mask_path: resolve(&base, &r.mask_path),
            boundary_path: resolve(&base, &r.boundary_path),
            degradation: DegradationRecord::from_spec(spec),
            ..r.clone()
        });
    }
    let m = Manifest::new(records);
    m.write(&out.join("manifest.json"))?;
    let provenance = serde_json::to_string_pretty(&DegradationRecord::from_spec(spec)).expect("record serializes");
    io::write_text(&out.join("provenance.json"), &(provenance + "\n"))?;
    Ok(m)
}

/// Registered pairs held in memory, with their ids.
#[derive(Clone, Debug)]
pub struct Dataset<T> {
    pub ids: Vec<String>,
    pub pairs: Vec<ScenePair<T>>,
}

impl<T: Scalar> Dataset<T> {
    pub fn load(manifest: &Path) -> Result<Self> {
        let m = Manifest::read(manifest)?;
        let base = manifest.parent().unwrap_or(Path::new("."));
        let mut ids = Vec::new();
        let mut pairs = Vec::new();
        for r in &m.records {
            pairs.push(load_pair(base, r)?);
            ids.push(r.pair_id.clone());
        }
        if pairs.is_empty() {
            return Err(Error::format(manifest, "manifest has no records"));
        }
        Ok(Self { ids, pairs })
    }

    /// Scenes from seeds `0..n`, generated in 64-bit and cast.
    pub fn synthetic(data: &DataParams, spec: DegradationSpec) -> Result<Self> {
        let mut ids = Vec::new();
        let mut pairs = Vec::new();
        for seed in 0..data.synthetic as u64 {
            let mut c = PairConfig { size: data.size, steps: data.diffusion_steps, degradation: spec, ..PairConfig::default() };
            c.material.with_panel = data.panel && seed == 0;
            pairs.push(generate_pair::<f64>(seed, &c)?.cast());
            ids.push(format!("pair_{seed:04}"));
        }
        Ok(Self { ids, pairs })
    }

    /// The configured source: the manifest if named, else synthetic scenes
    /// degraded bicubically at the model scale.
    pub fn from_config(data: &DataParams, scale: usize) -> Result<Self> {
        let ds = match &data.manifest {
            Some(m) => Self::load(m)?,
            None if data.synthetic > 0 => Self::synthetic(data, DegradationSpec::bi(scale)?)?,
            None => {
                return Err(Error::Config {
                    line: 0,
                    key: "data".into(),
                    message: "set data.manifest or data.synthetic > 0".into(),
                })
            }
        };
        if let Some((id, p)) = ds.ids.iter().zip(&ds.pairs).find(|(_, p)| p.scale != scale) {
            return Err(Error::format(id, format!("pair is x{} but the model is x{scale}", p.scale)));
        }
        Ok(ds)
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}
