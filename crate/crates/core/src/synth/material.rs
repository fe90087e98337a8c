//! Procedural material layouts standing in for aerial scenes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Result};

/// Diffusivity range keeping explicit Euler stable at `dt = 1`.
pub const ALPHA_RANGE: (f64, f64) = (0.01, 0.24);

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Cell {
    pub albedo: [f64; 3],
    pub alpha: f64,
    pub emissivity: f64,
    /// Heat added per unit time.
    pub source: f64,
    /// Newtonian loss coefficient towards zero temperature.
    pub cooling: f64,
    /// Index of the primitive that owns the cell (`0` = background).
    pub region: u16,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ShapeKind {
    Rectangle,
    Disc,
    /// Rectangle whose albedo alternates in horizontal stripes while its
    /// diffusivity and emissivity stay uniform.
    Panel,
    /// Small, hot rectangle with a heat source.
    Vehicle,
}

/// Axis-aligned bounding box `(y0, x0, h, w)`.
pub type Rect = (usize, usize, usize, usize);

#[derive(Clone, Debug, PartialEq)]
pub struct Primitive {
    pub kind: ShapeKind,
    pub bounds: Rect,
    /// Stripe period in pixels (panels only).
    pub stripe_period: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MaterialParams {
    pub n_shapes: usize,
    pub kinds: Vec<ShapeKind>,
    /// Adds one large panel on top of the other primitives.
    pub with_panel: bool,
}

impl Default for MaterialParams {
    fn default() -> Self {
        Self {
            n_shapes: 14,
            kinds: vec![ShapeKind::Rectangle, ShapeKind::Disc, ShapeKind::Panel, ShapeKind::Vehicle],
            with_panel: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MaterialMap {
    height: usize,
    width: usize,
    cells: Vec<Cell>,
    pub primitives: Vec<Primitive>,
}

impl MaterialMap {
    pub fn uniform(height: usize, width: usize, cell: Cell) -> Self {
        Self { height, width, cells: vec![cell; height * width], primitives: Vec::new() }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn cells_mut(&mut self) -> &mut [Cell] {
        &mut self.cells
    }

    pub fn cell(&self, y: usize, x: usize) -> &Cell {
        &self.cells[y * self.width + x]
    }

    pub fn max_alpha(&self) -> f64 {
        self.cells.iter().map(|c| c.alpha).fold(0.0, f64::max)
    }

    /// The last-painted panel primitive, if any. A forced panel is painted
    /// last and is therefore never occluded.
    pub fn panel(&self) -> Option<&Primitive> {
        self.primitives.iter().rev().find(|p| p.kind == ShapeKind::Panel)
    }
}

fn rand_albedo(rng: &mut ChaCha8Rng) -> [f64; 3] {
    let base = rng.gen_range(0.15..0.85);
    [0, 1, 2].map(|_| (base + rng.gen_range(-0.12..0.12f64)).clamp(0.0, 1.0))
}

fn rand_material(rng: &mut ChaCha8Rng, region: u16) -> Cell {
    Cell {
        albedo: rand_albedo(rng),
        alpha: rng.gen_range(ALPHA_RANGE.0..=ALPHA_RANGE.1),
        emissivity: rng.gen_range(0.1..0.9),
        source: 0.0,
        cooling: 0.0,
        region,
    }
}

/// Deterministic layout: a background plus `n_shapes` overlapping primitives,
/// later primitives painted over earlier ones.
pub fn generate_material_map(seed: u64, size: usize, params: &MaterialParams) -> Result<MaterialMap> {
    if size < 64 {
        return invalid(format!("scene size must be >= 64, got {size}"));
    }
    if params.n_shapes > 0 && params.kinds.is_empty() {
        return invalid("no primitive kinds to draw from");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut map = MaterialMap::uniform(size, size, rand_material(&mut rng, 0));
    let mut kinds: Vec<ShapeKind> =
        (0..params.n_shapes).map(|_| params.kinds[rng.gen_range(0..params.kinds.len())]).collect();
    if params.with_panel {
        kinds.push(ShapeKind::Panel);
    }
    let forced = params.with_panel.then(|| kinds.len() - 1);
    for (i, kind) in kinds.into_iter().enumerate() {
        let region = (i + 1) as u16;
        let mut cell = rand_material(&mut rng, region);
        let (lo, hi) = match kind {
            ShapeKind::Vehicle => (6, 14),
            _ if forced == Some(i) => (size / 4, size / 3),
            _ => (12, size / 3),
        };
        let h = rng.gen_range(lo..=hi);
        let w = rng.gen_range(lo..=hi);
        let y0 = rng.gen_range(0..=size - h);
        let x0 = rng.gen_range(0..=size - w);
        let mut stripe_period = 0;
        let mut alt = cell.albedo;
        match kind {
            ShapeKind::Vehicle => {
                cell.emissivity = rng.gen_range(0.85..1.0);
                cell.source = rng.gen_range(0.002..0.01);
            }
            ShapeKind::Panel => {
                stripe_period = rng.gen_range(2..=4);
                alt = cell.albedo.map(|a| if a > 0.5 { a - 0.45 } else { a + 0.45 });
            }
            _ => {}
        }
        let (cy, cx) = (y0 as f64 + h as f64 / 2.0, x0 as f64 + w as f64 / 2.0);
        let (ry, rx) = (h as f64 / 2.0, w as f64 / 2.0);
        for y in y0..y0 + h {
            for x in x0..x0 + w {
                if kind == ShapeKind::Disc {
                    let dy = (y as f64 + 0.5 - cy) / ry;
                    let dx = (x as f64 + 0.5 - cx) / rx;
                    if dy * dy + dx * dx > 1.0 {
                        continue;
                    }
                }
                let mut c = cell;
                if kind == ShapeKind::Panel && ((y - y0) / stripe_period) % 2 == 1 {
                    c.albedo = alt;
                }
                map.cells[y * size + x] = c;
            }
        }
        map.primitives.push(Primitive { kind, bounds: (y0, x0, h, w), stripe_period });
    }
    Ok(map)
}
