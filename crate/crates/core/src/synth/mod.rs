//! Synthetic registered scene pairs from simulated heat conduction.

mod heat;
mod material;
mod pair;

pub use heat::{heat_step, HeatField, STABILITY_LIMIT};
pub use material::{generate_material_map, Cell, MaterialMap, MaterialParams, Primitive, Rect, ShapeKind, ALPHA_RANGE};
pub use pair::{generate_pair, simulate_field, stripe_amplitude, PairConfig, PairMeta, ScenePair};
