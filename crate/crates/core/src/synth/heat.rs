//! Explicit-Euler heat conduction on the unit grid.

use crate::error::{Error, Result};

use super::material::MaterialMap;

/// Largest `max(alpha) * dt` for which the update is a convex combination.
pub const STABILITY_LIMIT: f64 = 0.25;

#[derive(Clone, Debug, PartialEq)]
pub struct HeatField {
    pub height: usize,
    pub width: usize,
    pub u: Vec<f64>,
    pub time: usize,
}

impl HeatField {
    pub fn new(height: usize, width: usize, u: Vec<f64>) -> Self {
        assert_eq!(u.len(), height * width, "heat field size mismatch");
        Self { height, width, u, time: 0 }
    }

    pub fn total(&self) -> f64 {
        self.u.iter().sum()
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.u.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)))
    }

    /// Sum of absolute forward differences in both directions.
    pub fn total_variation(&self) -> f64 {
        let (h, w) = (self.height, self.width);
        let mut tv = 0.0;
        for y in 0..h {
            for x in 0..w {
                let v = self.u[y * w + x];
                if x + 1 < w {
                    tv += (self.u[y * w + x + 1] - v).abs();
                }
                if y + 1 < h {
                    tv += (self.u[(y + 1) * w + x] - v).abs();
                }
            }
        }
        tv
    }
}

/// One step of `u' = u + dt (div(alpha grad u) + source - cooling u)`.
///
/// The divergence uses face diffusivities equal to the mean of the two
/// adjacent cells, so it reduces to `alpha * lap(u)` where alpha is uniform
/// and conserves the total exactly. Missing faces at the border carry no
/// flux (insulated).
pub fn heat_step(field: &HeatField, mat: &MaterialMap, dt: f64) -> Result<HeatField> {
    let (h, w) = (field.height, field.width);
    if (mat.height(), mat.width()) != (h, w) {
        return Err(Error::InvalidInput(format!(
            "material {}x{} does not match field {h}x{w}",
            mat.height(),
            mat.width()
        )));
    }
    if mat.max_alpha() * dt > STABILITY_LIMIT {
        return Err(Error::Config(format!(
            "unstable step: max alpha {} * dt {} exceeds {STABILITY_LIMIT}",
            mat.max_alpha(),
            dt
        )));
    }
    let cells = mat.cells();
    let u = &field.u;
    let mut next = u.clone();
    // each interior face once; flux moves heat from hot to cold
    for y in 0..h {
        for x in 0..w {
            let p = y * w + x;
            let mut exchange = |q: usize| {
                let a = 0.5 * (cells[p].alpha + cells[q].alpha);
                let f = dt * a * (u[q] - u[p]);
                next[p] += f;
                next[q] -= f;
            };
            if x + 1 < w {
                exchange(p + 1);
            }
            if y + 1 < h {
                exchange(p + w);
            }
        }
    }
    for (n, (c, &v)) in next.iter_mut().zip(cells.iter().zip(u)) {
        *n += dt * (c.source - c.cooling * v);
    }
    Ok(HeatField { height: h, width: w, u: next, time: field.time + 1 })
}
