use serde::{Deserialize, Serialize};

use super::Mesh;
use crate::{Error, Result};

/// Target edge length giving a mesh of the size used for the reference runs
/// (3808 nodes and 7290 triangles on the default specimen).
pub const PRODUCTION_EDGE: f64 = 0.45e-3;

/// Coarser edge length for quick runs (1232 nodes on the default specimen).
pub const DESK_EDGE: f64 = 0.8e-3;

/// Dog-bone tensile specimen: two grips joined to a straight gauge section by
/// circular fillets tangent to the gauge edges.
///
/// The specimen spans `x ∈ [0, total_length]` and is centered on `y = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpecimenParams {
    pub gauge_length: f64,
    pub gauge_width: f64,
    pub grip_width: f64,
    pub fillet_radius: f64,
    pub thickness: f64,
    pub total_length: f64,
}

impl Default for SpecimenParams {
    fn default() -> Self {
        Self {
            gauge_length: 30e-3,
            gauge_width: 12e-3,
            grip_width: 20e-3,
            fillet_radius: 10e-3,
            thickness: 5e-3,
            total_length: 60e-3,
        }
    }
}

impl SpecimenParams {
    pub fn validate(&self) -> Result<()> {
        let lengths = [
            ("gauge_length", self.gauge_length),
            ("gauge_width", self.gauge_width),
            ("grip_width", self.grip_width),
            ("fillet_radius", self.fillet_radius),
            ("thickness", self.thickness),
            ("total_length", self.total_length),
        ];
        for (name, v) in lengths {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if self.grip_width < self.gauge_width {
            return Err(Error::Config("grip_width must not be smaller than gauge_width".into()));
        }
        if self.shoulder() > self.fillet_radius {
            return Err(Error::Config(format!(
                "fillet radius {} cannot bridge the shoulder height {}",
                self.fillet_radius,
                self.shoulder()
            )));
        }
        if self.gauge_length + 2.0 * self.transition_length() >= self.total_length
            && self.shoulder() > 0.0
        {
            return Err(Error::Config(
                "fillet larger than the transition region between gauge and grips".into(),
            ));
        }
        if self.gauge_length > self.total_length {
            return Err(Error::Config("gauge longer than the specimen".into()));
        }
        Ok(())
    }

    /// Height of the step between gauge and grip edges.
    pub fn shoulder(&self) -> f64 {
        0.5 * (self.grip_width - self.gauge_width)
    }

    /// Axial length of each fillet.
    pub fn transition_length(&self) -> f64 {
        let r = self.fillet_radius;
        let s = self.shoulder();
        if s <= 0.0 {
            return 0.0;
        }
        (r * r - (r - s) * (r - s)).max(0.0).sqrt()
    }

    pub fn grip_length(&self) -> f64 {
        0.5 * (self.total_length - self.gauge_length) - self.transition_length()
    }

    /// x-coordinates of the outline breakpoints from left to right:
    /// grip end, fillet end, gauge end, gauge end, fillet end, grip end.
    pub fn breakpoints(&self) -> [f64; 6] {
        let g = self.grip_length();
        let t = self.transition_length();
        let l = self.total_length;
        [0.0, g, g + t, l - g - t, l - g, l]
    }

    /// Half-width of the outline at axial position `x`.
    pub fn half_width(&self, x: f64) -> f64 {
        let d = (x - 0.5 * self.total_length).abs();
        let half_gauge = 0.5 * self.gauge_length;
        let t = self.transition_length();
        if d <= half_gauge {
            0.5 * self.gauge_width
        } else if d <= half_gauge + t {
            let s = d - half_gauge;
            let r = self.fillet_radius;
            0.5 * self.gauge_width + r - (r * r - s * s).sqrt()
        } else {
            0.5 * self.grip_width
        }
    }

    /// Closed-form area of the outline.
    pub fn analytic_area(&self) -> f64 {
        let r = self.fillet_radius;
        let t = self.transition_length();
        let arc = |s: f64| 0.5 * s * (r * r - s * s).max(0.0).sqrt() + 0.5 * r * r * (s / r).min(1.0).asin();
        let fillet_half = (0.5 * self.gauge_width + r) * t - (arc(t) - arc(0.0));
        self.gauge_length * self.gauge_width
            + 2.0 * self.grip_length() * self.grip_width
            + 4.0 * fillet_half
    }
}

/// Builds a conforming mapped triangulation of the specimen outline.
///
/// Columns of nodes sit at axial stations spaced about `target_edge` apart
/// (with the outline breakpoints always included); each column spans the local
/// width with the same number of rows. Cells are split along alternating
/// diagonals so the mesh has no preferred diagonal direction.
pub fn build_specimen(params: &SpecimenParams, target_edge: f64) -> Result<Mesh> {
    params.validate()?;
    if !(target_edge > 0.0 && target_edge.is_finite()) {
        return Err(Error::Config(format!("target edge must be positive, got {target_edge}")));
    }
    let mut stations = vec![0.0];
    let bps = params.breakpoints();
    for w in bps.windows(2) {
        let len = w[1] - w[0];
        if len <= 1e-12 * params.total_length {
            continue;
        }
        let parts = (len / target_edge).ceil().max(1.0) as usize;
        for k in 1..=parts {
            stations.push(if k == parts { w[1] } else { w[0] + len * k as f64 / parts as f64 });
        }
    }
    let rows = ((params.gauge_width / target_edge).round() as usize).max(1);
    let ny = rows + 1;
    let nx = stations.len();
    if nx * ny > 2_000_000 {
        return Err(Error::Config("target edge too small: mesh would exceed 2M nodes".into()));
    }

    let mut nodes = Vec::with_capacity(nx * ny);
    for &x in &stations {
        let hw = params.half_width(x);
        for j in 0..ny {
            let eta = -1.0 + 2.0 * j as f64 / rows as f64;
            nodes.push([x, eta * hw]);
        }
    }
    let id = |i: usize, j: usize| i * ny + j;
    let mut elements = Vec::with_capacity(2 * (nx - 1) * rows);
    for i in 0..nx - 1 {
        for j in 0..rows {
            let (n00, n10, n01, n11) = (id(i, j), id(i + 1, j), id(i, j + 1), id(i + 1, j + 1));
            if (i + j) % 2 == 0 {
                elements.push([n00, n10, n11]);
                elements.push([n00, n11, n01]);
            } else {
                elements.push([n00, n10, n01]);
                elements.push([n10, n11, n01]);
            }
        }
    }
    let fixed = (0..ny).map(|j| id(0, j)).collect();
    let loaded = (0..ny).map(|j| id(nx - 1, j)).collect();
    Mesh::new(nodes, elements, fixed, loaded)
}
