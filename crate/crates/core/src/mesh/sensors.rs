use serde::{Deserialize, Serialize};

use super::{Mesh, SpecimenParams};
use crate::{Error, Result};

/// Ordered set of mesh nodes used as virtual sensors. The order defines the
/// feature-vector column order and is persisted with the data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorSet {
    pub node_ids: Vec<usize>,
    pub layout_descriptor: String,
    /// Named positions into `node_ids`, e.g. `mid_gauge` and `fillet`.
    #[serde(default)]
    pub landmarks: Vec<(String, usize)>,
}

impl SensorSet {
    pub fn len(&self) -> usize {
        self.node_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.node_ids.is_empty()
    }

    pub fn landmark(&self, name: &str) -> Option<usize> {
        self.landmarks.iter().find(|(n, _)| n == name).map(|&(_, i)| i)
    }
}

/// Sensor placement request: a list of points with optional named landmarks
/// (indices into `points`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub points: Vec<[f64; 2]>,
    pub descriptor: String,
    #[serde(default)]
    pub landmarks: Vec<(String, usize)>,
}

impl GridSpec {
    pub fn single(point: [f64; 2]) -> Self {
        Self { points: vec![point], descriptor: "single point".into(), landmarks: Vec::new() }
    }

    /// Default layout: 29 axial stations by 5 rows spanning the local width.
    /// Stations are twice as dense around the fillets as elsewhere.
    pub fn coarse_to_fine(params: &SpecimenParams) -> Self {
        Self::coarse_to_fine_sized(params, 29, 5)
    }

    pub fn coarse_to_fine_sized(params: &SpecimenParams, stations: usize, rows: usize) -> Self {
        let stations = stations.max(1);
        let rows = rows.max(1);
        let l = params.total_length;
        let [_, g, gt, tg, tg2, _] = params.breakpoints();
        let margin = 0.5 * params.transition_length();
        let inset = 0.03 * l;

        // piecewise-constant density: 2 around the fillets, 1 elsewhere
        let mut cuts = vec![inset, g - margin, gt + margin, tg - margin, tg2 + margin, l - inset];
        for c in cuts.iter_mut() {
            *c = c.clamp(inset, l - inset);
        }
        let density = [1.0, 2.0, 1.0, 2.0, 1.0];
        let mass: Vec<f64> = (0..5).map(|s| density[s] * (cuts[s + 1] - cuts[s]).max(0.0)).collect();
        let total: f64 = mass.iter().sum();

        let mut xs = Vec::with_capacity(stations);
        for k in 0..stations {
            let target = if stations == 1 { 0.5 * total } else { total * k as f64 / (stations - 1) as f64 };
            let mut acc = 0.0;
            let mut x = l - inset;
            for s in 0..5 {
                if acc + mass[s] >= target && mass[s] > 0.0 {
                    x = cuts[s] + (target - acc) / density[s];
                    break;
                }
                acc += mass[s];
            }
            xs.push(x);
        }
        if stations % 2 == 1 {
            xs[stations / 2] = 0.5 * l;
        }

        let eta: Vec<f64> = (0..rows)
            .map(|j| if rows == 1 { 0.0 } else { -0.8 + 1.6 * j as f64 / (rows - 1) as f64 })
            .collect();
        let mut points = Vec::with_capacity(stations * rows);
        for &x in &xs {
            let hw = params.half_width(x);
            for &e in &eta {
                points.push([x, e * hw]);
            }
        }

        let mid_station = stations / 2;
        let fillet_station = (0..stations)
            .min_by(|&a, &b| (xs[a] - gt).abs().total_cmp(&(xs[b] - gt).abs()))
            .unwrap_or(0);
        let landmarks = vec![
            ("mid_gauge".to_string(), mid_station * rows + rows / 2),
            ("fillet".to_string(), fillet_station * rows + rows - 1),
        ];
        Self {
            points,
            descriptor: format!("coarse-to-fine {stations}x{rows}, doubled station density at fillets"),
            landmarks,
        }
    }
}

/// Snaps every grid point to its nearest mesh node (lowest index on ties),
/// dropping repeated nodes while keeping grid order.
pub fn select_sensors(mesh: &Mesh, grid: &GridSpec) -> Result<SensorSet> {
    let bb = mesh.bounding_box();
    let tol = 1e-9 * (bb[2] - bb[0]).max(bb[3] - bb[1]);
    let mut node_ids: Vec<usize> = Vec::with_capacity(grid.points.len());
    let mut point_to_pos = Vec::with_capacity(grid.points.len());
    for (k, p) in grid.points.iter().enumerate() {
        if p[0] < bb[0] - tol || p[0] > bb[2] + tol || p[1] < bb[1] - tol || p[1] > bb[3] + tol {
            return Err(Error::Config(format!("grid point {k} ({}, {}) outside the specimen", p[0], p[1])));
        }
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, q) in mesh.nodes.iter().enumerate() {
            let d = (q[0] - p[0]).powi(2) + (q[1] - p[1]).powi(2);
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        match node_ids.iter().position(|&n| n == best) {
            Some(pos) => point_to_pos.push(pos),
            None => {
                point_to_pos.push(node_ids.len());
                node_ids.push(best);
            }
        }
    }
    if node_ids.is_empty() {
        return Err(Error::Config("sensor grid selected no nodes".into()));
    }
    let landmarks = grid
        .landmarks
        .iter()
        .filter(|(_, k)| *k < point_to_pos.len())
        .map(|(name, k)| (name.clone(), point_to_pos[*k]))
        .collect();
    Ok(SensorSet { node_ids, layout_descriptor: grid.descriptor.clone(), landmarks })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_specimen, DESK_EDGE};

    fn mesh() -> (SpecimenParams, Mesh) {
        let p = SpecimenParams::default();
        (p, build_specimen(&p, DESK_EDGE).unwrap())
    }

    #[test]
    fn single_center_point() {
        let (p, mesh) = mesh();
        let c = [0.5 * p.total_length, 0.0];
        let s = select_sensors(&mesh, &GridSpec::single(c)).unwrap();
        assert_eq!(s.len(), 1);
        let d = |i: usize| (mesh.nodes[i][0] - c[0]).hypot(mesh.nodes[i][1] - c[1]);
        let nearest = (0..mesh.n_nodes()).map(d).fold(f64::INFINITY, f64::min);
        assert_eq!(d(s.node_ids[0]), nearest);
    }

    #[test]
    fn duplicate_points_collapse() {
        let (_, mesh) = mesh();
        let grid = GridSpec {
            points: vec![[0.03, 0.001], [0.03, 0.001]],
            descriptor: "dup".into(),
            landmarks: vec![],
        };
        assert_eq!(select_sensors(&mesh, &grid).unwrap().len(), 1);
    }

    #[test]
    fn outside_point_rejected() {
        let (_, mesh) = mesh();
        assert!(select_sensors(&mesh, &GridSpec::single([0.5, 0.0])).is_err());
        let empty = GridSpec { points: vec![], descriptor: String::new(), landmarks: vec![] };
        assert!(select_sensors(&mesh, &empty).is_err());
    }

    #[test]
    fn default_layout_has_mid_gauge_and_fillet_sensors() {
        let (p, mesh) = mesh();
        let grid = GridSpec::coarse_to_fine(&p);
        assert_eq!(grid.points.len(), 145);
        let s = select_sensors(&mesh, &grid).unwrap();
        assert!(s.len() > 100, "{} sensors", s.len());
        let mid = mesh.nodes[s.node_ids[s.landmark("mid_gauge").unwrap()]];
        assert!((mid[0] - 0.5 * p.total_length).abs() <= DESK_EDGE && mid[1].abs() <= DESK_EDGE);
        let fil = mesh.nodes[s.node_ids[s.landmark("fillet").unwrap()]];
        let [_, _, gt, ..] = p.breakpoints();
        assert!((fil[0] - gt).abs() < 0.2 * p.transition_length() + DESK_EDGE, "fillet sensor at {fil:?}");
        assert!(fil[1] > 0.5 * p.gauge_width * 0.5);
        // deterministic
        assert_eq!(s, select_sensors(&mesh, &grid).unwrap());
    }

    #[test]
    fn stations_denser_near_fillets() {
        let p = SpecimenParams::default();
        let grid = GridSpec::coarse_to_fine(&p);
        let xs: Vec<f64> = grid.points.iter().step_by(5).map(|q| q[0]).collect();
        let gaps: Vec<f64> = xs.windows(2).map(|w| w[1] - w[0]).collect();
        let max_gap = gaps.iter().cloned().fold(0.0, f64::max);
        let min_gap = gaps.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(max_gap / min_gap > 1.8);
        assert!(xs.windows(2).all(|w| w[1] > w[0]));
    }
}
