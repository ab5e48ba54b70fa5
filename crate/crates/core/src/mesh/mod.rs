//! Specimen geometry, triangle meshes and virtual sensor layouts.

mod format;
mod sensors;
mod specimen;

pub use format::{parse_mesh_text, write_mesh_text, MeshText};
pub use sensors::{select_sensors, GridSpec, SensorSet};
pub use specimen::{build_specimen, SpecimenParams, DESK_EDGE, PRODUCTION_EDGE};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Two-dimensional linear-triangle mesh with tagged boundary node sets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mesh {
    pub nodes: Vec<[f64; 2]>,
    /// Counter-clockwise node triples.
    pub elements: Vec<[usize; 3]>,
    /// Nodes of the clamped end.
    pub fixed_set: Vec<usize>,
    /// Nodes of the end carrying the prescribed displacement.
    pub loaded_set: Vec<usize>,
    pub min_edge: f64,
}

impl Mesh {
    /// Validates the connectivity and orients every element counter-clockwise.
    pub fn new(
        nodes: Vec<[f64; 2]>,
        mut elements: Vec<[usize; 3]>,
        mut fixed_set: Vec<usize>,
        mut loaded_set: Vec<usize>,
    ) -> Result<Self> {
        let n = nodes.len();
        let mut used = vec![false; n];
        for (k, el) in elements.iter_mut().enumerate() {
            for &v in el.iter() {
                if v >= n {
                    return Err(Error::Config(format!("element {k} references missing node {v}")));
                }
                used[v] = true;
            }
            let area = signed_area(&nodes, el);
            if area == 0.0 || !area.is_finite() {
                return Err(Error::Config(format!("element {k} is degenerate")));
            }
            if area < 0.0 {
                el.swap(1, 2);
            }
        }
        if let Some(orphan) = used.iter().position(|u| !u) {
            return Err(Error::Config(format!("node {orphan} belongs to no element")));
        }
        fixed_set.sort_unstable();
        fixed_set.dedup();
        loaded_set.sort_unstable();
        loaded_set.dedup();
        if fixed_set.is_empty() || loaded_set.is_empty() {
            return Err(Error::Config("fixed and loaded node sets must be non-empty".into()));
        }
        if fixed_set.iter().chain(&loaded_set).any(|&v| v >= n) {
            return Err(Error::Config("boundary set references a missing node".into()));
        }
        if fixed_set.iter().any(|v| loaded_set.binary_search(v).is_ok()) {
            return Err(Error::Config("fixed and loaded node sets overlap".into()));
        }
        let min_edge = elements
            .iter()
            .flat_map(|el| {
                let nodes = &nodes;
                (0..3).map(move |i| dist(nodes[el[i]], nodes[el[(i + 1) % 3]]))
            })
            .fold(f64::INFINITY, f64::min);
        Ok(Self { nodes, elements, fixed_set, loaded_set, min_edge })
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn element_area(&self, k: usize) -> f64 {
        signed_area(&self.nodes, &self.elements[k])
    }

    pub fn total_area(&self) -> f64 {
        (0..self.n_elements()).map(|k| self.element_area(k)).sum()
    }

    /// Axis-aligned bounding box `[xmin, ymin, xmax, ymax]`.
    pub fn bounding_box(&self) -> [f64; 4] {
        let mut bb = [f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY];
        for p in &self.nodes {
            bb[0] = bb[0].min(p[0]);
            bb[1] = bb[1].min(p[1]);
            bb[2] = bb[2].max(p[0]);
            bb[3] = bb[3].max(p[1]);
        }
        bb
    }

    /// Nodes on edges that belong to exactly one element.
    pub fn boundary_nodes(&self) -> Vec<usize> {
        let mut edges: Vec<(usize, usize)> = self
            .elements
            .iter()
            .flat_map(|el| (0..3).map(move |i| {
                let (a, b) = (el[i], el[(i + 1) % 3]);
                (a.min(b), a.max(b))
            }))
            .collect();
        edges.sort_unstable();
        let mut out = Vec::new();
        let mut i = 0;
        while i < edges.len() {
            let mut j = i + 1;
            while j < edges.len() && edges[j] == edges[i] {
                j += 1;
            }
            if j - i == 1 {
                out.push(edges[i].0);
                out.push(edges[i].1);
            }
            i = j;
        }
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Tags the nodes at the minimum and maximum x as fixed and loaded ends.
    pub fn tag_ends_by_x(nodes: &[[f64; 2]], tol: f64) -> (Vec<usize>, Vec<usize>) {
        let xmin = nodes.iter().map(|p| p[0]).fold(f64::INFINITY, f64::min);
        let xmax = nodes.iter().map(|p| p[0]).fold(f64::NEG_INFINITY, f64::max);
        let fixed = (0..nodes.len()).filter(|&i| nodes[i][0] <= xmin + tol).collect();
        let loaded = (0..nodes.len()).filter(|&i| nodes[i][0] >= xmax - tol).collect();
        (fixed, loaded)
    }
}

fn signed_area(nodes: &[[f64; 2]], el: &[usize; 3]) -> f64 {
    let [a, b, c] = [nodes[el[0]], nodes[el[1]], nodes[el[2]]];
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square() -> (Vec<[f64; 2]>, Vec<[usize; 3]>) {
        (vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]], vec![[0, 1, 2], [0, 2, 3]])
    }

    #[test]
    fn reorients_clockwise_elements() {
        let (nodes, _) = square();
        let mesh = Mesh::new(nodes, vec![[0, 2, 1], [0, 2, 3]], vec![0, 3], vec![1, 2]).unwrap();
        assert!((0..2).all(|k| mesh.element_area(k) > 0.0));
        assert_eq!(mesh.total_area(), 1.0);
        assert_eq!(mesh.min_edge, 1.0);
    }

    #[test]
    fn rejects_bad_connectivity() {
        let (nodes, els) = square();
        assert!(Mesh::new(nodes.clone(), vec![[0, 1, 7]], vec![0], vec![1]).is_err());
        assert!(Mesh::new(nodes.clone(), els.clone(), vec![0, 1], vec![1, 2]).is_err());
        assert!(Mesh::new(nodes.clone(), els.clone(), vec![], vec![1]).is_err());
        assert!(Mesh::new(nodes.clone(), vec![[0, 1, 2]], vec![0], vec![1]).is_err(), "orphan node 3");
        let mut flat = nodes;
        flat[2] = [2.0, 0.0];
        assert!(Mesh::new(flat, vec![[0, 1, 2], [0, 2, 3]], vec![0], vec![1]).is_err());
    }

    #[test]
    fn boundary_of_square() {
        let (nodes, els) = square();
        let mesh = Mesh::new(nodes, els, vec![0, 3], vec![1, 2]).unwrap();
        assert_eq!(mesh.boundary_nodes(), vec![0, 1, 2, 3]);
    }
}
