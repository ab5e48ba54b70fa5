//! Plain-text mesh format:
//!
//! ```text
//! NODES
//! <id> <x> <y>
//! ELEMENTS
//! <id> <n1> <n2> <n3>
//! SET <name>
//! <node id> ...
//! FIELD <name>
//! <node id> <value>
//! ```
//!
//! Whitespace-delimited, `#` starts a comment. Node ids are arbitrary
//! integers; they are mapped to indices in order of appearance. Sets named
//! `fixed` and `loaded` become the boundary sets; when absent, the nodes at
//! the minimum and maximum x are used.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use super::Mesh;
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct MeshText {
    pub mesh: Mesh,
    /// Node ids as written in the file, by index.
    pub node_ids: Vec<i64>,
    pub sets: BTreeMap<String, Vec<usize>>,
    pub fields: BTreeMap<String, Vec<f64>>,
}

enum Section {
    None,
    Nodes,
    Elements,
    Set(String),
    Field(String),
}

pub fn parse_mesh_text(text: &str) -> Result<MeshText> {
    let mut section = Section::None;
    let mut nodes = Vec::new();
    let mut node_ids = Vec::new();
    let mut index: HashMap<i64, usize> = HashMap::new();
    let mut raw_elements: Vec<(usize, [i64; 3])> = Vec::new();
    let mut raw_sets: BTreeMap<String, Vec<(usize, i64)>> = BTreeMap::new();
    let mut raw_fields: BTreeMap<String, Vec<(usize, i64, f64)>> = BTreeMap::new();

    for (lineno, line) in text.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut tok = line.split_whitespace();
        let head = tok.next().unwrap_or_default();
        match head {
            "NODES" => {
                section = Section::Nodes;
                continue;
            }
            "ELEMENTS" => {
                section = Section::Elements;
                continue;
            }
            "SET" | "FIELD" => {
                let name = tok
                    .next()
                    .ok_or_else(|| Error::Data(format!("line {lineno}: {head} without a name")))?
                    .to_string();
                section = if head == "SET" {
                    raw_sets.entry(name.clone()).or_default();
                    Section::Set(name)
                } else {
                    raw_fields.entry(name.clone()).or_default();
                    Section::Field(name)
                };
                continue;
            }
            _ => {}
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let int = |s: &str| -> Result<i64> {
            s.parse().map_err(|_| Error::Data(format!("line {lineno}: bad integer '{s}'")))
        };
        let float = |s: &str| -> Result<f64> {
            s.parse().map_err(|_| Error::Data(format!("line {lineno}: bad number '{s}'")))
        };
        match &section {
            Section::None => return Err(Error::Data(format!("line {lineno}: data before any section"))),
            Section::Nodes => {
                if fields.len() != 3 {
                    return Err(Error::Data(format!("line {lineno}: expected 'id x y'")));
                }
                let id = int(fields[0])?;
                if index.insert(id, nodes.len()).is_some() {
                    return Err(Error::Data(format!("line {lineno}: duplicate node id {id}")));
                }
                node_ids.push(id);
                nodes.push([float(fields[1])?, float(fields[2])?]);
            }
            Section::Elements => {
                if fields.len() != 4 {
                    return Err(Error::Data(format!("line {lineno}: expected 'id n1 n2 n3'")));
                }
                raw_elements.push((lineno, [int(fields[1])?, int(fields[2])?, int(fields[3])?]));
            }
            Section::Set(name) => {
                let set = raw_sets.get_mut(name).expect("set registered");
                for f in fields {
                    set.push((lineno, int(f)?));
                }
            }
            Section::Field(name) => {
                if fields.len() != 2 {
                    return Err(Error::Data(format!("line {lineno}: expected 'id value'")));
                }
                let entry = (lineno, int(fields[0])?, float(fields[1])?);
                raw_fields.get_mut(name).expect("field registered").push(entry);
            }
        }
    }

    let lookup = |lineno: usize, id: i64| -> Result<usize> {
        index
            .get(&id)
            .copied()
            .ok_or_else(|| Error::Data(format!("line {lineno}: unknown node id {id}")))
    };
    let elements = raw_elements
        .iter()
        .map(|(l, ids)| Ok([lookup(*l, ids[0])?, lookup(*l, ids[1])?, lookup(*l, ids[2])?]))
        .collect::<Result<Vec<_>>>()?;
    let mut sets = BTreeMap::new();
    for (name, entries) in raw_sets {
        let ids = entries.iter().map(|&(l, id)| lookup(l, id)).collect::<Result<Vec<_>>>()?;
        sets.insert(name, ids);
    }
    let mut fields = BTreeMap::new();
    for (name, entries) in raw_fields {
        let mut values = vec![f64::NAN; nodes.len()];
        for (l, id, v) in entries {
            values[lookup(l, id)?] = v;
        }
        fields.insert(name, values);
    }
    if nodes.is_empty() || elements.is_empty() {
        return Err(Error::Data("mesh text has no nodes or no elements".into()));
    }
    let (fixed, loaded) = match (sets.get("fixed"), sets.get("loaded")) {
        (Some(f), Some(l)) => (f.clone(), l.clone()),
        _ => {
            let bb_len = nodes.iter().map(|p| p[0]).fold(f64::NEG_INFINITY, f64::max)
                - nodes.iter().map(|p| p[0]).fold(f64::INFINITY, f64::min);
            Mesh::tag_ends_by_x(&nodes, 1e-9 * bb_len.max(1e-300))
        }
    };
    let mesh = Mesh::new(nodes, elements, fixed, loaded).map_err(|e| Error::Data(e.to_string()))?;
    Ok(MeshText { mesh, node_ids, sets, fields })
}

/// Writes `mesh` (node id = index) with its boundary sets, any extra sets and
/// per-node fields.
pub fn write_mesh_text(mesh: &Mesh, sets: &[(&str, &[usize])], fields: &[(&str, &[f64])]) -> String {
    let mut out = String::with_capacity(64 * mesh.n_nodes());
    out.push_str("NODES\n");
    for (i, p) in mesh.nodes.iter().enumerate() {
        let _ = writeln!(out, "{i} {} {}", p[0], p[1]);
    }
    out.push_str("ELEMENTS\n");
    for (k, el) in mesh.elements.iter().enumerate() {
        let _ = writeln!(out, "{k} {} {} {}", el[0], el[1], el[2]);
    }
    let base: [(&str, &[usize]); 2] = [("fixed", &mesh.fixed_set), ("loaded", &mesh.loaded_set)];
    for (name, ids) in base.iter().chain(sets.iter()) {
        let _ = writeln!(out, "SET {name}");
        for chunk in ids.chunks(16) {
            let line: Vec<String> = chunk.iter().map(|v| v.to_string()).collect();
            let _ = writeln!(out, "{}", line.join(" "));
        }
    }
    for (name, values) in fields {
        let _ = writeln!(out, "FIELD {name}");
        for (i, v) in values.iter().enumerate() {
            let _ = writeln!(out, "{i} {v}");
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_specimen, SpecimenParams};

    #[test]
    fn round_trip_with_field() {
        let mesh = build_specimen(&SpecimenParams::default(), 4e-3).unwrap();
        let phi: Vec<f64> = (0..mesh.n_nodes()).map(|i| i as f64 / 7.0).collect();
        let text = write_mesh_text(&mesh, &[("sensors", &[3, 5])], &[("phi", &phi)]);
        let back = parse_mesh_text(&text).unwrap();
        assert_eq!(back.mesh, mesh);
        assert_eq!(back.fields["phi"], phi);
        assert_eq!(back.sets["sensors"], vec![3, 5]);
    }

    #[test]
    fn arbitrary_ids_and_default_sets() {
        let text = "# unit square\nNODES\n10 0 0\n20 1 0\n30 1 1\n40 0 1\nELEMENTS\n1 10 20 30\n2 10 30 40\n";
        let m = parse_mesh_text(text).unwrap();
        assert_eq!(m.node_ids, vec![10, 20, 30, 40]);
        assert_eq!(m.mesh.fixed_set, vec![0, 3]);
        assert_eq!(m.mesh.loaded_set, vec![1, 2]);
    }

    #[test]
    fn malformed_input() {
        assert!(parse_mesh_text("NODES\n1 0\n").is_err());
        assert!(parse_mesh_text("1 0 0\n").is_err());
        assert!(parse_mesh_text("NODES\n1 0 0\n2 1 0\n3 0 1\nELEMENTS\n1 1 2 9\n").is_err());
        assert!(parse_mesh_text("").is_err());
    }
}
