use std::collections::{BTreeSet, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{from_json, read_text, write_file, DatasetError};
use crate::grid::{Cell, GridFrame, TriangleMesh};
use crate::nav::NavGraph;
use crate::topo::{DoorRecord, Observation};

/// Doors file: a JSON array of door records with unique ids.
pub fn parse_doors(text: &str) -> Result<Vec<DoorRecord>, DatasetError> {
    let doors: Vec<DoorRecord> = from_json(text)?;
    let mut seen = HashSet::new();
    for (k, d) in doors.iter().enumerate() {
        if !seen.insert(d.door_id.as_str()) {
            return Err(DatasetError::Schema {
                path: format!("[{k}].door_id"),
                msg: format!("duplicate door id {:?}", d.door_id),
            });
        }
        d.validate().map_err(|e| DatasetError::Schema { path: format!("[{k}]"), msg: e.to_string() })?;
    }
    Ok(doors)
}

pub fn load_doors(path: &Path) -> Result<Vec<DoorRecord>, DatasetError> {
    parse_doors(&read_text(path)?)
}

/// One observation record per non-blank line.
pub fn parse_observations(text: &str) -> Result<Vec<Observation>, DatasetError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(n, l)| {
            from_json::<Observation>(l).map_err(|e| match e {
                DatasetError::Schema { path, msg } => DatasetError::Schema { path: format!("line {}: {path}", n + 1), msg },
                other => other,
            })
        })
        .collect()
}

pub fn load_observations(path: &Path) -> Result<Vec<Observation>, DatasetError> {
    parse_observations(&read_text(path)?)
}

pub fn write_observations(observations: &[Observation]) -> String {
    observations
        .iter()
        .map(|o| serde_json::to_string(o).expect("observation serializes") + "\n")
        .collect()
}

/// On-disk navigation graph: grid placement plus `[row, col]` cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NavGraphFile {
    pub width: usize,
    pub height: usize,
    pub resolution: f64,
    pub origin: [f64; 2],
    pub cells: Vec<[usize; 2]>,
}

pub fn nav_graph_to_json(g: &NavGraph) -> String {
    let f = NavGraphFile {
        width: g.frame.width,
        height: g.frame.height,
        resolution: g.frame.resolution,
        origin: [g.frame.origin_x, g.frame.origin_y],
        cells: g.cells.iter().map(|c| [c.row, c.col]).collect(),
    };
    serde_json::to_string(&f).expect("graph serializes") + "\n"
}

pub fn nav_graph_from_json(text: &str) -> Result<NavGraph, DatasetError> {
    let f: NavGraphFile = from_json(text)?;
    let frame = GridFrame::new(f.width, f.height, f.resolution, f.origin[0], f.origin[1])
        .map_err(|e| DatasetError::Invalid(e.to_string()))?;
    let mut cells = BTreeSet::new();
    for (k, &[row, col]) in f.cells.iter().enumerate() {
        let cell = Cell { row, col };
        if !frame.contains(cell) {
            return Err(DatasetError::Schema {
                path: format!("cells[{k}]"),
                msg: format!("cell {cell} outside the {}x{} grid", f.width, f.height),
            });
        }
        cells.insert(cell);
    }
    Ok(NavGraph::new(frame, cells))
}

pub fn load_nav_graph(path: &Path) -> Result<NavGraph, DatasetError> {
    nav_graph_from_json(&read_text(path)?)
}

pub fn save_nav_graph(path: &Path, g: &NavGraph) -> Result<(), DatasetError> {
    write_file(path, nav_graph_to_json(g).as_bytes())
}

/// Loads every model of a Wavefront OBJ file into one triangle mesh (z up).
pub fn load_mesh_obj(path: &Path) -> Result<TriangleMesh, DatasetError> {
    let opts = tobj::LoadOptions { triangulate: true, single_index: true, ignore_points: true, ignore_lines: true, ..Default::default() };
    let (models, _) =
        tobj::load_obj(path, &opts).map_err(|e| DatasetError::Mesh(format!("{}: {e}", path.display())))?;
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    for m in models {
        let base = vertices.len();
        vertices.extend(
            m.mesh
                .positions
                .chunks_exact(3)
                .map(|p| [f64::from(p[0]), f64::from(p[1]), f64::from(p[2])]),
        );
        triangles.extend(
            m.mesh
                .indices
                .chunks_exact(3)
                .map(|t| [base + t[0] as usize, base + t[1] as usize, base + t[2] as usize]),
        );
    }
    TriangleMesh::new(vertices, triangles).map_err(|e| DatasetError::Mesh(e.to_string()))
}
