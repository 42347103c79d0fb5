use std::collections::HashSet;

use rayon::prelude::*;

use super::{CellState, GeometryError, GridFrame, GridMap};

/// Triangle soup in world coordinates (meters, z up).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TriangleMesh {
    pub vertices: Vec<[f64; 3]>,
    pub triangles: Vec<[usize; 3]>,
}

impl TriangleMesh {
    pub fn new(vertices: Vec<[f64; 3]>, triangles: Vec<[usize; 3]>) -> Result<Self, GeometryError> {
        if let Some(t) = triangles.iter().find(|t| t.iter().any(|&i| i >= vertices.len())) {
            return Err(GeometryError::InvalidGeometry(format!(
                "triangle {t:?} references a missing vertex ({} vertices)",
                vertices.len()
            )));
        }
        Ok(Self { vertices, triangles })
    }

    /// Appends an axis-aligned box (12 triangles).
    pub fn push_box(&mut self, min: [f64; 3], max: [f64; 3]) {
        let base = self.vertices.len();
        for i in 0..8 {
            self.vertices.push([
                if i & 1 == 0 { min[0] } else { max[0] },
                if i & 2 == 0 { min[1] } else { max[1] },
                if i & 4 == 0 { min[2] } else { max[2] },
            ]);
        }
        const FACES: [[usize; 4]; 6] = [
            [0, 1, 3, 2],
            [4, 5, 7, 6],
            [0, 1, 5, 4],
            [2, 3, 7, 6],
            [0, 2, 6, 4],
            [1, 3, 7, 5],
        ];
        for f in FACES {
            self.triangles.push([base + f[0], base + f[1], base + f[2]]);
            self.triangles.push([base + f[0], base + f[2], base + f[3]]);
        }
    }
}

/// Cutting-plane schedule and output resolution for [`slice_mesh_to_map`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SliceConfig {
    pub resolution: f64,
    pub z_start: f64,
    pub z_step: f64,
    pub z_end: f64,
}

impl Default for SliceConfig {
    fn default() -> Self {
        Self {
            resolution: 0.05,
            z_start: 0.05,
            z_step: 0.1,
            z_end: 0.7,
        }
    }
}

impl SliceConfig {
    pub fn plane_heights(&self) -> Vec<f64> {
        let mut out = Vec::new();
        let mut k = 0usize;
        loop {
            let z = self.z_start + k as f64 * self.z_step;
            if z > self.z_end + 1e-9 {
                break;
            }
            out.push(z);
            k += 1;
        }
        out
    }
}

/// Intersection of one triangle with the plane `z = h`, as a point list:
/// empty, a single touching point, a segment, or (coplanar) the three corners.
fn cut_triangle(p: [[f64; 3]; 3], h: f64) -> Vec<(f64, f64)> {
    let d = [p[0][2] - h, p[1][2] - h, p[2][2] - h];
    let mut pts = Vec::with_capacity(3);
    for i in 0..3 {
        if d[i] == 0.0 {
            pts.push((p[i][0], p[i][1]));
        }
    }
    for (i, j) in [(0, 1), (1, 2), (2, 0)] {
        if (d[i] < 0.0 && d[j] > 0.0) || (d[i] > 0.0 && d[j] < 0.0) {
            let t = d[i] / (d[i] - d[j]);
            pts.push((
                p[i][0] + t * (p[j][0] - p[i][0]),
                p[i][1] + t * (p[j][1] - p[i][1]),
            ));
        }
    }
    pts
}

/// Projects the obstacles met by a stack of horizontal cutting planes onto a
/// 2D grid. Every triangle/plane intersection segment is rasterized with
/// [`super::supercover`]; everything else is free.
///
/// The grid spans the cells touched by the mesh's XY bounding rectangle plus
/// one cell of padding on every side.
pub fn slice_mesh_to_map(mesh: &TriangleMesh, cfg: &SliceConfig) -> Result<GridMap, GeometryError> {
    if mesh.vertices.is_empty() || mesh.triangles.is_empty() {
        return Err(GeometryError::EmptyMesh);
    }
    if mesh.vertices.iter().flatten().any(|v| !v.is_finite()) {
        return Err(GeometryError::InvalidGeometry("non-finite vertex coordinate".into()));
    }
    if !(cfg.resolution.is_finite() && cfg.resolution > 0.0) {
        return Err(GeometryError::InvalidGeometry("resolution must be positive".into()));
    }
    if !(cfg.z_step.is_finite() && cfg.z_step > 0.0) || !(cfg.z_start <= cfg.z_end) {
        return Err(GeometryError::InvalidGeometry(format!(
            "bad plane schedule start={} step={} end={}",
            cfg.z_start, cfg.z_step, cfg.z_end
        )));
    }

    let (mut min_x, mut min_y) = (f64::INFINITY, f64::INFINITY);
    let (mut max_x, mut max_y) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for v in &mesh.vertices {
        min_x = min_x.min(v[0]);
        min_y = min_y.min(v[1]);
        max_x = max_x.max(v[0]);
        max_y = max_y.max(v[1]);
    }
    let res = cfg.resolution;
    let width = ((max_x - min_x) / res).floor() as usize + 3;
    let height = ((max_y - min_y) / res).floor() as usize + 3;
    let frame = GridFrame::new(width, height, res, min_x - res, min_y - res)?;

    let hits: HashSet<usize> = cfg
        .plane_heights()
        .par_iter()
        .map(|&h| {
            let mut local = HashSet::new();
            for t in &mesh.triangles {
                let tri = [mesh.vertices[t[0]], mesh.vertices[t[1]], mesh.vertices[t[2]]];
                let pts = cut_triangle(tri, h);
                let segments: Vec<((f64, f64), (f64, f64))> = match pts.len() {
                    0 => continue,
                    1 => vec![(pts[0], pts[0])],
                    2 => vec![(pts[0], pts[1])],
                    _ => vec![(pts[0], pts[1]), (pts[1], pts[2]), (pts[2], pts[0])],
                };
                for (a, b) in segments {
                    let a = frame.to_lattice(a.0, a.1);
                    let b = frame.to_lattice(b.0, b.1);
                    for (c, r) in super::supercover(a, b) {
                        if let Some(cell) = frame.lattice_cell(c, r) {
                            local.insert(frame.index(cell));
                        }
                    }
                }
            }
            local
        })
        .reduce(HashSet::new, |mut acc, s| {
            acc.extend(s);
            acc
        });

    let mut map = GridMap::filled(frame, CellState::Free);
    for i in hits {
        let cell = frame.cell_at(i);
        map.set(cell, CellState::Obstacle);
    }
    Ok(map)
}
