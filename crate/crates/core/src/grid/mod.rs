//! Occupancy grids and the geometric operations built on them.

mod contour;
mod mesh;
mod morph;
mod raster;
mod skeleton;
mod voronoi;

use std::fmt;

use thiserror::Error;

pub use contour::{find_contours, Contour};
pub use mesh::{slice_mesh_to_map, SliceConfig, TriangleMesh};
pub use morph::morph_cleanup;
pub use raster::supercover;
pub use skeleton::skeletonize;
pub use voronoi::{voronoi_boundary, VoronoiLabeling, DEFAULT_SITE_SEPARATION};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("empty mesh")]
    EmptyMesh,
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
    #[error("no free space")]
    NoFreeSpace,
    #[error("no obstacle contours")]
    NoContours,
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
}

/// Occupancy of a single cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CellState {
    Free,
    Obstacle,
    Unknown,
}

impl CellState {
    /// Unknown cells count as obstacles in every geometric operation.
    pub fn is_blocked(self) -> bool {
        !matches!(self, CellState::Free)
    }
}

/// Grid cell index. Row 0 is the top image row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Cell {
    pub row: usize,
    pub col: usize,
}

impl Cell {
    pub const fn new(row: usize, col: usize) -> Self {
        Self { row, col }
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.row, self.col)
    }
}

/// Offsets of the 8 neighbours as (d_row, d_col), in N, NE, E, SE, S, SW, W, NW order.
pub const NEIGHBORS_8: [(isize, isize); 8] = [
    (-1, 0),
    (-1, 1),
    (0, 1),
    (1, 1),
    (1, 0),
    (1, -1),
    (0, -1),
    (-1, -1),
];

/// Dimensions and world placement of a grid, without cell contents.
///
/// `origin_x`/`origin_y` is the world position of the bottom-left corner of
/// the bottom-left cell; `resolution` is the cell side in meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridFrame {
    pub width: usize,
    pub height: usize,
    pub resolution: f64,
    pub origin_x: f64,
    pub origin_y: f64,
}

impl GridFrame {
    pub fn new(
        width: usize,
        height: usize,
        resolution: f64,
        origin_x: f64,
        origin_y: f64,
    ) -> Result<Self, GeometryError> {
        if !(resolution.is_finite() && resolution > 0.0) {
            return Err(GeometryError::InvalidGrid(format!(
                "resolution must be positive, got {resolution}"
            )));
        }
        if !(origin_x.is_finite() && origin_y.is_finite()) {
            return Err(GeometryError::InvalidGrid("non-finite origin".into()));
        }
        Ok(Self {
            width,
            height,
            resolution,
            origin_x,
            origin_y,
        })
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, cell: Cell) -> bool {
        cell.row < self.height && cell.col < self.width
    }

    pub fn index(&self, cell: Cell) -> usize {
        cell.row * self.width + cell.col
    }

    pub fn cell_at(&self, index: usize) -> Cell {
        Cell::new(index / self.width, index % self.width)
    }

    /// World coordinates of the cell center.
    pub fn cell_center(&self, cell: Cell) -> (f64, f64) {
        let x = self.origin_x + (cell.col as f64 + 0.5) * self.resolution;
        let y = self.origin_y + ((self.height - 1 - cell.row) as f64 + 0.5) * self.resolution;
        (x, y)
    }

    /// Continuous lattice coordinates: `u` grows with x, `v` grows with y, one unit per cell.
    pub fn to_lattice(&self, x: f64, y: f64) -> (f64, f64) {
        (
            (x - self.origin_x) / self.resolution,
            (y - self.origin_y) / self.resolution,
        )
    }

    /// Cell for an integer lattice index (column, row counted from the bottom).
    pub fn lattice_cell(&self, col: i64, bottom: i64) -> Option<Cell> {
        if col < 0 || bottom < 0 || col as usize >= self.width || bottom as usize >= self.height {
            return None;
        }
        Some(Cell::new(self.height - 1 - bottom as usize, col as usize))
    }

    /// Cell containing a world point (half-open cells: a point on a grid line
    /// belongs to the cell above/right of it).
    pub fn world_to_cell(&self, x: f64, y: f64) -> Option<Cell> {
        let (u, v) = self.to_lattice(x, y);
        if !(u.is_finite() && v.is_finite()) {
            return None;
        }
        self.lattice_cell(u.floor() as i64, v.floor() as i64)
    }

    /// World position of lattice corner (`corner_col`, `corner_row`), rows counted from the top edge.
    pub fn corner_to_world(&self, corner_col: usize, corner_row: usize) -> (f64, f64) {
        (
            self.origin_x + corner_col as f64 * self.resolution,
            self.origin_y + (self.height as f64 - corner_row as f64) * self.resolution,
        )
    }

    /// In-bounds 8-neighbours in N, NE, E, SE, S, SW, W, NW order.
    pub fn neighbors8(&self, cell: Cell) -> impl Iterator<Item = Cell> + '_ {
        NEIGHBORS_8.iter().filter_map(move |&(dr, dc)| {
            let r = cell.row as isize + dr;
            let c = cell.col as isize + dc;
            if r < 0 || c < 0 {
                return None;
            }
            let n = Cell::new(r as usize, c as usize);
            self.contains(n).then_some(n)
        })
    }
}

/// 2D occupancy grid with a world transform.
#[derive(Debug, Clone, PartialEq)]
pub struct GridMap {
    frame: GridFrame,
    cells: Vec<CellState>,
}

impl GridMap {
    pub fn filled(frame: GridFrame, state: CellState) -> Self {
        Self {
            cells: vec![state; frame.len()],
            frame,
        }
    }

    pub fn from_cells(frame: GridFrame, cells: Vec<CellState>) -> Result<Self, GeometryError> {
        if cells.len() != frame.len() {
            return Err(GeometryError::InvalidGrid(format!(
                "expected {} cells for a {}x{} grid, got {}",
                frame.len(),
                frame.width,
                frame.height,
                cells.len()
            )));
        }
        Ok(Self { frame, cells })
    }

    /// Builds a map from text rows: `#` obstacle, `?` unknown, anything else free.
    /// Handy in tests and examples.
    pub fn from_ascii(
        rows: &[&str],
        resolution: f64,
        origin_x: f64,
        origin_y: f64,
    ) -> Result<Self, GeometryError> {
        let height = rows.len();
        let width = rows.first().map_or(0, |r| r.chars().count());
        let mut cells = Vec::with_capacity(width * height);
        for (i, row) in rows.iter().enumerate() {
            if row.chars().count() != width {
                return Err(GeometryError::InvalidGrid(format!("row {i} has a different width")));
            }
            cells.extend(row.chars().map(|ch| match ch {
                '#' => CellState::Obstacle,
                '?' => CellState::Unknown,
                _ => CellState::Free,
            }));
        }
        Self::from_cells(GridFrame::new(width, height, resolution, origin_x, origin_y)?, cells)
    }

    pub fn frame(&self) -> &GridFrame {
        &self.frame
    }

    pub fn width(&self) -> usize {
        self.frame.width
    }

    pub fn height(&self) -> usize {
        self.frame.height
    }

    pub fn resolution(&self) -> f64 {
        self.frame.resolution
    }

    pub fn cells(&self) -> &[CellState] {
        &self.cells
    }

    pub fn get(&self, cell: Cell) -> CellState {
        self.cells[self.frame.index(cell)]
    }

    pub fn set(&mut self, cell: Cell, state: CellState) {
        let i = self.frame.index(cell);
        self.cells[i] = state;
    }

    pub fn is_free(&self, cell: Cell) -> bool {
        self.frame.contains(cell) && self.get(cell) == CellState::Free
    }

    /// Obstacle-or-unknown mask, row-major.
    pub fn blocked_mask(&self) -> Vec<bool> {
        self.cells.iter().map(|s| s.is_blocked()).collect()
    }

    pub fn free_cells(&self) -> impl Iterator<Item = Cell> + '_ {
        self.cells
            .iter()
            .enumerate()
            .filter(|(_, s)| **s == CellState::Free)
            .map(|(i, _)| self.frame.cell_at(i))
    }

    pub fn count(&self, state: CellState) -> usize {
        self.cells.iter().filter(|s| **s == state).count()
    }

    /// In-bounds cells crossed by the segment between two world points.
    pub fn segment_cells(&self, from: (f64, f64), to: (f64, f64)) -> Vec<Cell> {
        let a = self.frame.to_lattice(from.0, from.1);
        let b = self.frame.to_lattice(to.0, to.1);
        supercover(a, b)
            .into_iter()
            .filter_map(|(c, r)| self.frame.lattice_cell(c, r))
            .collect()
    }
}
