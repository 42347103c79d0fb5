//! Navigation graph construction and perception-pose extraction.

use std::collections::{BTreeSet, HashSet};
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::grid::{skeletonize, Cell, GridFrame, GridMap, VoronoiLabeling};

#[derive(Debug, Error, PartialEq)]
pub enum NavError {
    #[error("empty navigation graph")]
    EmptyGraph,
    #[error("invalid pose config: {0}")]
    InvalidConfig(String),
    #[error("line {line}: {msg}")]
    Csv { line: usize, msg: String },
}

/// Cell set with implicit 8-adjacency, placed in a grid frame.
#[derive(Debug, Clone, PartialEq)]
pub struct NavGraph {
    pub cells: BTreeSet<Cell>,
    pub frame: GridFrame,
}

impl NavGraph {
    pub fn new(frame: GridFrame, cells: BTreeSet<Cell>) -> Self {
        Self { cells, frame }
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn degree(&self, cell: Cell) -> usize {
        degree(&self.cells, &self.frame, cell)
    }
}

fn degree(cells: &BTreeSet<Cell>, frame: &GridFrame, cell: Cell) -> usize {
    frame.neighbors8(cell).filter(|n| cells.contains(n)).count()
}

/// Repeatedly strips cells with at most one neighbour until none is left.
///
/// The result does not depend on removal order: it is the largest subset in
/// which every cell has degree ≥ 2.
pub fn filter_spurious(cells: &BTreeSet<Cell>, frame: &GridFrame) -> BTreeSet<Cell> {
    let mut keep = cells.clone();
    let mut queue: Vec<Cell> = keep.iter().copied().filter(|&c| degree(&keep, frame, c) <= 1).collect();
    while let Some(c) = queue.pop() {
        if !keep.remove(&c) {
            continue;
        }
        for n in frame.neighbors8(c) {
            if keep.contains(&n) && degree(&keep, frame, n) <= 1 {
                queue.push(n);
            }
        }
    }
    keep
}

/// Filters spurious boundary cells and skeletonizes what remains.
pub fn build_nav_graph(map: &GridMap, labeling: &VoronoiLabeling) -> NavGraph {
    let frame = *map.frame();
    let filtered = filter_spurious(&labeling.boundary_cells, &frame);
    NavGraph::new(frame, skeletonize(&filtered))
}

/// How traversal distance accumulates between pops.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DistanceAccrual {
    /// Length of the graph edge through which the popped cell was discovered.
    /// Distance therefore always grows by at most one cell diagonal per step.
    #[default]
    TreeEdge,
    /// Straight-line distance from the previously popped cell, which jumps
    /// when the search backtracks.
    PopToPop,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoseConfig {
    /// Distance (meters) to cover between two pose clusters.
    pub distance: f64,
    pub h_low: f64,
    pub h_high: f64,
    pub seed: u64,
    pub accrual: DistanceAccrual,
}

impl Default for PoseConfig {
    fn default() -> Self {
        Self {
            distance: 1.0,
            h_low: 0.1,
            h_high: 0.7,
            seed: 0,
            accrual: DistanceAccrual::TreeEdge,
        }
    }
}

impl PoseConfig {
    fn validate(&self) -> Result<(), NavError> {
        if !(self.distance.is_finite() && self.distance > 0.0) {
            return Err(NavError::InvalidConfig(format!("distance must be > 0, got {}", self.distance)));
        }
        if !(self.h_low < self.h_high) {
            return Err(NavError::InvalidConfig(format!(
                "h_low ({}) must be below h_high ({})",
                self.h_low, self.h_high
            )));
        }
        Ok(())
    }
}

/// Camera pose `(x, y, h, theta)` in world coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerceptionPose {
    pub x: f64,
    pub y: f64,
    pub h: f64,
    pub theta: f64,
}

/// Depth-first walk from a seeded random cell, emitting a 16-pose cluster each
/// time `cfg.distance` has been covered.
pub fn extract_poses(graph: &NavGraph, cfg: &PoseConfig) -> Result<Vec<PerceptionPose>, NavError> {
    if graph.is_empty() {
        return Err(NavError::EmptyGraph);
    }
    extract_poses_from(graph, cfg, start_cell(graph, cfg.seed)?)
}

/// The seeded uniform draw of the traversal's first cell.
pub fn start_cell(graph: &NavGraph, seed: u64) -> Result<Cell, NavError> {
    if graph.is_empty() {
        return Err(NavError::EmptyGraph);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = rng.random_range(0..graph.len());
    Ok(*graph.cells.iter().nth(k).expect("index within graph"))
}

/// One step of the traversal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PopRecord {
    pub cell: Cell,
    /// Cell it was discovered from; `None` for the start cell.
    pub parent: Option<Cell>,
    /// Distance accumulated since the last cluster, including this step.
    pub covered: f64,
    /// Whether a cluster was emitted here (which resets the distance).
    pub emitted: bool,
}

/// [`extract_poses`] with an explicit start cell.
pub fn extract_poses_from(
    graph: &NavGraph,
    cfg: &PoseConfig,
    start: Cell,
) -> Result<Vec<PerceptionPose>, NavError> {
    extract_poses_traced(graph, cfg, start).map(|(poses, _)| poses)
}

/// [`extract_poses_from`] that also returns every pop in order.
pub fn extract_poses_traced(
    graph: &NavGraph,
    cfg: &PoseConfig,
    start: Cell,
) -> Result<(Vec<PerceptionPose>, Vec<PopRecord>), NavError> {
    cfg.validate()?;
    if graph.is_empty() {
        return Err(NavError::EmptyGraph);
    }
    if !graph.cells.contains(&start) {
        return Err(NavError::InvalidConfig(format!("start cell {start} is not in the graph")));
    }
    let frame = &graph.frame;
    let dist = |a: Cell, b: Cell| {
        let (ax, ay) = frame.cell_center(a);
        let (bx, by) = frame.cell_center(b);
        (ax - bx).hypot(ay - by)
    };

    let mut poses = Vec::new();
    let mut trace = Vec::new();
    let mut explored: HashSet<Cell> = HashSet::new();
    // (cell, cell it was discovered from)
    let mut stack: Vec<(Cell, Cell)> = vec![(start, start)];
    let mut cur = start;
    let mut covered = 0.0;
    while let Some((c, parent)) = stack.pop() {
        if !explored.insert(c) {
            continue;
        }
        covered += match cfg.accrual {
            DistanceAccrual::TreeEdge => dist(parent, c),
            DistanceAccrual::PopToPop => dist(cur, c),
        };
        cur = c;
        let emitted = covered >= cfg.distance;
        trace.push(PopRecord { cell: c, parent: (c != parent).then_some(parent), covered, emitted });
        if emitted {
            let (x, y) = frame.cell_center(c);
            for h in [cfg.h_high, cfg.h_low] {
                for i in 0..8 {
                    poses.push(PerceptionPose {
                        x,
                        y,
                        h,
                        theta: PI * i as f64 / 4.0,
                    });
                }
            }
            covered = 0.0;
        }
        for n in frame.neighbors8(c) {
            if graph.cells.contains(&n) && !explored.contains(&n) {
                stack.push((n, c));
            }
        }
    }
    Ok((poses, trace))
}

pub const POSE_CSV_HEADER: &str = "x,y,h,theta";

pub fn poses_to_csv(poses: &[PerceptionPose]) -> String {
    let mut out = String::with_capacity(16 + poses.len() * 40);
    out.push_str(POSE_CSV_HEADER);
    out.push('\n');
    for p in poses {
        out.push_str(&format!("{:.6},{:.6},{:.6},{:.6}\n", p.x, p.y, p.h, p.theta));
    }
    out
}

pub fn csv_to_poses(text: &str) -> Result<Vec<PerceptionPose>, NavError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == POSE_CSV_HEADER => {}
        _ => {
            return Err(NavError::Csv {
                line: 1,
                msg: format!("expected header \"{POSE_CSV_HEADER}\""),
            })
        }
    }
    let mut poses = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(NavError::Csv {
                line: i + 1,
                msg: format!("expected 4 fields, found {}", fields.len()),
            });
        }
        let mut v = [0.0; 4];
        for (slot, f) in v.iter_mut().zip(&fields) {
            *slot = f.trim().parse().map_err(|_| NavError::Csv {
                line: i + 1,
                msg: format!("not a number: {f:?}"),
            })?;
        }
        poses.push(PerceptionPose { x: v[0], y: v[1], h: v[2], theta: v[3] });
    }
    Ok(poses)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frame(w: usize, h: usize, res: f64) -> GridFrame {
        GridFrame::new(w, h, res, 0.0, 0.0).unwrap()
    }

    fn corridor() -> NavGraph {
        NavGraph::new(frame(9, 1, 0.5), (0..9).map(|c| Cell::new(0, c)).collect())
    }

    /// Perimeter of a `n`×`n` square starting at (r0, c0).
    fn square_ring(r0: usize, c0: usize, n: usize) -> BTreeSet<Cell> {
        let mut s = BTreeSet::new();
        for k in 0..n {
            s.insert(Cell::new(r0, c0 + k));
            s.insert(Cell::new(r0 + n - 1, c0 + k));
            s.insert(Cell::new(r0 + k, c0));
            s.insert(Cell::new(r0 + k, c0 + n - 1));
        }
        s
    }

    #[test]
    fn cycle_survives_filter_and_skeleton() {
        let f = frame(12, 12, 1.0);
        let ring = square_ring(3, 3, 5);
        assert_eq!(filter_spurious(&ring, &f), ring);
        assert_eq!(skeletonize(&ring), ring);
    }

    #[test]
    fn dangling_tail_is_eroded() {
        let f = frame(12, 12, 1.0);
        let ring = square_ring(4, 4, 5);
        let mut with_tail = ring.clone();
        for k in 1..=3 {
            with_tail.insert(Cell::new(4 - k, 4 - k));
        }
        assert_eq!(filter_spurious(&with_tail, &f), ring);
    }

    #[test]
    fn isolated_cell_is_removed() {
        let f = frame(3, 3, 1.0);
        assert!(filter_spurious(&BTreeSet::from([Cell::new(1, 1)]), &f).is_empty());
    }

    #[test]
    fn corridor_from_one_end_gives_four_clusters() {
        let g = corridor();
        let poses = extract_poses_from(&g, &PoseConfig::default(), Cell::new(0, 0)).unwrap();
        assert_eq!(poses.len(), 64);
        let xs: Vec<f64> = poses.chunks(16).map(|c| c[0].x).collect();
        // cells 2, 4, 6, 8
        assert_eq!(xs, vec![1.25, 2.25, 3.25, 4.25]);
        for chunk in poses.chunks(16) {
            assert!(chunk[..8].iter().all(|p| p.h == 0.7));
            assert!(chunk[8..].iter().all(|p| p.h == 0.1));
            for (i, p) in chunk[..8].iter().enumerate() {
                assert_eq!(p.theta, PI * i as f64 / 4.0);
            }
        }
    }

    #[test]
    fn corridor_any_start_any_mode_gives_64() {
        let g = corridor();
        for accrual in [DistanceAccrual::TreeEdge, DistanceAccrual::PopToPop] {
            for c in 0..9 {
                let cfg = PoseConfig { accrual, ..Default::default() };
                assert_eq!(extract_poses_from(&g, &cfg, Cell::new(0, c)).unwrap().len(), 64, "start {c}");
            }
        }
    }

    #[test]
    fn short_graph_emits_nothing() {
        let g = NavGraph::new(frame(3, 1, 0.3), (0..3).map(|c| Cell::new(0, c)).collect());
        assert!(extract_poses_from(&g, &PoseConfig::default(), Cell::new(0, 0)).unwrap().is_empty());
    }

    #[test]
    fn empty_graph_is_an_error() {
        let g = NavGraph::new(frame(3, 3, 1.0), BTreeSet::new());
        assert_eq!(extract_poses(&g, &PoseConfig::default()), Err(NavError::EmptyGraph));
    }

    #[test]
    fn seeded_extraction_is_deterministic() {
        let g = NavGraph::new(frame(12, 12, 0.25), square_ring(1, 1, 9));
        let cfg = PoseConfig { seed: 42, ..Default::default() };
        assert_eq!(extract_poses(&g, &cfg).unwrap(), extract_poses(&g, &cfg).unwrap());
    }

    #[test]
    fn csv_round_trip_and_errors() {
        assert_eq!(poses_to_csv(&[]), "x,y,h,theta\n");
        let p = PerceptionPose { x: 1.25, y: 2.5, h: 0.1, theta: 2.356194 };
        let text = poses_to_csv(&[p]);
        assert_eq!(text, "x,y,h,theta\n1.250000,2.500000,0.100000,2.356194\n");
        let back = csv_to_poses(&text).unwrap();
        assert_eq!(back, vec![p]);
        assert_eq!(poses_to_csv(&back), text);

        let corridor_csv = poses_to_csv(
            &extract_poses_from(&corridor(), &PoseConfig::default(), Cell::new(0, 0)).unwrap(),
        );
        assert_eq!(corridor_csv.lines().count(), 65);

        let err = csv_to_poses("x,y,h,theta\n1,2,3,4\n1,2,x,4\n").unwrap_err();
        assert_eq!(err, NavError::Csv { line: 3, msg: "not a number: \"x\"".into() });
        assert!(matches!(csv_to_poses("a,b\n"), Err(NavError::Csv { line: 1, .. })));
        assert!(matches!(csv_to_poses("x,y,h,theta\n1,2\n"), Err(NavError::Csv { line: 2, .. })));
    }
}
