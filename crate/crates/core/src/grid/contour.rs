//! Boundary tracing of obstacle components.
//!
//! Components are 8-connected. Each boundary is followed along the cell-corner
//! lattice with the component kept on the right-hand side (image coordinates),
//! which is Moore-neighbour tracing expressed on cell edges. Where two
//! component cells touch only at a corner the tracer crosses over to the other
//! cell, so diagonally touching cells share one outline.
//!
//! Straight runs are collapsed afterwards, leaving only corner vertices.

use std::collections::{BTreeMap, VecDeque};

use super::{GridMap, NEIGHBORS_8};

/// Closed outline of one obstacle component, in world coordinates.
///
/// A component with holes yields one contour per boundary (outer and holes),
/// all carrying the same `component_id`.
#[derive(Debug, Clone, PartialEq)]
pub struct Contour {
    pub component_id: usize,
    pub vertices: Vec<[f64; 2]>,
    pub closed: bool,
}

/// Lattice corner (column, row) with rows counted from the top edge.
type Corner = (usize, usize);

#[derive(Debug, Clone, Copy)]
struct Edge {
    from: Corner,
    to: Corner,
    cell: usize,
}

/// Labels 8-connected components of `mask`, numbered in raster order of their first cell.
pub(crate) fn label_components(mask: &[bool], w: usize, h: usize) -> (Vec<Option<usize>>, usize) {
    let mut labels = vec![None; mask.len()];
    let mut next = 0;
    let mut queue = VecDeque::new();
    for start in 0..mask.len() {
        if !mask[start] || labels[start].is_some() {
            continue;
        }
        labels[start] = Some(next);
        queue.push_back(start);
        while let Some(i) = queue.pop_front() {
            let (r, c) = ((i / w) as isize, (i % w) as isize);
            for (dr, dc) in NEIGHBORS_8 {
                let (nr, nc) = (r + dr, c + dc);
                if nr < 0 || nc < 0 || nr >= h as isize || nc >= w as isize {
                    continue;
                }
                let j = nr as usize * w + nc as usize;
                if mask[j] && labels[j].is_none() {
                    labels[j] = Some(next);
                    queue.push_back(j);
                }
            }
        }
        next += 1;
    }
    (labels, next)
}

/// Directed boundary edges of the cells in `members` (component on the right).
fn boundary_edges(members: &[usize], inside: impl Fn(isize, isize) -> bool, w: usize) -> Vec<Edge> {
    let mut edges = Vec::new();
    for &i in members {
        let (r, c) = (i / w, i % w);
        let (ri, ci) = (r as isize, c as isize);
        if !inside(ri - 1, ci) {
            edges.push(Edge { from: (c, r), to: (c + 1, r), cell: i });
        }
        if !inside(ri, ci + 1) {
            edges.push(Edge { from: (c + 1, r), to: (c + 1, r + 1), cell: i });
        }
        if !inside(ri + 1, ci) {
            edges.push(Edge { from: (c + 1, r + 1), to: (c, r + 1), cell: i });
        }
        if !inside(ri, ci - 1) {
            edges.push(Edge { from: (c, r + 1), to: (c, r), cell: i });
        }
    }
    edges
}

fn direction(e: &Edge) -> (isize, isize) {
    (
        e.to.0 as isize - e.from.0 as isize,
        e.to.1 as isize - e.from.1 as isize,
    )
}

/// Links directed edges into closed loops; returns the corner sequence of each loop.
fn link_loops(edges: &[Edge]) -> Vec<Vec<Corner>> {
    let mut outgoing: BTreeMap<Corner, Vec<usize>> = BTreeMap::new();
    for (k, e) in edges.iter().enumerate() {
        outgoing.entry(e.from).or_default().push(k);
    }
    let mut used = vec![false; edges.len()];
    let mut order: Vec<usize> = (0..edges.len()).collect();
    order.sort_by_key(|&k| (edges[k].from.1, edges[k].from.0, edges[k].to.1, edges[k].to.0));

    let mut loops = Vec::new();
    for start in order {
        if used[start] {
            continue;
        }
        let mut corners = Vec::new();
        let mut cur = start;
        loop {
            used[cur] = true;
            corners.push(edges[cur].from);
            let here = edges[cur].to;
            let candidates: Vec<usize> = outgoing
                .get(&here)
                .map(|v| v.iter().copied().filter(|&k| !used[k]).collect())
                .unwrap_or_default();
            // at a pinch corner, continue along the other cell so that
            // diagonally touching cells stay on one outline
            let next = candidates
                .iter()
                .copied()
                .find(|&k| edges[k].cell != edges[cur].cell)
                .or_else(|| candidates.first().copied());
            match next {
                Some(k) => cur = k,
                None => break,
            }
        }
        loops.push(corners);
    }
    loops
}

/// Drops vertices whose incoming and outgoing directions agree.
fn drop_collinear(corners: Vec<Corner>) -> Vec<Corner> {
    let n = corners.len();
    if n < 3 {
        return corners;
    }
    let dir = |a: Corner, b: Corner| {
        (
            (b.0 as isize - a.0 as isize).signum(),
            (b.1 as isize - a.1 as isize).signum(),
        )
    };
    (0..n)
        .filter(|&i| {
            let prev = corners[(i + n - 1) % n];
            let next = corners[(i + 1) % n];
            dir(prev, corners[i]) != dir(corners[i], next)
        })
        .map(|i| corners[i])
        .collect()
}

/// Traces every obstacle (or unknown) component of `map`.
pub fn find_contours(map: &GridMap) -> Vec<Contour> {
    let frame = *map.frame();
    let (w, h) = (frame.width, frame.height);
    let mask = map.blocked_mask();
    let (labels, count) = label_components(&mask, w, h);

    let mut members: Vec<Vec<usize>> = vec![Vec::new(); count];
    for (i, l) in labels.iter().enumerate() {
        if let Some(l) = l {
            members[*l].push(i);
        }
    }

    let mut out = Vec::new();
    for (id, cells) in members.iter().enumerate() {
        let inside = |r: isize, c: isize| {
            r >= 0
                && c >= 0
                && (r as usize) < h
                && (c as usize) < w
                && labels[r as usize * w + c as usize] == Some(id)
        };
        let edges = boundary_edges(cells, inside, w);
        debug_assert!(edges.iter().all(|e| direction(e).0.abs() + direction(e).1.abs() == 1));
        for corners in link_loops(&edges) {
            let vertices = drop_collinear(corners)
                .into_iter()
                .map(|(c, r)| {
                    let (x, y) = frame.corner_to_world(c, r);
                    [x, y]
                })
                .collect();
            out.push(Contour {
                component_id: id,
                vertices,
                closed: true,
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Cell, CellState, GridFrame};
    use proptest::prelude::*;
    use std::collections::BTreeSet;

    fn map(rows: &[&str]) -> GridMap {
        GridMap::from_ascii(rows, 1.0, 0.0, 0.0).unwrap()
    }

    #[test]
    fn single_cell_is_unit_square() {
        let m = map(&["...", ".#.", "..."]);
        let c = find_contours(&m);
        assert_eq!(c.len(), 1);
        let mut v = c[0].vertices.clone();
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(v, vec![[1.0, 1.0], [1.0, 2.0], [2.0, 1.0], [2.0, 2.0]]);
    }

    #[test]
    fn bar_collapses_to_rectangle() {
        let m = map(&[".....", ".###.", "....."]);
        let c = find_contours(&m);
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].vertices.len(), 4);
        let xs: BTreeSet<i64> = c[0].vertices.iter().map(|v| v[0] as i64).collect();
        assert_eq!(xs, BTreeSet::from([1, 4]));
    }

    #[test]
    fn empty_map_has_no_contours() {
        assert!(find_contours(&map(&["...", "..."])).is_empty());
    }

    #[test]
    fn diagonal_cells_form_one_component_one_loop() {
        let m = map(&["....", ".#..", "..#.", "...."]);
        let c = find_contours(&m);
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].vertices.len(), 8);
    }

    #[test]
    fn ring_yields_outer_and_hole() {
        let m = map(&[".....", ".###.", ".#.#.", ".###.", "....."]);
        let c = find_contours(&m);
        assert_eq!(c.len(), 2);
        assert!(c.iter().all(|k| k.component_id == 0 && k.vertices.len() == 4));
    }

    #[test]
    fn unknown_counts_as_obstacle() {
        let m = map(&["...", ".?.", "..."]);
        assert_eq!(find_contours(&m).len(), 1);
    }

    /// Cells of the component that own an edge of the traced polygons.
    fn traced_boundary(m: &GridMap, contours: &[Contour], id: usize) -> BTreeSet<Cell> {
        let f = m.frame();
        let mut out = BTreeSet::new();
        for k in contours.iter().filter(|k| k.component_id == id) {
            let n = k.vertices.len();
            for i in 0..n {
                let a = k.vertices[i];
                let b = k.vertices[(i + 1) % n];
                // walk the unit edges of this polygon side
                let steps = ((b[0] - a[0]).abs() + (b[1] - a[1]).abs()).round() as usize;
                let sign = |v: f64| if v == 0.0 { 0.0 } else { v.signum() };
                let (dx, dy) = (sign(b[0] - a[0]), sign(b[1] - a[1]));
                for s in 0..steps {
                    let mx = a[0] + dx * (s as f64 + 0.5);
                    let my = a[1] + dy * (s as f64 + 0.5);
                    // the two cells sharing this unit edge
                    for (ox, oy) in [(dy * 0.5, -dx * 0.5), (-dy * 0.5, dx * 0.5)] {
                        if let Some(c) = f.world_to_cell(mx + ox, my + oy) {
                            if m.get(c).is_blocked() {
                                out.insert(c);
                            }
                        }
                    }
                }
            }
        }
        out
    }

    proptest! {
        #[test]
        fn contours_recover_component_boundaries(bits in proptest::collection::vec(any::<bool>(), 100)) {
            let cells = bits.iter().map(|b| if *b { CellState::Obstacle } else { CellState::Free }).collect();
            let m = GridMap::from_cells(GridFrame::new(10, 10, 1.0, 0.0, 0.0).unwrap(), cells).unwrap();
            let contours = find_contours(&m);
            let (labels, count) = label_components(&m.blocked_mask(), 10, 10);
            for id in 0..count {
                let expected: BTreeSet<Cell> = (0..100)
                    .filter(|&i| labels[i] == Some(id))
                    .map(|i| m.frame().cell_at(i))
                    .filter(|c| {
                        let (r, col) = (c.row as isize, c.col as isize);
                        [(-1, 0), (1, 0), (0, -1), (0, 1)].iter().any(|(dr, dc)| {
                            let (nr, nc) = (r + dr, col + dc);
                            nr < 0 || nc < 0 || nr >= 10 || nc >= 10
                                || labels[nr as usize * 10 + nc as usize] != Some(id)
                        })
                    })
                    .collect();
                prop_assert_eq!(traced_boundary(&m, &contours, id), expected);
            }
            for k in &contours {
                let n = k.vertices.len();
                prop_assert!(n >= 4);
                for i in 0..n {
                    let a = k.vertices[(i + n - 1) % n];
                    let b = k.vertices[i];
                    let c = k.vertices[(i + 1) % n];
                    prop_assert!(a != b);
                    let cross = (b[0] - a[0]) * (c[1] - b[1]) - (b[1] - a[1]) * (c[0] - b[0]);
                    prop_assert!(cross != 0.0, "collinear triple in contour");
                }
            }
        }
    }
}
