//! Discrete Voronoi labeling of free space with contour vertices as sites.

use std::collections::BTreeSet;

use super::{Cell, CellState, Contour, GeometryError, GridMap};

/// Default minimum distance (meters) between two sites of the same component
/// for the split between them to count as a boundary.
pub const DEFAULT_SITE_SEPARATION: f64 = 0.3;

#[derive(Debug, Clone, PartialEq)]
pub struct VoronoiLabeling {
    /// Every contour vertex, flattened in contour order.
    pub sites: Vec<[f64; 2]>,
    /// Component id of each site.
    pub site_contour: Vec<usize>,
    /// Nearest site per cell (row-major); `None` exactly on non-free cells.
    pub nearest_site: Vec<Option<usize>>,
    pub boundary_cells: BTreeSet<Cell>,
}

fn dist2(a: (f64, f64), b: [f64; 2]) -> f64 {
    let dx = a.0 - b[0];
    let dy = a.1 - b[1];
    dx * dx + dy * dy
}

/// Uniform bucket grid over the sites; answers exact nearest-site queries with
/// ties broken towards the lowest site index.
struct SiteIndex<'a> {
    sites: &'a [[f64; 2]],
    min: (f64, f64),
    size: f64,
    nx: usize,
    ny: usize,
    buckets: Vec<Vec<usize>>,
}

impl<'a> SiteIndex<'a> {
    fn new(sites: &'a [[f64; 2]]) -> Self {
        let (mut lo, mut hi) = ((f64::INFINITY, f64::INFINITY), (f64::NEG_INFINITY, f64::NEG_INFINITY));
        for s in sites {
            lo = (lo.0.min(s[0]), lo.1.min(s[1]));
            hi = (hi.0.max(s[0]), hi.1.max(s[1]));
        }
        let area = ((hi.0 - lo.0) * (hi.1 - lo.1)).max(1e-12);
        let size = (area / sites.len() as f64).sqrt().max(1e-6) * 2.0;
        let nx = ((hi.0 - lo.0) / size).floor() as usize + 1;
        let ny = ((hi.1 - lo.1) / size).floor() as usize + 1;
        let mut buckets = vec![Vec::new(); nx * ny];
        for (k, s) in sites.iter().enumerate() {
            let bx = (((s[0] - lo.0) / size).floor() as usize).min(nx - 1);
            let by = (((s[1] - lo.1) / size).floor() as usize).min(ny - 1);
            buckets[by * nx + bx].push(k);
        }
        Self { sites, min: lo, size, nx, ny, buckets }
    }

    fn nearest(&self, p: (f64, f64)) -> usize {
        let bx = ((p.0 - self.min.0) / self.size).floor() as isize;
        let by = ((p.1 - self.min.1) / self.size).floor() as isize;
        let mut best: Option<(f64, usize)> = None;
        let max_ring = self.nx.max(self.ny) as isize + bx.unsigned_abs() as isize + by.unsigned_abs() as isize;
        for ring in 0..=max_ring {
            for y in (by - ring)..=(by + ring) {
                for x in (bx - ring)..=(bx + ring) {
                    if (y - by).abs() != ring && (x - bx).abs() != ring {
                        continue;
                    }
                    if x < 0 || y < 0 || x as usize >= self.nx || y as usize >= self.ny {
                        continue;
                    }
                    for &k in &self.buckets[y as usize * self.nx + x as usize] {
                        let d = dist2(p, self.sites[k]);
                        let better = match best {
                            None => true,
                            Some((bd, bk)) => d < bd || (d == bd && k < bk),
                        };
                        if better {
                            best = Some((d, k));
                        }
                    }
                }
            }
            // anything in ring+1 or beyond is at least ring*size away
            if let Some((bd, _)) = best {
                let reach = ring as f64 * self.size;
                if bd.sqrt() < reach {
                    break;
                }
            }
        }
        best.expect("site index is never empty").1
    }
}

/// Labels each free cell with its nearest contour vertex and extracts the
/// cells lying on the discrete Voronoi boundary.
///
/// A free cell `c` with site `s` is a boundary cell when some free 8-neighbour
/// `n` has a different site `t`, the two sites belong to different components
/// or are at least `site_separation` apart, and `c` is at least as close to
/// the bisector of `s` and `t` as `n` is. Of two cells straddling the
/// bisector this keeps the nearer one (both when equally near), so every
/// boundary cell is within one cell diagonal of an equidistant point.
pub fn voronoi_boundary(
    map: &GridMap,
    contours: &[Contour],
    site_separation: f64,
) -> Result<VoronoiLabeling, GeometryError> {
    let frame = map.frame();
    if map.count(CellState::Free) == 0 {
        return Err(GeometryError::NoFreeSpace);
    }
    let mut sites = Vec::new();
    let mut site_contour = Vec::new();
    for k in contours {
        for v in &k.vertices {
            sites.push(*v);
            site_contour.push(k.component_id);
        }
    }
    if sites.is_empty() {
        return Err(GeometryError::NoContours);
    }

    let index = SiteIndex::new(&sites);
    let nearest_site: Vec<Option<usize>> = map
        .cells()
        .iter()
        .enumerate()
        .map(|(i, s)| {
            (*s == CellState::Free).then(|| index.nearest(frame.cell_center(frame.cell_at(i))))
        })
        .collect();

    let dist = |p: (f64, f64), k: usize| dist2(p, sites[k]).sqrt();
    let mut boundary_cells = BTreeSet::new();
    for (i, own) in nearest_site.iter().enumerate() {
        let Some(s) = *own else { continue };
        let c = frame.cell_at(i);
        let pc = frame.cell_center(c);
        let on_boundary = frame.neighbors8(c).any(|n| {
            let Some(t) = nearest_site[frame.index(n)] else {
                return false;
            };
            if t == s {
                return false;
            }
            let separated = site_contour[s] != site_contour[t]
                || dist2((sites[s][0], sites[s][1]), sites[t]).sqrt() >= site_separation;
            if !separated {
                return false;
            }
            let pn = frame.cell_center(n);
            let own_gap = dist(pc, t) - dist(pc, s);
            let other_gap = dist(pn, s) - dist(pn, t);
            own_gap <= other_gap + 1e-12
        });
        if on_boundary {
            boundary_cells.insert(c);
        }
    }

    Ok(VoronoiLabeling {
        sites,
        site_contour,
        nearest_site,
        boundary_cells,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::find_contours;

    fn brute_nearest(sites: &[[f64; 2]], p: (f64, f64)) -> usize {
        let mut best = 0;
        for k in 1..sites.len() {
            if dist2(p, sites[k]) < dist2(p, sites[best]) {
                best = k;
            }
        }
        best
    }

    fn corridor() -> GridMap {
        // two walls, 5 free rows between them
        let mut rows = vec!["####################"];
        rows.extend(std::iter::repeat_n("....................", 5));
        rows.push("####################");
        GridMap::from_ascii(&rows, 0.1, 0.0, 0.0).unwrap()
    }

    #[test]
    fn corridor_boundary_is_centerline_band() {
        let m = corridor();
        let contours = find_contours(&m);
        let lab = voronoi_boundary(&m, &contours, f64::INFINITY).unwrap();
        // away from the corridor ends, the boundary is the middle row only
        let middle: Vec<Cell> = lab.boundary_cells.iter().filter(|c| c.col >= 4 && c.col <= 15).copied().collect();
        assert!(!middle.is_empty());
        assert!(middle.iter().all(|c| c.row == 3), "{middle:?}");
        // every boundary cell has a competing site within one cell diagonal
        let f = m.frame();
        let eps = f.resolution * std::f64::consts::SQRT_2;
        for &c in &lab.boundary_cells {
            let p = f.cell_center(c);
            let s = lab.nearest_site[f.index(c)].unwrap();
            let ds = dist2(p, lab.sites[s]).sqrt();
            let gap = f
                .neighbors8(c)
                .filter_map(|n| lab.nearest_site[f.index(n)])
                .filter(|&t| t != s && lab.site_contour[t] != lab.site_contour[s])
                .map(|t| dist2(p, lab.sites[t]).sqrt() - ds)
                .fold(f64::INFINITY, f64::min);
            assert!(gap <= eps + 1e-9, "cell {c} gap {gap}");
        }
    }

    #[test]
    fn single_contour_without_splits_has_no_boundary() {
        let m = GridMap::from_ascii(&["......", "..##..", "......"], 0.5, 0.0, 0.0).unwrap();
        let contours = find_contours(&m);
        let lab = voronoi_boundary(&m, &contours, f64::INFINITY).unwrap();
        assert!(lab.boundary_cells.is_empty());
    }

    #[test]
    fn two_points_split_along_bisector() {
        let mut rows: Vec<String> = vec![".".repeat(21); 15];
        rows[7].replace_range(3..4, "#");
        rows[7].replace_range(17..18, "#");
        let refs: Vec<&str> = rows.iter().map(|s| s.as_str()).collect();
        let m = GridMap::from_ascii(&refs, 0.25, 0.0, 0.0).unwrap();
        let lab = voronoi_boundary(&m, &find_contours(&m), f64::INFINITY).unwrap();
        assert!(!lab.boundary_cells.is_empty());
        // obstacle centers at cols 3 and 17 -> bisector x at col 10 center
        let f = m.frame();
        let bisector_x = f.cell_center(Cell::new(0, 10)).0;
        let eps = f.resolution * std::f64::consts::SQRT_2;
        for c in &lab.boundary_cells {
            assert!((f.cell_center(*c).0 - bisector_x).abs() <= eps, "{c}");
        }
    }

    #[test]
    fn labels_exist_only_on_free_cells() {
        let m = corridor();
        let lab = voronoi_boundary(&m, &find_contours(&m), DEFAULT_SITE_SEPARATION).unwrap();
        for (i, s) in m.cells().iter().enumerate() {
            assert_eq!(lab.nearest_site[i].is_some(), *s == CellState::Free);
        }
        assert!(lab.boundary_cells.iter().all(|c| m.is_free(*c)));
    }

    #[test]
    fn errors() {
        let full = GridMap::from_ascii(&["##", "##"], 1.0, 0.0, 0.0).unwrap();
        assert_eq!(
            voronoi_boundary(&full, &find_contours(&full), 0.3),
            Err(GeometryError::NoFreeSpace)
        );
        let empty = GridMap::from_ascii(&["..", ".."], 1.0, 0.0, 0.0).unwrap();
        assert_eq!(voronoi_boundary(&empty, &[], 0.3), Err(GeometryError::NoContours));
    }

    #[test]
    fn bucket_search_matches_brute_force_on_clustered_sites() {
        let sites: Vec<[f64; 2]> = (0..200)
            .map(|i| {
                let t = i as f64 * 0.37;
                [t.sin() * 3.0 + (i % 7) as f64 * 0.01, t.cos() * 0.2]
            })
            .collect();
        let idx = SiteIndex::new(&sites);
        for gx in -20..20 {
            for gy in -20..20 {
                let p = (gx as f64 * 0.3, gy as f64 * 0.3);
                assert_eq!(idx.nearest(p), brute_nearest(&sites, p));
            }
        }
    }
}
