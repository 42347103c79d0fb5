/// Supercover rasterization of a segment given in lattice units (one unit per
/// cell). Returns every integer cell `(floor(u), floor(v))` containing a point
/// of the closed segment, in traversal order, without duplicates.
///
/// Cells are half-open, so a point lying exactly on a grid line belongs to the
/// cell on its upper/right side.
pub fn supercover(a: (f64, f64), b: (f64, f64)) -> Vec<(i64, i64)> {
    // Parameters where the segment crosses a grid line, with the crossing point
    // snapped onto that line.
    let mut stops: Vec<(f64, f64, f64)> = vec![(0.0, a.0, a.1), (1.0, b.0, b.1)];
    let du = b.0 - a.0;
    let dv = b.1 - a.1;
    if du != 0.0 {
        let (lo, hi) = (a.0.min(b.0), a.0.max(b.0));
        let mut k = lo.floor() + 1.0;
        while k < hi {
            let t = (k - a.0) / du;
            stops.push((t, k, a.1 + t * dv));
            k += 1.0;
        }
    }
    if dv != 0.0 {
        let (lo, hi) = (a.1.min(b.1), a.1.max(b.1));
        let mut k = lo.floor() + 1.0;
        while k < hi {
            let t = (k - a.1) / dv;
            stops.push((t, a.0 + t * du, k));
            k += 1.0;
        }
    }
    stops.sort_by(|x, y| x.0.total_cmp(&y.0));

    let mut out: Vec<(i64, i64)> = Vec::with_capacity(stops.len() * 2);
    let mut push = |u: f64, v: f64| {
        let c = (u.floor() as i64, v.floor() as i64);
        if !out.contains(&c) {
            out.push(c);
        }
    };
    for (i, &(t, u, v)) in stops.iter().enumerate() {
        push(u, v);
        if let Some(&(t_next, _, _)) = stops.get(i + 1) {
            if t_next > t {
                let tm = 0.5 * (t + t_next);
                push(a.0 + tm * du, a.1 + tm * dv);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn horizontal_segment_on_grid_line() {
        // y = 1 is a grid line: cells of row v = 1 only
        let cells = supercover((1.0, 1.0), (3.0, 1.0));
        assert_eq!(cells, vec![(1, 1), (2, 1), (3, 1)]);
    }

    #[test]
    fn single_point() {
        assert_eq!(supercover((2.5, 0.2), (2.5, 0.2)), vec![(2, 0)]);
    }

    #[test]
    fn diagonal_through_interior() {
        let cells = supercover((0.5, 0.2), (2.5, 1.4));
        // brute-force: sample the segment densely
        let mut expected = Vec::new();
        for i in 0..=10_000 {
            let t = i as f64 / 10_000.0;
            let c = ((0.5 + 2.0 * t).floor() as i64, (0.2 + 1.2 * t).floor() as i64);
            if !expected.contains(&c) {
                expected.push(c);
            }
        }
        let mut got = cells.clone();
        got.sort();
        expected.sort();
        assert_eq!(got, expected);
    }
}
