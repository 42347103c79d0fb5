use super::{CellState, GridMap};

/// Square-window max filter of half-width `r`; cells outside the grid read as `outside`.
fn window_any(mask: &[bool], w: usize, h: usize, r: usize, outside: bool) -> Vec<bool> {
    if r == 0 {
        return mask.to_vec();
    }
    // separable: rows then columns
    let mut rows = vec![false; mask.len()];
    for y in 0..h {
        for x in 0..w {
            let lo = x as isize - r as isize;
            let hi = x + r;
            let mut v = outside && (lo < 0 || hi >= w);
            if !v {
                v = (lo.max(0) as usize..=hi.min(w - 1)).any(|xx| mask[y * w + xx]);
            }
            rows[y * w + x] = v;
        }
    }
    let mut out = vec![false; mask.len()];
    for y in 0..h {
        let lo = y as isize - r as isize;
        let hi = y + r;
        for x in 0..w {
            let mut v = outside && (lo < 0 || hi >= h);
            if !v {
                v = (lo.max(0) as usize..=hi.min(h - 1)).any(|yy| rows[yy * w + x]);
            }
            out[y * w + x] = v;
        }
    }
    out
}

fn dilate(mask: &[bool], w: usize, h: usize, r: usize) -> Vec<bool> {
    window_any(mask, w, h, r, false)
}

fn erode(mask: &[bool], w: usize, h: usize, r: usize) -> Vec<bool> {
    // erosion of X is the complement of the dilation of its complement;
    // out-of-bounds counts as obstacle
    let inv: Vec<bool> = mask.iter().map(|b| !b).collect();
    window_any(&inv, w, h, r, false)
        .into_iter()
        .map(|b| !b)
        .collect()
}

/// Closes small gaps between obstacles, then inflates them.
///
/// The blocked mask (obstacle or unknown) is closed with a square structuring
/// element of half-width `close_radius` and then dilated by `inflate_radius`.
/// Cells that become blocked are marked `Obstacle`; unknown cells stay unknown.
pub fn morph_cleanup(map: &GridMap, close_radius: usize, inflate_radius: usize) -> GridMap {
    let (w, h) = (map.width(), map.height());
    if w == 0 || h == 0 {
        return map.clone();
    }
    let mask = map.blocked_mask();
    let closed = erode(&dilate(&mask, w, h, close_radius), w, h, close_radius);
    let inflated = dilate(&closed, w, h, inflate_radius);

    let mut out = map.clone();
    for (i, blocked) in inflated.into_iter().enumerate() {
        if blocked && map.cells()[i] == CellState::Free {
            let cell = map.frame().cell_at(i);
            out.set(cell, CellState::Obstacle);
        }
    }
    out
}
