//! Zhang–Suen thinning on cell sets.
//!
//! Each sub-iteration marks candidates in parallel as in the original
//! algorithm, but a candidate is only deleted if it still satisfies the
//! conditions once earlier deletions of the same sub-iteration are applied.
//! That keeps two-cell-thick structures (2×2 blocks in particular) from
//! vanishing. A final pass removes 8-simple cells still sitting in a full 2×2
//! block. A block with no simple cell (four diagonal branches meeting in a
//! 2×2 core) loses the core cell that detaches the fewest cells, together with
//! whatever it detaches, so the component count is unchanged. The whole cycle
//! repeats until nothing changes.

use std::collections::BTreeSet;

use super::Cell;

/// Padded local bitmap covering the bounding box of a cell set.
struct Bitmap {
    w: usize,
    h: usize,
    row0: usize,
    col0: usize,
    bits: Vec<bool>,
}

impl Bitmap {
    fn from_cells(cells: &BTreeSet<Cell>) -> Self {
        let row_min = cells.iter().map(|c| c.row).min().unwrap_or(0);
        let row_max = cells.iter().map(|c| c.row).max().unwrap_or(0);
        let col_min = cells.iter().map(|c| c.col).min().unwrap_or(0);
        let col_max = cells.iter().map(|c| c.col).max().unwrap_or(0);
        let w = col_max - col_min + 3;
        let h = row_max - row_min + 3;
        let mut bits = vec![false; w * h];
        for c in cells {
            bits[(c.row - row_min + 1) * w + (c.col - col_min + 1)] = true;
        }
        Self { w, h, row0: row_min, col0: col_min, bits }
    }

    fn to_cells(&self) -> BTreeSet<Cell> {
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, b)| **b)
            .map(|(i, _)| Cell::new(i / self.w + self.row0 - 1, i % self.w + self.col0 - 1))
            .collect()
    }

    /// Neighbours P2..P9: N, NE, E, SE, S, SW, W, NW.
    fn ring(&self, i: usize) -> [bool; 8] {
        let w = self.w;
        let b = &self.bits;
        [
            b[i - w],
            b[i - w + 1],
            b[i + 1],
            b[i + w + 1],
            b[i + w],
            b[i + w - 1],
            b[i - 1],
            b[i - w - 1],
        ]
    }

    fn interior(&self) -> impl Iterator<Item = usize> + '_ {
        (1..self.h - 1).flat_map(move |r| (1..self.w - 1).map(move |c| r * self.w + c))
    }
}

/// Number of 0→1 transitions around the ring.
fn transitions(p: &[bool; 8]) -> usize {
    (0..8).filter(|&k| !p[k] && p[(k + 1) % 8]).count()
}

fn zs_deletable(p: &[bool; 8], second: bool) -> bool {
    let b = p.iter().filter(|x| **x).count();
    if !(2..=6).contains(&b) || transitions(p) != 1 {
        return false;
    }
    let [n, _, e, _, s, _, w, _] = *p;
    if second {
        !(n && e && w) && !(n && s && w)
    } else {
        !(n && e && s) && !(e && s && w)
    }
}

/// Removing the cell keeps both the foreground (8-connected) and background
/// (4-connected) topology of its neighbourhood.
fn is_simple(p: &[bool; 8]) -> bool {
    // foreground components among the 8 neighbours
    let mut seen = [false; 8];
    let mut fg = 0;
    for start in 0..8 {
        if !p[start] || seen[start] {
            continue;
        }
        fg += 1;
        let mut stack = vec![start];
        seen[start] = true;
        while let Some(k) = stack.pop() {
            let mut adj = vec![(k + 1) % 8, (k + 7) % 8];
            if k % 2 == 0 {
                adj.push((k + 2) % 8);
                adj.push((k + 6) % 8);
            }
            for a in adj {
                if p[a] && !seen[a] {
                    seen[a] = true;
                    stack.push(a);
                }
            }
        }
    }
    // background runs that touch a 4-neighbour
    let mut bg = 0;
    if p.iter().all(|x| !x) {
        bg = 1;
    } else {
        let start = (0..8).find(|&k| p[k]).unwrap();
        let mut k = start;
        let mut in_run = false;
        let mut run_has_edge = false;
        for _ in 0..=8 {
            k = (k + 1) % 8;
            if !p[k] {
                in_run = true;
                run_has_edge |= k % 2 == 0;
            } else if in_run {
                if run_has_edge {
                    bg += 1;
                }
                in_run = false;
                run_has_edge = false;
            }
            if k == start {
                break;
            }
        }
    }
    fg == 1 && bg == 1
}

fn in_full_block(bm: &Bitmap, i: usize) -> bool {
    let p = bm.ring(i);
    // quadrants: (N, NE, E), (E, SE, S), (S, SW, W), (W, NW, N)
    (p[0] && p[1] && p[2]) || (p[2] && p[3] && p[4]) || (p[4] && p[5] && p[6]) || (p[6] && p[7] && p[0])
}

fn offsets(w: usize) -> [isize; 8] {
    let w = w as isize;
    [-w, -w + 1, 1, w + 1, w, w - 1, -1, -w - 1]
}

/// Set cells reachable from `from` (8-connected) without passing `skip`.
fn reach(bm: &Bitmap, from: usize, skip: usize) -> Vec<bool> {
    let mut seen = vec![false; bm.bits.len()];
    seen[from] = true;
    let mut stack = vec![from];
    while let Some(i) = stack.pop() {
        for d in offsets(bm.w) {
            let n = (i as isize + d) as usize;
            if n != skip && bm.bits[n] && !seen[n] {
                seen[n] = true;
                stack.push(n);
            }
        }
    }
    seen
}

/// Removes one cell of the 2×2 block anchored at `a` (top-left) plus any
/// cells that would be cut off from the rest of the block by its removal,
/// choosing the cell that costs the fewest deletions.
fn break_block(bm: &mut Bitmap, a: usize) {
    let block = [a, a + 1, a + bm.w, a + bm.w + 1];
    let mut best: Option<Vec<usize>> = None;
    for (k, &p) in block.iter().enumerate() {
        let main = reach(bm, block[(k + 1) % 4], p);
        let mut cut = vec![p];
        let mut taken = vec![false; bm.bits.len()];
        for d in offsets(bm.w) {
            let n = (p as isize + d) as usize;
            if bm.bits[n] && !main[n] && !taken[n] {
                let part = reach(bm, n, p);
                for (i, _) in part.iter().enumerate().filter(|(_, v)| **v) {
                    taken[i] = true;
                    cut.push(i);
                }
            }
        }
        if best.as_ref().is_none_or(|b| cut.len() < b.len()) {
            best = Some(cut);
        }
    }
    for i in best.expect("block has four cells") {
        bm.bits[i] = false;
    }
}

/// Thins a cell set to a one-cell-wide, 8-connected skeleton.
pub fn skeletonize(cells: &BTreeSet<Cell>) -> BTreeSet<Cell> {
    if cells.is_empty() {
        return BTreeSet::new();
    }
    let mut bm = Bitmap::from_cells(cells);
    loop {
        let mut changed = false;
        for second in [false, true] {
            let marked: Vec<usize> = bm
                .interior()
                .filter(|&i| bm.bits[i] && zs_deletable(&bm.ring(i), second))
                .collect();
            for i in marked {
                if zs_deletable(&bm.ring(i), second) {
                    bm.bits[i] = false;
                    changed = true;
                }
            }
        }
        let blocks: Vec<usize> = bm.interior().filter(|&i| bm.bits[i]).collect();
        for i in blocks {
            if bm.bits[i] && in_full_block(&bm, i) {
                let p = bm.ring(i);
                if p.iter().filter(|x| **x).count() >= 2 && is_simple(&p) {
                    bm.bits[i] = false;
                    changed = true;
                }
            }
        }
        let stuck: Vec<usize> = bm.interior().filter(|&i| bm.bits[i]).collect();
        for i in stuck {
            let w = bm.w;
            if bm.bits[i] && bm.bits[i + 1] && bm.bits[i + w] && bm.bits[i + w + 1] {
                break_block(&mut bm, i);
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    bm.to_cells()
}
