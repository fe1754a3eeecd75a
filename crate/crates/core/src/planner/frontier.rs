//! Frontiers: Free cells bordering unexplored space.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::mapping::{Cell, OccupancyGrid};
use crate::Vec2;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Frontier {
    /// Cell indices, ascending.
    pub cells: Vec<usize>,
    pub centroid: Vec2,
}

fn is_frontier(grid: &OccupancyGrid, i: usize) -> bool {
    if grid.get(i) != Cell::Free || grid.struck(i) {
        return false;
    }
    grid.neighbors4(i).any(|n| grid.get(n) == Cell::Unknown)
}

/// Frontier cells grouped into 8-connected clusters of at least `min_cells`
/// cells, ordered by their smallest cell index.
pub fn detect_frontiers(grid: &OccupancyGrid, min_cells: usize) -> Vec<Frontier> {
    let flag: Vec<bool> = (0..grid.len()).map(|i| is_frontier(grid, i)).collect();
    let mut seen = vec![false; grid.len()];
    let (w, h) = (grid.width as i64, grid.height as i64);
    let mut out = Vec::new();
    for s in 0..grid.len() {
        if !flag[s] || seen[s] {
            continue;
        }
        seen[s] = true;
        let mut cells = vec![];
        let mut q = VecDeque::from([s]);
        while let Some(i) = q.pop_front() {
            cells.push(i);
            let (x, y) = grid.xy(i);
            for dy in -1..=1i64 {
                for dx in -1..=1i64 {
                    let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                    if nx < 0 || ny < 0 || nx >= w || ny >= h {
                        continue;
                    }
                    let n = grid.index(nx as usize, ny as usize);
                    if flag[n] && !seen[n] {
                        seen[n] = true;
                        q.push_back(n);
                    }
                }
            }
        }
        if cells.len() < min_cells.max(1) {
            continue;
        }
        cells.sort_unstable();
        let sum = cells.iter().fold(Vec2::zero(), |a, &i| a + grid.center(i));
        let centroid = sum * (1.0 / cells.len() as f64);
        out.push(Frontier { cells, centroid });
    }
    out
}

/// Where a frontier is approached from: the reachable cell within `reach`
/// of one of its cells that lies nearest the centroid, with the path cost
/// to it. Frontier cells border Unknown, so with clearance from Unknown the
/// approach cell is a short step back from the frontier itself.
pub fn frontier_target(grid: &OccupancyGrid, f: &Frontier, dist: &[f64], reach: f64) -> Option<(usize, f64)> {
    let r = (reach / grid.resolution).floor() as i64;
    let lim = (reach / grid.resolution).powi(2) + 1e-9;
    let (w, h) = (grid.width as i64, grid.height as i64);
    let mut best: Option<(f64, usize)> = None;
    for &c in &f.cells {
        let (x, y) = grid.xy(c);
        for dy in -r..=r {
            for dx in -r..=r {
                let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                if nx < 0 || ny < 0 || nx >= w || ny >= h || (dx * dx + dy * dy) as f64 > lim {
                    continue;
                }
                let i = grid.index(nx as usize, ny as usize);
                if !dist[i].is_finite() {
                    continue;
                }
                let d = grid.center(i).distance(f.centroid);
                if best.is_none_or(|(bd, bi)| d.total_cmp(&bd).then(i.cmp(&bi)).is_lt()) {
                    best = Some((d, i));
                }
            }
        }
    }
    best.map(|(_, i)| (i, dist[i]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Rect;

    fn grid(w: usize, h: usize, fill: impl Fn(usize, usize) -> Cell) -> OccupancyGrid {
        let mut g = OccupancyGrid::new(1.0, Rect::new(Vec2::new(0.0, 0.0), Vec2::new(w as f64, h as f64)));
        for y in 0..h {
            for x in 0..w {
                let i = g.index(x, y);
                g.set(i, fill(x, y));
            }
        }
        g
    }

    #[test]
    fn fully_known_has_none() {
        let g = grid(8, 8, |x, y| if x == 3 && y > 2 { Cell::Occupied } else { Cell::Free });
        assert!(detect_frontiers(&g, 1).is_empty());
    }

    #[test]
    fn split_grid_one_line() {
        let g = grid(10, 8, |x, _| if x < 5 { Cell::Free } else { Cell::Unknown });
        let f = detect_frontiers(&g, 1);
        assert_eq!(f.len(), 1);
        assert!(f[0].cells.iter().all(|&i| g.xy(i).0 == 4));
        assert_eq!(f[0].cells.len(), 8);
    }

    #[test]
    fn two_pockets_two_clusters() {
        let g = grid(12, 8, |x, y| match () {
            _ if (2..=3).contains(&x) && (2..=3).contains(&y) => Cell::Unknown,
            _ if (8..=9).contains(&x) && (4..=5).contains(&y) => Cell::Unknown,
            _ => Cell::Free,
        });
        assert_eq!(detect_frontiers(&g, 1).len(), 2);
    }
}
