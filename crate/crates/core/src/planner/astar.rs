//! Shortest paths on the occupancy grid.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::mapping::{Cell, OccupancyGrid};
use crate::world::Pose;
use crate::Vec2;

use super::PlanError;

/// Grid path through cell centers.
#[derive(Clone, Debug, PartialEq)]
pub struct Path {
    pub waypoints: Vec<Pose>,
    pub length: f64,
}

impl Path {
    pub fn from_points(points: Vec<Vec2>) -> Self {
        let length = points.windows(2).map(|w| w[0].distance(w[1])).sum();
        let mut waypoints = Vec::with_capacity(points.len());
        for (i, p) in points.iter().enumerate() {
            let yaw = match (points.get(i + 1), i.checked_sub(1).map(|j| points[j])) {
                (Some(n), _) if n.distance(*p) > 0.0 => (*n - *p).angle(),
                (_, Some(q)) if q.distance(*p) > 0.0 => (*p - q).angle(),
                _ => 0.0,
            };
            waypoints.push(Pose { position: *p, yaw });
        }
        Self { waypoints, length }
    }
}

/// Cells a robot of radius `radius` may occupy: Free cells farther than
/// `radius` from every [`OccupancyGrid::blocked`] cell and from Unknown
/// space. An unseen wall can sit just past the last carved cell.
pub fn passable_mask(grid: &OccupancyGrid, radius: f64) -> Vec<bool> {
    let r = (radius / grid.resolution).ceil() as i64;
    let (w, h) = (grid.width as i64, grid.height as i64);
    let mut mask: Vec<bool> = grid.cells().iter().map(|c| *c == Cell::Free).collect();
    let lim = (radius / grid.resolution).powi(2);
    let near_free = |i: usize| {
        let (x, y) = grid.xy(i);
        (-1..=1i64).flat_map(|dy| (-1..=1i64).map(move |dx| (x as i64 + dx, y as i64 + dy))).any(|(nx, ny)| {
            nx >= 0 && ny >= 0 && nx < w && ny < h && grid.get(ny as usize * grid.width + nx as usize) == Cell::Free
        })
    };
    for i in 0..grid.len() {
        // Unknown cells deep in unknown space cannot shadow a Free one.
        if !(grid.blocked(i) || grid.get(i) == Cell::Unknown && near_free(i)) {
            continue;
        }
        let (x, y) = grid.xy(i);
        for dy in -r..=r {
            for dx in -r..=r {
                let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                if nx < 0 || ny < 0 || nx >= w || ny >= h {
                    continue;
                }
                // Center-to-edge distance of the obstacle cell.
                let ex = (dx.abs() as f64 - 0.5).max(0.0);
                let ey = (dy.abs() as f64 - 0.5).max(0.0);
                if ex * ex + ey * ey < lim {
                    mask[ny as usize * grid.width + nx as usize] = false;
                }
            }
        }
    }
    mask
}

const MOVES: [(i64, i64); 8] = [(1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (1, -1), (-1, 1), (-1, -1)];

/// Neighbours of `i` with step costs in cells: 8-connected, no corner
/// cutting past an impassable cell.
pub fn neighbours(width: usize, height: usize, mask: &[bool], i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
    let (x, y) = ((i % width) as i64, (i / width) as i64);
    let ok = move |x: i64, y: i64| x >= 0 && y >= 0 && x < width as i64 && y < height as i64 && mask[y as usize * width + x as usize];
    MOVES.iter().filter_map(move |&(dx, dy)| {
        let (nx, ny) = (x + dx, y + dy);
        if !ok(nx, ny) {
            return None;
        }
        if dx != 0 && dy != 0 && !(ok(x + dx, y) && ok(x, y + dy)) {
            return None;
        }
        let c = if dx != 0 && dy != 0 { std::f64::consts::SQRT_2 } else { 1.0 };
        Some((ny as usize * width + nx as usize, c))
    })
}

#[derive(Clone, Copy, PartialEq)]
struct Entry {
    f: f64,
    g: f64,
    i: usize,
}

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, o: &Self) -> Ordering {
        // Min-heap on f, then larger g (deeper) first, then index.
        o.f.total_cmp(&self.f).then(self.g.total_cmp(&o.g)).then(o.i.cmp(&self.i))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

/// A* between two cells over `mask`; costs in cells. Returns the cell
/// sequence and its cost.
pub fn astar_cells(grid: &OccupancyGrid, mask: &[bool], start: usize, goal: usize) -> Result<(Vec<usize>, f64), PlanError> {
    if !mask[start] {
        return Err(PlanError::StartOccupied);
    }
    if !mask[goal] {
        return Err(PlanError::NoPath);
    }
    let w = grid.width;
    let (gx, gy) = ((goal % w) as f64, (goal / w) as f64);
    let hfun = |i: usize| {
        let (x, y) = ((i % w) as f64, (i / w) as f64);
        // Octile distance: exact on an empty grid and consistent.
        let (dx, dy) = ((x - gx).abs(), (y - gy).abs());
        dx.max(dy) + (std::f64::consts::SQRT_2 - 1.0) * dx.min(dy)
    };
    let mut g = vec![f64::INFINITY; grid.len()];
    let mut prev = vec![usize::MAX; grid.len()];
    let mut closed = vec![false; grid.len()];
    let mut open = BinaryHeap::new();
    g[start] = 0.0;
    open.push(Entry { f: hfun(start), g: 0.0, i: start });
    while let Some(Entry { g: gc, i, .. }) = open.pop() {
        if closed[i] {
            continue;
        }
        closed[i] = true;
        if i == goal {
            let mut cells = vec![goal];
            let mut c = goal;
            while c != start {
                c = prev[c];
                cells.push(c);
            }
            cells.reverse();
            return Ok((cells, gc));
        }
        for (n, c) in neighbours(w, grid.height, mask, i) {
            let ng = gc + c;
            if ng < g[n] - 1e-12 {
                g[n] = ng;
                prev[n] = i;
                open.push(Entry { f: ng + hfun(n), g: ng, i: n });
            }
        }
    }
    Err(PlanError::NoPath)
}

/// Shortest grid path over Free cells (Unknown and Occupied impassable).
pub fn plan_grid(grid: &OccupancyGrid, start: usize, goal: usize) -> Result<Path, PlanError> {
    let mask: Vec<bool> = grid.cells().iter().map(|c| *c == Cell::Free).collect();
    plan_on_mask(grid, &mask, start, goal)
}

pub fn plan_on_mask(grid: &OccupancyGrid, mask: &[bool], start: usize, goal: usize) -> Result<Path, PlanError> {
    let (cells, _) = astar_cells(grid, mask, start, goal)?;
    Ok(Path::from_points(cells.iter().map(|&i| grid.center(i)).collect()))
}

/// Passable cell nearest to `p`, preferring the cell containing it.
pub fn nearest_passable(grid: &OccupancyGrid, mask: &[bool], p: Vec2) -> Option<usize> {
    if let Some(i) = grid.index_of(p).filter(|&i| mask[i]) {
        return Some(i);
    }
    (0..grid.len()).filter(|&i| mask[i]).min_by(|&a, &b| grid.center(a).distance(p).total_cmp(&grid.center(b).distance(p)).then(a.cmp(&b)))
}

/// Path cost in cells from `start` to every cell (Dijkstra).
pub fn distance_field(grid: &OccupancyGrid, mask: &[bool], start: usize) -> Vec<f64> {
    let mut d = vec![f64::INFINITY; grid.len()];
    if !mask[start] {
        return d;
    }
    let mut open = BinaryHeap::new();
    d[start] = 0.0;
    open.push(Entry { f: 0.0, g: 0.0, i: start });
    while let Some(Entry { f, i, .. }) = open.pop() {
        if f > d[i] {
            continue;
        }
        for (n, c) in neighbours(grid.width, grid.height, mask, i) {
            if f + c < d[n] {
                d[n] = f + c;
                open.push(Entry { f: d[n], g: 0.0, i: n });
            }
        }
    }
    d
}

/// Whether the straight segment between two cell centers stays on `mask`
/// cells and, where it crosses a cell corner, on both adjacent cells.
pub fn line_of_sight(grid: &OccupancyGrid, mask: &[bool], a: usize, b: usize) -> bool {
    let pa = grid.center(a);
    let pb = grid.center(b);
    for (key, _) in grid.traverse(pa, pb) {
        match grid.index_of_key(key) {
            Some(i) if mask[i] => {}
            _ => return false,
        }
    }
    true
}

/// Drop intermediate cells while the straight line to a later cell is
/// clear.
pub fn shortcut(grid: &OccupancyGrid, mask: &[bool], cells: &[usize]) -> Vec<usize> {
    let Some(&first) = cells.first() else { return Vec::new() };
    let mut out = vec![first];
    let mut i = 0;
    while i + 1 < cells.len() {
        let mut j = cells.len() - 1;
        while j > i + 1 && !line_of_sight(grid, mask, cells[i], cells[j]) {
            j -= 1;
        }
        out.push(cells[j]);
        i = j;
    }
    out
}
