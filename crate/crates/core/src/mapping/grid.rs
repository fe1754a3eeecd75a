use serde::{Deserialize, Serialize};

use crate::pgm::GrayImage;
use crate::world::{FreeRay, Observation};
use crate::{Rect, Vec2};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Cell {
    Unknown,
    Free,
    Occupied,
}

/// Planar tri-state grid. Cells are aligned to the world lattice
/// (`origin` is a multiple of `resolution`), so a cell keeps its integer key
/// when the grid grows.
#[derive(Clone, Debug, PartialEq)]
pub struct OccupancyGrid {
    pub resolution: f64,
    /// Integer key of cell (0, 0).
    pub offset: (i64, i64),
    pub width: usize,
    pub height: usize,
    cells: Vec<Cell>,
    /// Cells that received surface evidence, whatever their state. A grazing
    /// ray can carve a wall-face cell before any hit lands in it.
    struck: Vec<bool>,
}

/// How far the grid is grown past a point that falls outside it.
const GROW_MARGIN: f64 = 2.0;

impl OccupancyGrid {
    pub fn new(resolution: f64, bounds: Rect) -> Self {
        assert!(resolution > 0.0);
        let x0 = (bounds.min.x / resolution).floor() as i64;
        let y0 = (bounds.min.y / resolution).floor() as i64;
        let x1 = (bounds.max.x / resolution).ceil() as i64;
        let y1 = (bounds.max.y / resolution).ceil() as i64;
        let width = (x1 - x0).max(1) as usize;
        let height = (y1 - y0).max(1) as usize;
        Self { resolution, offset: (x0, y0), width, height, cells: vec![Cell::Unknown; width * height], struck: vec![false; width * height] }
    }

    pub fn origin(&self) -> Vec2 {
        Vec2::new(self.offset.0 as f64 * self.resolution, self.offset.1 as f64 * self.resolution)
    }

    pub fn bounds(&self) -> Rect {
        let o = self.origin();
        Rect::new(o, o + Vec2::new(self.width as f64 * self.resolution, self.height as f64 * self.resolution))
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// World lattice key of the cell containing `p`.
    pub fn key_of(&self, p: Vec2) -> (i64, i64) {
        ((p.x / self.resolution).floor() as i64, (p.y / self.resolution).floor() as i64)
    }

    pub fn index_of_key(&self, k: (i64, i64)) -> Option<usize> {
        let x = k.0 - self.offset.0;
        let y = k.1 - self.offset.1;
        (x >= 0 && y >= 0 && (x as usize) < self.width && (y as usize) < self.height)
            .then(|| y as usize * self.width + x as usize)
    }

    pub fn index_of(&self, p: Vec2) -> Option<usize> {
        self.index_of_key(self.key_of(p))
    }

    pub fn key_of_index(&self, i: usize) -> (i64, i64) {
        ((i % self.width) as i64 + self.offset.0, (i / self.width) as i64 + self.offset.1)
    }

    pub fn xy(&self, i: usize) -> (usize, usize) {
        (i % self.width, i / self.width)
    }

    pub fn index(&self, x: usize, y: usize) -> usize {
        y * self.width + x
    }

    pub fn center(&self, i: usize) -> Vec2 {
        let (kx, ky) = self.key_of_index(i);
        Vec2::new((kx as f64 + 0.5) * self.resolution, (ky as f64 + 0.5) * self.resolution)
    }

    pub fn get(&self, i: usize) -> Cell {
        self.cells[i]
    }

    pub fn at(&self, p: Vec2) -> Cell {
        self.index_of(p).map_or(Cell::Unknown, |i| self.cells[i])
    }

    /// Whether cell `i` holds surface evidence.
    pub fn struck(&self, i: usize) -> bool {
        self.struck[i]
    }

    /// Occupied, or Free but touched by a surface: not safe to stand in.
    pub fn blocked(&self, i: usize) -> bool {
        self.cells[i] == Cell::Occupied || self.struck[i]
    }

    pub fn set(&mut self, i: usize, c: Cell) {
        self.cells[i] = c;
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn count(&self, c: Cell) -> usize {
        self.cells.iter().filter(|&&x| x == c).count()
    }

    /// 4-neighbours of cell `i` inside the grid.
    pub fn neighbors4(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        let (x, y) = self.xy(i);
        let w = self.width;
        let h = self.height;
        [(x > 0).then(|| i - 1), (x + 1 < w).then(|| i + 1), (y > 0).then(|| i - w), (y + 1 < h).then(|| i + w)]
            .into_iter()
            .flatten()
    }

    /// Reallocate so that `r` is covered; existing cells keep their keys.
    pub fn ensure_contains(&mut self, r: Rect) {
        let b = self.bounds();
        if b.min.x <= r.min.x && b.min.y <= r.min.y && b.max.x >= r.max.x && b.max.y >= r.max.y {
            return;
        }
        let grow = |lo: f64, hi: f64, want_lo: f64, want_hi: f64| {
            (if want_lo < lo { want_lo - GROW_MARGIN } else { lo }, if want_hi > hi { want_hi + GROW_MARGIN } else { hi })
        };
        let (x0, x1) = grow(b.min.x, b.max.x, r.min.x, r.max.x);
        let (y0, y1) = grow(b.min.y, b.max.y, r.min.y, r.max.y);
        let mut next = OccupancyGrid::new(self.resolution, Rect::new(Vec2::new(x0, y0), Vec2::new(x1, y1)));
        // Never shrink because of rounding.
        next.offset = (next.offset.0.min(self.offset.0), next.offset.1.min(self.offset.1));
        let end_x = (self.offset.0 + self.width as i64).max(next.offset.0 + next.width as i64);
        let end_y = (self.offset.1 + self.height as i64).max(next.offset.1 + next.height as i64);
        next.width = (end_x - next.offset.0) as usize;
        next.height = (end_y - next.offset.1) as usize;
        next.cells = vec![Cell::Unknown; next.width * next.height];
        next.struck = vec![false; next.width * next.height];
        for i in 0..self.cells.len() {
            let j = next.index_of_key(self.key_of_index(i)).expect("grown grid covers old grid");
            next.cells[j] = self.cells[i];
            next.struck[j] = self.struck[i];
        }
        *self = next;
    }

    /// Free white, occupied black, unknown mid-gray; row 0 at the top.
    pub fn to_image(&self) -> GrayImage {
        let mut img = GrayImage::filled(self.width, self.height, 128);
        for i in 0..self.cells.len() {
            let (x, y) = self.xy(i);
            let v = match self.cells[i] {
                Cell::Unknown => 128,
                Cell::Free => 255,
                Cell::Occupied => 0,
            };
            img.set(x, self.height - 1 - y, v);
        }
        img
    }

    /// Cells traversed by the segment, with the ray parameter (distance from
    /// `a`) at which each is entered.
    pub fn traverse(&self, a: Vec2, b: Vec2) -> Vec<((i64, i64), f64)> {
        let res = self.resolution;
        let d = b - a;
        let len = d.norm();
        let mut key = self.key_of(a);
        let mut out = vec![(key, 0.0)];
        if len <= 0.0 {
            return out;
        }
        let dir = d * (1.0 / len);
        let step = |v: f64| if v > 0.0 { 1 } else if v < 0.0 { -1 } else { 0 };
        let (sx, sy) = (step(dir.x), step(dir.y));
        let next_boundary = |k: i64, s: i64| if s > 0 { (k + 1) as f64 * res } else { k as f64 * res };
        let mut t_max_x = if sx != 0 { (next_boundary(key.0, sx) - a.x) / dir.x } else { f64::INFINITY };
        let mut t_max_y = if sy != 0 { (next_boundary(key.1, sy) - a.y) / dir.y } else { f64::INFINITY };
        let t_dx = if sx != 0 { res / dir.x.abs() } else { f64::INFINITY };
        let t_dy = if sy != 0 { res / dir.y.abs() } else { f64::INFINITY };
        loop {
            let t = t_max_x.min(t_max_y);
            if t >= len {
                break;
            }
            if t_max_x < t_max_y {
                key.0 += sx;
                t_max_x += t_dx;
            } else {
                key.1 += sy;
                t_max_y += t_dy;
            }
            out.push((key, t));
        }
        out
    }
}

/// Fold one observation into the grid.
///
/// Surface evidence is written first (wall points, detection voxels, ray
/// hits), then rays carve free space. Both states latch: a cell leaves
/// Unknown at most once. The last half cell before a ray hit is not carved,
/// so grazing rays do not punch holes into walls.
pub fn update_occupancy(grid: &mut OccupancyGrid, obs: &Observation) {
    if obs.wall_points.is_empty() && obs.detections.is_empty() && obs.free_rays.is_empty() {
        return;
    }
    let mut extent = Rect::new(obs.pose.position, obs.pose.position);
    let mut include = |p: Vec2| {
        extent.min = Vec2::new(extent.min.x.min(p.x), extent.min.y.min(p.y));
        extent.max = Vec2::new(extent.max.x.max(p.x), extent.max.y.max(p.y));
    };
    for r in &obs.free_rays {
        include(r.end);
    }
    for p in &obs.wall_points {
        include(p.xy());
    }
    for d in &obs.detections {
        for c in d.voxels.centers() {
            include(c.xy());
        }
    }
    grid.ensure_contains(extent);

    let mark = |grid: &mut OccupancyGrid, p: Vec2| {
        if let Some(i) = grid.index_of(p) {
            grid.struck[i] = true;
            if grid.cells[i] == Cell::Unknown {
                grid.cells[i] = Cell::Occupied;
            }
        }
    };
    for p in &obs.wall_points {
        mark(grid, p.xy());
    }
    for d in &obs.detections {
        for c in d.voxels.centers() {
            mark(grid, c.xy());
        }
    }
    for r in obs.free_rays.iter().filter(|r| r.hit) {
        let dir = (r.end - r.origin).normalized();
        mark(grid, r.end + dir.map_or(Vec2::zero(), |d| d * 1e-6));
    }
    for r in &obs.free_rays {
        carve(grid, r);
    }
}

fn carve(grid: &mut OccupancyGrid, r: &FreeRay) {
    let len = r.origin.distance(r.end);
    let stop = if r.hit { len - 0.5 * grid.resolution } else { len };
    for (k, t) in grid.traverse(r.origin, r.end) {
        if t >= stop {
            break;
        }
        if let Some(i) = grid.index_of_key(k) {
            if grid.cells[i] == Cell::Unknown {
                grid.cells[i] = Cell::Free;
            }
        }
    }
}
