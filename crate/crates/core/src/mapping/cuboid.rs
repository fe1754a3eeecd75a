//! Largest all-free axis-aligned cuboid in a tri-state voxel grid, by
//! stacking maximal-rectangle-in-histogram solves over z-runs.

use std::ops::Range;

use super::grid::Cell;

/// Largest rectangle under a histogram: (area, column interval). Ties go
/// to the leftmost interval, then the widest.
pub fn largest_rectangle_histogram(heights: &[u32]) -> (u64, Range<usize>) {
    let n = heights.len();
    let mut best: (u64, Range<usize>) = (0, 0..0);
    let mut stack: Vec<usize> = Vec::with_capacity(n + 1);
    // For each bar, the maximal interval where it is the minimum.
    let mut left = vec![0usize; n];
    for i in 0..n {
        while stack.last().is_some_and(|&j| heights[j] >= heights[i]) {
            stack.pop();
        }
        left[i] = stack.last().map_or(0, |&j| j + 1);
        stack.push(i);
    }
    stack.clear();
    let mut right = vec![n; n];
    for i in (0..n).rev() {
        while stack.last().is_some_and(|&j| heights[j] >= heights[i]) {
            stack.pop();
        }
        right[i] = stack.last().copied().unwrap_or(n);
        stack.push(i);
    }
    for i in 0..n {
        let area = heights[i] as u64 * (right[i] - left[i]) as u64;
        if area == 0 {
            continue;
        }
        let better = area > best.0
            || (area == best.0
                && (left[i] < best.1.start || (left[i] == best.1.start && right[i] > best.1.end)));
        if better {
            best = (area, left[i]..right[i]);
        }
    }
    best
}

/// Dense tri-state voxel block, x fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct VoxelGrid {
    pub dims: [usize; 3],
    pub cells: Vec<Cell>,
}

impl VoxelGrid {
    pub fn filled(dims: [usize; 3], c: Cell) -> Self {
        Self { dims, cells: vec![c; dims[0] * dims[1] * dims[2]] }
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        (z * self.dims[1] + y) * self.dims[0] + x
    }

    pub fn get(&self, x: usize, y: usize, z: usize) -> Cell {
        self.cells[self.index(x, y, z)]
    }

    pub fn set(&mut self, x: usize, y: usize, z: usize, c: Cell) {
        let i = self.index(x, y, z);
        self.cells[i] = c;
    }
}

/// Half-open cell ranges along x, y, z.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Cuboid {
    pub x: Range<usize>,
    pub y: Range<usize>,
    pub z: Range<usize>,
}

impl Cuboid {
    pub fn zero() -> Self {
        Self { x: 0..0, y: 0..0, z: 0..0 }
    }

    pub fn volume(&self) -> usize {
        self.x.len() * self.y.len() * self.z.len()
    }
}

/// Largest rectangle of `true` cells in a row-major `w`x`h` mask, as
/// (area, x range, y range).
fn largest_rectangle_2d(mask: &[bool], w: usize, h: usize) -> (u64, Range<usize>, Range<usize>) {
    let mut heights = vec![0u32; w];
    let mut best = (0u64, 0..0, 0..0);
    for y in 0..h {
        for x in 0..w {
            heights[x] = if mask[y * w + x] { heights[x] + 1 } else { 0 };
        }
        let (area, cols) = largest_rectangle_histogram(&heights);
        if area > best.0 {
            let hmin = cols.clone().map(|x| heights[x]).min().unwrap_or(0) as usize;
            best = (area, cols, y + 1 - hmin..y + 1);
        }
    }
    best
}

/// Maximum-volume cuboid whose cells are all Free. Unknown cells are not
/// free. Returns the zero cuboid when no cell is Free.
pub fn largest_empty_cuboid(g: &VoxelGrid) -> Cuboid {
    let [nx, ny, nz] = g.dims;
    let mut best = Cuboid::zero();
    let mut mask = vec![false; nx * ny];
    for z0 in 0..nz {
        for (i, m) in mask.iter_mut().enumerate() {
            *m = g.cells[z0 * nx * ny + i] == Cell::Free;
        }
        for z1 in z0..nz {
            if z1 > z0 {
                let layer = &g.cells[z1 * nx * ny..(z1 + 1) * nx * ny];
                let mut any = false;
                for (m, c) in mask.iter_mut().zip(layer) {
                    *m = *m && *c == Cell::Free;
                    any |= *m;
                }
                if !any {
                    break;
                }
            }
            let depth = z1 - z0 + 1;
            // The footprint can only shrink as the run deepens; skip solves
            // that cannot beat the incumbent.
            let free = mask.iter().filter(|&&m| m).count();
            if (free * depth) <= best.volume() {
                continue;
            }
            let (area, xs, ys) = largest_rectangle_2d(&mask, nx, ny);
            if area as usize * depth > best.volume() {
                best = Cuboid { x: xs, y: ys, z: z0..z1 + 1 };
            }
        }
    }
    best
}
