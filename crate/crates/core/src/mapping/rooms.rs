//! Room segmentation: connected components of free space once confirmed
//! walls and doors are drawn into the grid as barriers.

use std::collections::{BTreeSet, VecDeque};

use thiserror::Error;

use super::grid::{Cell, OccupancyGrid};
use crate::{OrientedBox, Rect, Vec2, Vec3};

#[derive(Debug, Error, PartialEq)]
pub enum RoomError {
    #[error("the grid has no free cell")]
    NoFreeSpace,
}

/// One segmented room: member cells (lattice keys), bounding footprint and
/// the mean of the member cell centers.
#[derive(Clone, Debug, PartialEq)]
pub struct RoomRegion {
    pub cells: BTreeSet<(i64, i64)>,
    pub footprint: Rect,
    pub centroid: Vec2,
}

/// Grid cells covered by any barrier box grown by one cell.
pub fn barrier_mask(grid: &OccupancyGrid, barriers: &[OrientedBox]) -> Vec<bool> {
    let mut mask = vec![false; grid.len()];
    let r = grid.resolution;
    for b in barriers {
        let grown = OrientedBox::new(b.center, b.half_extents + Vec3::new(r, r, 0.0), b.yaw);
        let Some(bb) = Rect::bounding(&grown.footprint()) else { continue };
        let (x0, y0) = grid.key_of(bb.min);
        let (x1, y1) = grid.key_of(bb.max);
        for ky in y0..=y1 {
            for kx in x0..=x1 {
                let Some(i) = grid.index_of_key((kx, ky)) else { continue };
                if grown.contains_point_2d(grid.center(i)) {
                    mask[i] = true;
                }
            }
        }
    }
    mask
}

/// Partition the free cells into rooms. Components smaller than
/// `min_area` are absorbed into the large component that reaches them
/// first through free space off the barriers; fragments no large
/// component reaches that way are dropped. With no large component at all the largest fragment stands in.
pub fn segment_rooms(grid: &OccupancyGrid, barriers: &[OrientedBox], min_area: f64) -> Result<Vec<RoomRegion>, RoomError> {
    let free: Vec<bool> = grid.cells().iter().map(|c| *c == Cell::Free).collect();
    if !free.iter().any(|&f| f) {
        return Err(RoomError::NoFreeSpace);
    }
    let blocked = barrier_mask(grid, barriers);
    let open = |i: usize| free[i] && !blocked[i];

    let mut comp = vec![usize::MAX; grid.len()];
    let mut sizes = Vec::new();
    let mut queue = VecDeque::new();
    for s in 0..grid.len() {
        if !open(s) || comp[s] != usize::MAX {
            continue;
        }
        let c = sizes.len();
        comp[s] = c;
        queue.push_back(s);
        let mut n = 0usize;
        while let Some(i) = queue.pop_front() {
            n += 1;
            for j in grid.neighbors4(i) {
                if open(j) && comp[j] == usize::MAX {
                    comp[j] = c;
                    queue.push_back(j);
                }
            }
        }
        sizes.push(n);
    }
    let cell_area = grid.resolution * grid.resolution;
    let mut large: Vec<bool> = sizes.iter().map(|&n| n as f64 * cell_area >= min_area - 1e-9).collect();
    if !large.iter().any(|&l| l) {
        if let Some(best) = (0..sizes.len()).max_by_key(|&c| (sizes[c], std::cmp::Reverse(c))) {
            large[best] = true;
        }
    }

    // Multi-source BFS from large components over every free cell.
    let mut owner = vec![usize::MAX; grid.len()];
    for i in 0..grid.len() {
        if comp[i] != usize::MAX && large[comp[i]] {
            owner[i] = comp[i];
            queue.push_back(i);
        }
    }
    while let Some(i) = queue.pop_front() {
        for j in grid.neighbors4(i) {
            if open(j) && owner[j] == usize::MAX {
                owner[j] = owner[i];
                queue.push_back(j);
            }
        }
    }

    let mut regions: Vec<Option<(BTreeSet<(i64, i64)>, Vec2)>> = vec![None; sizes.len()];
    for i in 0..grid.len() {
        let o = owner[i];
        if o == usize::MAX {
            continue;
        }
        let entry = regions[o].get_or_insert_with(|| (BTreeSet::new(), Vec2::zero()));
        entry.0.insert(grid.key_of_index(i));
        entry.1 += grid.center(i);
    }
    let r = grid.resolution;
    Ok(regions
        .into_iter()
        .flatten()
        .map(|(cells, sum)| {
            let (mut x0, mut y0, mut x1, mut y1) = (i64::MAX, i64::MAX, i64::MIN, i64::MIN);
            for &(x, y) in &cells {
                x0 = x0.min(x);
                y0 = y0.min(y);
                x1 = x1.max(x);
                y1 = y1.max(y);
            }
            let footprint =
                Rect::new(Vec2::new(x0 as f64 * r, y0 as f64 * r), Vec2::new((x1 + 1) as f64 * r, (y1 + 1) as f64 * r));
            let centroid = sum * (1.0 / cells.len() as f64);
            RoomRegion { cells, footprint, centroid }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Two 3 x 3 m rooms side by side with a wall at x = 3 and a door gap
    /// in it between y = 1 and y = 2.
    fn two_rooms() -> (OccupancyGrid, OrientedBox, OrientedBox) {
        let mut g = OccupancyGrid::new(0.1, Rect::new(Vec2::zero(), Vec2::new(6.0, 3.0)));
        for i in 0..g.len() {
            let c = g.center(i);
            let wall = (c.x - 3.0).abs() < 0.1 && !(1.0..2.0).contains(&c.y);
            g.set(i, if wall { Cell::Occupied } else { Cell::Free });
        }
        let wall = OrientedBox::new(Vec3::new(3.0, 0.5, 1.0), Vec3::new(0.05, 0.5, 1.0), 0.0);
        let door = OrientedBox::new(Vec3::new(3.0, 1.5, 1.0), Vec3::new(0.05, 0.5, 1.0), 0.0);
        (g, wall, door)
    }

    #[test]
    fn door_splits_rooms() {
        let (g, wall, door) = two_rooms();
        assert_eq!(segment_rooms(&g, &[wall], 1.0).unwrap().len(), 1);
        let rooms = segment_rooms(&g, &[wall, door], 1.0).unwrap();
        assert_eq!(rooms.len(), 2);
        for r in &rooms {
            let a = r.footprint.area();
            assert!(a > 7.0 && a < 9.01, "area {a}");
        }
        let mut xs: Vec<f64> = rooms.iter().map(|r| r.centroid.x).collect();
        xs.sort_by(f64::total_cmp);
        assert!((xs[0] - 1.45).abs() < 0.1 && (xs[1] - 4.55).abs() < 0.1, "{xs:?}");
    }

    #[test]
    fn isolated_fragment_dropped() {
        let (mut g, wall, door) = two_rooms();
        // A 0.3 x 0.3 pocket walled off in the corner of the left room.
        for i in 0..g.len() {
            let c = g.center(i);
            if (0.0..0.5).contains(&c.x) && (2.5..3.0).contains(&c.y) && !((0.0..0.3).contains(&c.x) && c.y > 2.7) {
                g.set(i, Cell::Occupied);
            }
        }
        let rooms = segment_rooms(&g, &[wall, door], 1.0).unwrap();
        assert_eq!(rooms.len(), 2);
        let pocket = g.key_of(Vec2::new(0.15, 2.85));
        assert!(rooms.iter().all(|r| !r.cells.contains(&pocket)));
    }

    #[test]
    fn no_free_space() {
        let g = OccupancyGrid::new(0.1, Rect::new(Vec2::zero(), Vec2::new(1.0, 1.0)));
        assert_eq!(segment_rooms(&g, &[], 1.0), Err(RoomError::NoFreeSpace));
    }
}
