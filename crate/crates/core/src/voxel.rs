//! Sparse voxel sets on a regular lattice.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::{Aabb, Vec3};

pub type VoxelKey = [i64; 3];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VoxelSet {
    pub resolution: f64,
    pub cells: BTreeSet<VoxelKey>,
}

impl VoxelSet {
    pub fn new(resolution: f64) -> Self {
        assert!(resolution > 0.0, "voxel resolution must be positive");
        Self { resolution, cells: BTreeSet::new() }
    }

    pub fn from_cells(resolution: f64, cells: impl IntoIterator<Item = VoxelKey>) -> Self {
        let mut s = Self::new(resolution);
        s.cells.extend(cells);
        s
    }

    pub fn key_of(&self, p: Vec3) -> VoxelKey {
        key_of(p, self.resolution)
    }

    pub fn center_of(&self, k: VoxelKey) -> Vec3 {
        center_of(k, self.resolution)
    }

    pub fn insert_point(&mut self, p: Vec3) {
        let k = self.key_of(p);
        self.cells.insert(k);
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn union_with(&mut self, o: &VoxelSet) {
        self.cells.extend(o.cells.iter().copied());
    }

    pub fn intersection_count(&self, o: &VoxelSet) -> usize {
        let (small, big) = if self.len() <= o.len() { (self, o) } else { (o, self) };
        small.cells.iter().filter(|k| big.cells.contains(*k)).count()
    }

    pub fn centers(&self) -> impl Iterator<Item = Vec3> + '_ {
        self.cells.iter().map(|&k| self.center_of(k))
    }

    /// Bounding box of the voxel cubes (not just their centers).
    pub fn bounds(&self) -> Option<Aabb> {
        let r = self.resolution;
        let mut it = self.cells.iter();
        let first = *it.next()?;
        let (mut lo, mut hi) = (first, first);
        for k in it {
            for a in 0..3 {
                lo[a] = lo[a].min(k[a]);
                hi[a] = hi[a].max(k[a]);
            }
        }
        Some(Aabb::new(
            Vec3::new(lo[0] as f64 * r, lo[1] as f64 * r, lo[2] as f64 * r),
            Vec3::new((hi[0] + 1) as f64 * r, (hi[1] + 1) as f64 * r, (hi[2] + 1) as f64 * r),
        ))
    }
}

pub fn key_of(p: Vec3, res: f64) -> VoxelKey {
    [(p.x / res).floor() as i64, (p.y / res).floor() as i64, (p.z / res).floor() as i64]
}

pub fn center_of(k: VoxelKey, res: f64) -> Vec3 {
    Vec3::new((k[0] as f64 + 0.5) * res, (k[1] as f64 + 0.5) * res, (k[2] as f64 + 0.5) * res)
}
