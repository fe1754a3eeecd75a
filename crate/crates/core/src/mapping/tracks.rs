use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scene_graph::NodeId;
use crate::voxel::VoxelSet;
use crate::world::Detection;
use crate::{Vec2, Vec3};

#[derive(Debug, Error, PartialEq)]
pub enum VoxelError {
    #[error("voxel resolutions differ: {0} vs {1}")]
    ResolutionMismatch(f64, f64),
    #[error("IoU of two empty sets is undefined")]
    BothEmpty,
}

/// Intersection over union of two voxel sets on the same lattice.
pub fn voxel_iou(a: &VoxelSet, b: &VoxelSet) -> Result<f64, VoxelError> {
    if a.resolution != b.resolution {
        return Err(VoxelError::ResolutionMismatch(a.resolution, b.resolution));
    }
    if a.is_empty() && b.is_empty() {
        return Err(VoxelError::BothEmpty);
    }
    let inter = a.intersection_count(b);
    Ok(inter as f64 / (a.len() + b.len() - inter) as f64)
}

/// |a ∩ b| / min(|a|, |b|): 1 when one set contains the other.
pub fn overlap_coefficient(a: &VoxelSet, b: &VoxelSet) -> f64 {
    let m = a.len().min(b.len());
    if m == 0 || a.resolution != b.resolution {
        return 0.0;
    }
    a.intersection_count(b) as f64 / m as f64
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Track {
    pub id: u64,
    pub label: String,
    pub voxels: VoxelSet,
    pub last_seen: f64,
    pub hit_count: u32,
    pub active: bool,
    /// Object node the track is rendered as.
    pub node: Option<NodeId>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Association {
    /// (track index, detection index)
    pub matches: Vec<(usize, usize)>,
    /// Detections that start new tracks.
    pub new_tracks: Vec<usize>,
    /// Active tracks unseen for longer than tau.
    pub terminated: Vec<usize>,
}

/// Greedy one-to-one association by descending IoU among same-label pairs
/// with IoU at least `iou_min`. Equal IoUs go to the older track first.
pub fn associate_tracks(tracks: &[Track], detections: &[Detection], now: f64, iou_min: f64, tau: f64) -> Association {
    let scores: Vec<Vec<Option<f64>>> = tracks
        .iter()
        .map(|t| {
            detections
                .iter()
                .map(|d| (t.active && d.label == t.label).then(|| voxel_iou(&t.voxels, &d.voxels).ok()).flatten())
                .collect()
        })
        .collect();
    let ids: Vec<u64> = tracks.iter().map(|t| t.id).collect();
    let matches = greedy_assignment(&scores, &ids, iou_min);
    let mut used_t = vec![false; tracks.len()];
    let mut used_d = vec![false; detections.len()];
    for &(t, d) in &matches {
        used_t[t] = true;
        used_d[d] = true;
    }
    Association {
        new_tracks: (0..detections.len()).filter(|&d| !used_d[d]).collect(),
        terminated: (0..tracks.len())
            .filter(|&t| tracks[t].active && !used_t[t] && now - tracks[t].last_seen > tau)
            .collect(),
        matches,
    }
}

/// Greedy matching on a track x detection score table; `None` marks
/// forbidden pairs. Pairs are taken by descending score, then ascending
/// track id, then detection index. Output sorted by track index.
pub fn greedy_assignment(scores: &[Vec<Option<f64>>], track_ids: &[u64], min_score: f64) -> Vec<(usize, usize)> {
    let mut pairs = Vec::new();
    for (ti, row) in scores.iter().enumerate() {
        for (di, s) in row.iter().enumerate() {
            if let Some(s) = *s {
                if s >= min_score && s > 0.0 {
                    pairs.push((s, track_ids[ti], ti, di));
                }
            }
        }
    }
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.3.cmp(&b.3)));
    let n_det = scores.first().map_or(0, Vec::len);
    let mut used_t = vec![false; scores.len()];
    let mut used_d = vec![false; n_det];
    let mut out = Vec::new();
    for (_, _, ti, di) in pairs {
        if used_t[ti] || used_d[di] {
            continue;
        }
        used_t[ti] = true;
        used_d[di] = true;
        out.push((ti, di));
    }
    out.sort_unstable();
    out
}

/// Smallest-footprint yaw-aligned box around voxel cubes, searched in 1°
/// steps over [0, 90°). Returns (center, half extents, yaw).
pub fn fit_box(voxels: &VoxelSet) -> Option<(Vec3, Vec3, f64)> {
    if voxels.is_empty() {
        return None;
    }
    let r = voxels.resolution;
    let pts: Vec<Vec3> = voxels.centers().collect();
    let (zmin, zmax) = pts.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p.z), hi.max(p.z)));
    let mut best: Option<(f64, f64, [f64; 4])> = None;
    for deg in 0..90 {
        let yaw = (deg as f64).to_radians();
        let (s, c) = yaw.sin_cos();
        let mut b = [f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY];
        for p in &pts {
            let u = c * p.x + s * p.y;
            let v = -s * p.x + c * p.y;
            b = [b[0].min(u), b[1].max(u), b[2].min(v), b[3].max(v)];
        }
        let area = (b[1] - b[0] + r) * (b[3] - b[2] + r);
        if best.is_none_or(|(a, _, _)| area < a - 1e-12) {
            best = Some((area, yaw, b));
        }
    }
    let (_, yaw, b) = best?;
    let local = Vec2::new((b[0] + b[1]) / 2.0, (b[2] + b[3]) / 2.0);
    let center = local.rotate(yaw).with_z((zmin + zmax) / 2.0);
    let half = Vec3::new((b[1] - b[0] + r) / 2.0, (b[3] - b[2] + r) / 2.0, (zmax - zmin + r) / 2.0);
    Some((center, half, yaw))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vs(cells: &[[i64; 3]]) -> VoxelSet {
        VoxelSet::from_cells(0.1, cells.iter().copied())
    }

    fn det(label: &str, cells: &[[i64; 3]]) -> Detection {
        Detection { label: label.into(), voxels: vs(cells) }
    }

    fn track(id: u64, label: &str, cells: &[[i64; 3]]) -> Track {
        Track { id, label: label.into(), voxels: vs(cells), last_seen: 0.0, hit_count: 1, active: true, node: None }
    }

    #[test]
    fn iou_cases() {
        let a = vs(&[[0, 0, 0], [1, 0, 0]]);
        assert_eq!(voxel_iou(&a, &a).unwrap(), 1.0);
        assert_eq!(voxel_iou(&a, &vs(&[[5, 5, 5]])).unwrap(), 0.0);
        let b = vs(&[[1, 0, 0], [2, 0, 0]]);
        assert!((voxel_iou(&a, &b).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(voxel_iou(&vs(&[]), &vs(&[])), Err(VoxelError::BothEmpty));
        let c = VoxelSet::from_cells(0.2, [[0, 0, 0]]);
        assert!(matches!(voxel_iou(&a, &c), Err(VoxelError::ResolutionMismatch(..))));
    }

    /// Boxes of n*n*1 cells starting at x offset `x0`.
    fn slab(x0: i64, n: i64) -> Vec<[i64; 3]> {
        let mut v = Vec::new();
        for x in x0..x0 + n {
            for y in 0..n {
                v.push([x, y, 0]);
            }
        }
        v
    }

    #[test]
    fn label_gate() {
        let t = [track(1, "chair", &slab(0, 4))];
        let a = associate_tracks(&t, &[det("table", &slab(0, 4))], 1.0, 0.3, 5.0);
        assert!(a.matches.is_empty());
        assert_eq!(a.new_tracks, vec![0]);
        let a = associate_tracks(&t, &[det("chair", &slab(0, 4))], 1.0, 0.3, 5.0);
        assert_eq!(a.matches, vec![(0, 0)]);
    }

    #[test]
    fn greedy_order() {
        let m = [[0.9, 0.5], [0.8, 0.7]];
        let scores: Vec<Vec<Option<f64>>> = m.iter().map(|r| r.iter().map(|&v| Some(v)).collect()).collect();
        // Oracle: take the global maximum, strike its row and column, repeat.
        let mut expect = Vec::new();
        let mut alive = [[true; 2]; 2];
        while let Some((i, j)) = (0..2)
            .flat_map(|i| (0..2).map(move |j| (i, j)))
            .filter(|&(i, j)| alive[i][j])
            .max_by(|a, b| m[a.0][a.1].total_cmp(&m[b.0][b.1]))
        {
            expect.push((i, j));
            for k in 0..2 {
                alive[i][k] = false;
                alive[k][j] = false;
            }
        }
        expect.sort_unstable();
        assert_eq!(expect, vec![(0, 0), (1, 1)]);
        assert_eq!(greedy_assignment(&scores, &[1, 2], 0.3), expect);
    }

    #[test]
    fn equal_scores_favor_older_track() {
        let scores = vec![vec![Some(0.5)], vec![Some(0.5)]];
        assert_eq!(greedy_assignment(&scores, &[7, 3], 0.3), vec![(1, 0)]);
    }

    #[test]
    fn voxel_association_is_greedy() {
        let t1: Vec<[i64; 3]> = (0..10).map(|x| [x, 0, 0]).collect();
        let t2: Vec<[i64; 3]> = (0..8).map(|x| [x, 0, 0]).chain([[100, 0, 0]]).collect();
        let d1: Vec<[i64; 3]> = (0..9).map(|x| [x, 0, 0]).collect();
        let d2: Vec<[i64; 3]> = (0..5).map(|x| [x, 0, 0]).collect();
        let tracks = [track(1, "a", &t1), track(2, "a", &t2)];
        let a = associate_tracks(&tracks, &[det("a", &d1), det("a", &d2)], 0.0, 0.3, 5.0);
        assert_eq!(a.matches, vec![(0, 0), (1, 1)]);
        let b = associate_tracks(&tracks, &[det("a", &d2), det("a", &d1)], 0.0, 0.3, 5.0);
        assert_eq!(b.matches, vec![(0, 1), (1, 0)]);
    }

    #[test]
    fn stale_track_terminates() {
        let mut t = track(1, "chair", &slab(0, 3));
        t.last_seen = 0.0;
        let a = associate_tracks(&[t], &[], 6.0, 0.3, 5.0);
        assert_eq!(a.terminated, vec![0]);
    }

    #[test]
    fn box_fit_of_rotated_block() {
        let yaw = 0.3_f64;
        let mut v = VoxelSet::new(0.05);
        for i in -30..=30 {
            for j in -10..=10 {
                for k in 0..6 {
                    let p = Vec2::new(i as f64 * 0.02, j as f64 * 0.02).rotate(yaw) + Vec2::new(2.0, 1.0);
                    v.insert_point(p.with_z(k as f64 * 0.05 + 0.01));
                }
            }
        }
        let (c, h, y) = fit_box(&v).unwrap();
        assert!((y - yaw).abs() < 0.035, "yaw {y}");
        assert!(c.xy().distance(Vec2::new(2.0, 1.0)) < 0.05);
        assert!((h.x - 0.6).abs() < 0.08 && (h.y - 0.2).abs() < 0.08, "{h:?}");
    }
}
