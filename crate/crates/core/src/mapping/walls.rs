//! Wall extraction: RANSAC planes split by Euclidean clustering, then
//! accumulation of wall segments across observations.

use std::collections::{BTreeMap, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::grid::{Cell, OccupancyGrid};
use crate::scene_graph::{NodeId, Plane, StructureKind, StructureNode};
use crate::world::DOOR_HEIGHT;
use crate::{OrientedBox, Vec2, Vec3};

#[derive(Debug, Error, PartialEq)]
pub enum WallError {
    #[error("plane fitting needs at least 3 points, got {0}")]
    TooFewPoints(usize),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WallFitConfig {
    pub inlier_dist: f64,
    pub min_inliers: usize,
    pub iterations: usize,
    /// Link distance of the Euclidean clustering of plane inliers.
    pub cluster_dist: f64,
    pub thickness: f64,
    /// Planes whose normal leans more than this (|n.z|) are not walls.
    pub max_normal_z: f64,
    pub max_planes: usize,
    /// Neighbourhood from which the second and third RANSAC samples come.
    pub sample_radius: f64,
    /// Added to both ends of a fitted wall: surface samples sit this far in
    /// from the true edge.
    pub end_padding: f64,
    pub seed: u64,
}

impl Default for WallFitConfig {
    fn default() -> Self {
        Self {
            inlier_dist: 0.05,
            min_inliers: 20,
            iterations: 200,
            cluster_dist: 0.3,
            thickness: 0.1,
            max_normal_z: 0.1,
            max_planes: 24,
            sample_radius: 0.5,
            end_padding: 0.05,
            seed: 0,
        }
    }
}

/// Unit horizontal normal with a canonical sign (angle in [0, pi)).
fn canonical(n: Vec2) -> Vec2 {
    if n.y < -1e-12 || (n.y.abs() <= 1e-12 && n.x < 0.0) {
        -n
    } else {
        n
    }
}

/// Horizontal line direction of the points by principal component.
fn principal_direction(pts: &[Vec3]) -> Option<Vec2> {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.x).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.y).sum::<f64>() / n;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for p in pts {
        let (dx, dy) = (p.x - mx, p.y - my);
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if sxx + syy <= 0.0 {
        return None;
    }
    let theta = 0.5 * (2.0 * sxy).atan2(sxx - syy);
    Some(Vec2::from_angle(theta))
}

fn clusters(points: &[Vec3], link: f64) -> Vec<Vec<usize>> {
    let key = |p: &Vec3| ((p.x / link).floor() as i64, (p.y / link).floor() as i64, (p.z / link).floor() as i64);
    let mut buckets: HashMap<(i64, i64, i64), Vec<usize>> = HashMap::new();
    for (i, p) in points.iter().enumerate() {
        buckets.entry(key(p)).or_default().push(i);
    }
    let mut label = vec![usize::MAX; points.len()];
    let mut out = Vec::new();
    for s in 0..points.len() {
        if label[s] != usize::MAX {
            continue;
        }
        let c = out.len();
        label[s] = c;
        let mut members = vec![s];
        let mut stack = vec![s];
        while let Some(i) = stack.pop() {
            let k = key(&points[i]);
            for dx in -1..=1 {
                for dy in -1..=1 {
                    for dz in -1..=1 {
                        let Some(b) = buckets.get(&(k.0 + dx, k.1 + dy, k.2 + dz)) else { continue };
                        for &j in b {
                            if label[j] == usize::MAX && points[i].distance(points[j]) <= link {
                                label[j] = c;
                                members.push(j);
                                stack.push(j);
                            }
                        }
                    }
                }
            }
        }
        members.sort_unstable();
        out.push(members);
    }
    out
}

/// Iterative RANSAC wall extraction. Each accepted plane is split into
/// Euclidean clusters and every cluster with at least `min_inliers / 2`
/// points becomes one candidate wall whose box is fitted to its inliers.
/// Candidates carry id 0 and observation count 1.
pub fn fit_wall_planes(points: &[Vec3], cfg: &WallFitConfig) -> Result<Vec<StructureNode>, WallError> {
    if points.len() < 3 {
        return Err(WallError::TooFewPoints(points.len()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut residual: Vec<Vec3> = points.to_vec();
    let mut out = Vec::new();
    for _ in 0..cfg.max_planes {
        if residual.len() < cfg.min_inliers.max(3) {
            break;
        }
        // Second and third samples are drawn near the first, so that all
        // three usually land on the same wall.
        let cell = cfg.sample_radius.max(1e-3);
        let bucket_of = |p: &Vec3| ((p.x / cell).floor() as i64, (p.y / cell).floor() as i64);
        let mut buckets: BTreeMap<(i64, i64), Vec<usize>> = BTreeMap::new();
        for (i, p) in residual.iter().enumerate() {
            buckets.entry(bucket_of(p)).or_default().push(i);
        }
        let mut near = Vec::new();
        let mut best: Option<(usize, Vec3, f64)> = None;
        for _ in 0..cfg.iterations {
            let i = rng.gen_range(0..residual.len());
            let (bx, by) = bucket_of(&residual[i]);
            near.clear();
            for dx in -1..=1 {
                for dy in -1..=1 {
                    if let Some(b) = buckets.get(&(bx + dx, by + dy)) {
                        near.extend(b.iter().copied().filter(|&j| j != i));
                    }
                }
            }
            if near.len() < 2 {
                continue;
            }
            let j = near[rng.gen_range(0..near.len())];
            let k = near[rng.gen_range(0..near.len())];
            if j == k {
                continue;
            }
            let (a, b, c) = (residual[i], residual[j], residual[k]);
            let Some(n) = (b - a).cross(c - a).normalized() else { continue };
            if n.z.abs() > cfg.max_normal_z {
                continue;
            }
            let d = n.dot(a);
            let count = residual.iter().filter(|p| (n.dot(**p) - d).abs() <= cfg.inlier_dist).count();
            if best.as_ref().is_none_or(|b| count > b.0) {
                best = Some((count, n, d));
            }
        }
        let Some((count, n, d)) = best else { break };
        if count < cfg.min_inliers {
            break;
        }
        let mut inliers: Vec<Vec3> = residual.iter().copied().filter(|p| (n.dot(*p) - d).abs() <= cfg.inlier_dist).collect();
        // Least-squares refinement of the (vertical) plane from its inliers.
        let (normal, offset) = match principal_direction(&inliers) {
            Some(dir) => {
                let nn = canonical(dir.perp());
                let mean = inliers.iter().map(|p| nn.dot(p.xy())).sum::<f64>() / inliers.len() as f64;
                (nn, mean)
            }
            None => (canonical(n.xy().normalized().unwrap_or(Vec2::new(1.0, 0.0))), d),
        };
        let refined: Vec<Vec3> =
            residual.iter().copied().filter(|p| (normal.dot(p.xy()) - offset).abs() <= cfg.inlier_dist).collect();
        if refined.len() >= inliers.len() {
            inliers = refined;
        }
        residual.retain(|p| {
            (n.dot(*p) - d).abs() > cfg.inlier_dist && (normal.dot(p.xy()) - offset).abs() > cfg.inlier_dist
        });
        let dir = normal.perp();
        for members in clusters(&inliers, cfg.cluster_dist) {
            if members.len() < (cfg.min_inliers / 2).max(3) {
                continue;
            }
            let pts: Vec<Vec3> = members.iter().map(|&i| inliers[i]).collect();
            let s: Vec<f64> = pts.iter().map(|p| dir.dot(p.xy())).collect();
            let (s0, s1) = s.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
            let (z0, z1) = pts.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p.z), b.max(p.z)));
            let pad = cfg.end_padding;
            let seg = WallSegment { normal, offset, s0: s0 - pad, s1: s1 + pad, z0, z1 };
            out.push(seg.to_node(NodeId(0), cfg.thickness, 1));
        }
    }
    Ok(out)
}

/// Wall piece in line coordinates: points `p` with `normal . p = offset`,
/// spanning `[s0, s1]` along `normal.perp()`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WallSegment {
    pub normal: Vec2,
    pub offset: f64,
    pub s0: f64,
    pub s1: f64,
    pub z0: f64,
    pub z1: f64,
}

impl WallSegment {
    /// Inverse of [`WallSegment::to_node`] for boxes whose x axis runs
    /// along the wall.
    pub fn from_node(n: &StructureNode) -> Self {
        let normal = canonical(Vec2::from_angle(n.bbox.yaw).perp());
        let c = n.bbox.center.xy();
        let s = normal.perp().dot(c);
        let (z0, z1) = n.bbox.z_range();
        let h = n.bbox.half_extents.x;
        Self { normal, offset: normal.dot(c), s0: s - h, s1: s + h, z0, z1 }
    }

    pub fn dir(&self) -> Vec2 {
        self.normal.perp()
    }

    pub fn length(&self) -> f64 {
        self.s1 - self.s0
    }

    pub fn point_at(&self, s: f64) -> Vec2 {
        self.normal * self.offset + self.dir() * s
    }

    pub fn to_node(&self, id: NodeId, thickness: f64, observation_count: u32) -> StructureNode {
        let mid = self.point_at((self.s0 + self.s1) / 2.0);
        let yaw = self.dir().angle();
        let half_len = ((self.s1 - self.s0) / 2.0).max(thickness / 2.0);
        StructureNode {
            id,
            kind: StructureKind::Wall,
            plane: Plane { normal: self.normal.with_z(0.0), offset: self.offset },
            bbox: OrientedBox::new(
                mid.with_z((self.z0 + self.z1) / 2.0),
                Vec3::new(half_len, thickness / 2.0, ((self.z1 - self.z0) / 2.0).max(0.01)),
                yaw,
            ),
            observation_count,
        }
    }
}

/// Wall evidence accumulated over observations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WallTrack {
    pub id: u64,
    pub seg: WallSegment,
    /// Number of distinct observations that contributed.
    pub count: u32,
    pub last_obs: u64,
    pub node: Option<NodeId>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WallMergeConfig {
    pub max_angle: f64,
    /// Added to the wall thickness to get the admissible offset difference.
    pub offset_slack: f64,
    pub max_gap: f64,
}

impl Default for WallMergeConfig {
    fn default() -> Self {
        Self { max_angle: 10f64.to_radians(), offset_slack: 0.05, max_gap: 0.3 }
    }
}

fn parallel(a: Vec2, b: Vec2, max_angle: f64) -> bool {
    a.dot(b).abs() >= max_angle.cos()
}

/// Interval of `seg` expressed along `reference`'s direction.
fn project(seg: &WallSegment, reference: &WallSegment) -> (f64, f64) {
    let d = reference.dir();
    let a = d.dot(seg.point_at(seg.s0));
    let b = d.dot(seg.point_at(seg.s1));
    (a.min(b), a.max(b))
}

fn compatible(a: &WallSegment, b: &WallSegment, thickness: f64, cfg: &WallMergeConfig) -> bool {
    if !parallel(a.normal, b.normal, cfg.max_angle) {
        return false;
    }
    let mid_b = b.point_at((b.s0 + b.s1) / 2.0);
    if (a.normal.dot(mid_b) - a.offset).abs() > thickness + cfg.offset_slack {
        return false;
    }
    let (b0, b1) = project(b, a);
    let gap = (b0 - a.s1).max(a.s0 - b1);
    gap <= cfg.max_gap
}

/// Length-weighted union of two nearly collinear segments. The direction
/// is weighted by squared length, so short noisy pieces barely tilt a
/// long wall.
fn merge(a: &WallSegment, wa: f64, b: &WallSegment, wb: f64) -> WallSegment {
    let da = a.dir();
    let db = if b.dir().dot(da) < 0.0 { -b.dir() } else { b.dir() };
    let normal = canonical((da * (wa * wa) + db * (wb * wb)).normalized().unwrap_or(da).perp());
    let mid_a = a.point_at((a.s0 + a.s1) / 2.0);
    let mid_b = b.point_at((b.s0 + b.s1) / 2.0);
    let offset = (normal.dot(mid_a) * wa + normal.dot(mid_b) * wb) / (wa + wb);
    let dir = normal.perp();
    let ends = [a.point_at(a.s0), a.point_at(a.s1), b.point_at(b.s0), b.point_at(b.s1)];
    let (s0, s1) = ends.iter().map(|p| dir.dot(*p)).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    WallSegment { normal, offset, s0, s1, z0: a.z0.min(b.z0), z1: a.z1.max(b.z1) }
}

/// Fold one observation's wall candidates into `tracks`. `candidates` have
/// already been moved from the observed face to the wall center line.
pub fn accumulate_walls(
    tracks: &mut Vec<WallTrack>,
    candidates: &[WallSegment],
    obs_index: u64,
    thickness: f64,
    cfg: &WallMergeConfig,
    next_id: &mut u64,
) {
    for c in candidates {
        let hits: Vec<usize> =
            (0..tracks.len()).filter(|&i| compatible(&tracks[i].seg, c, thickness, cfg)).collect();
        if hits.is_empty() {
            tracks.push(WallTrack { id: *next_id, seg: *c, count: 1, last_obs: obs_index, node: None });
            *next_id += 1;
            continue;
        }
        let keep = hits[0];
        let mut seg = tracks[keep].seg;
        let mut count = tracks[keep].count;
        let mut seen_now = tracks[keep].last_obs == obs_index;
        for &h in &hits[1..] {
            seg = merge(&seg, seg.length().max(0.1), &tracks[h].seg, tracks[h].seg.length().max(0.1));
            count = count.max(tracks[h].count);
            seen_now |= tracks[h].last_obs == obs_index;
        }
        seg = merge(&seg, seg.length().max(0.1), c, c.length().max(0.1) * 0.5);
        if !seen_now {
            count += 1;
        }
        tracks[keep].seg = seg;
        tracks[keep].count = count;
        tracks[keep].last_obs = obs_index;
        for &h in hits[1..].iter().rev() {
            tracks.remove(h);
        }
    }
}

/// Door openings between confirmed collinear walls: gap width within
/// `width_range`, no occupied cell in the opening away from its ends and at
/// least half of it observed free. Returns (wall id pair, door box).
pub fn infer_doors(
    walls: &[&WallTrack],
    grid: &OccupancyGrid,
    thickness: f64,
    width_range: (f64, f64),
    cfg: &WallMergeConfig,
) -> BTreeMap<(u64, u64), OrientedBox> {
    let mut out = BTreeMap::new();
    for (i, a) in walls.iter().enumerate() {
        for b in walls.iter().skip(i + 1) {
            if !parallel(a.seg.normal, b.seg.normal, cfg.max_angle) {
                continue;
            }
            let mid_b = b.seg.point_at((b.seg.s0 + b.seg.s1) / 2.0);
            if (a.seg.normal.dot(mid_b) - a.seg.offset).abs() > thickness + cfg.offset_slack {
                continue;
            }
            let (b0, b1) = project(&b.seg, &a.seg);
            let (g0, g1) = if b0 >= a.seg.s1 {
                (a.seg.s1, b0)
            } else if a.seg.s0 >= b1 {
                (b1, a.seg.s0)
            } else {
                continue;
            };
            let width = g1 - g0;
            if width < width_range.0 || width > width_range.1 {
                continue;
            }
            // Another confirmed wall spanning the opening rules it out.
            let blocked = walls.iter().any(|w| {
                w.id != a.id && w.id != b.id && compatible(&w.seg, &a.seg, thickness, cfg) && {
                    let (w0, w1) = project(&w.seg, &a.seg);
                    w0 < g1 - 0.05 && w1 > g0 + 0.05
                }
            });
            if blocked {
                continue;
            }
            let offset = (a.seg.offset + a.seg.normal.dot(mid_b)) / 2.0;
            let line = WallSegment { offset, ..a.seg };
            // Fitted wall ends can fall a cell short of the real jamb, so the
            // probe keeps clear of both ends by two cells at least.
            let margin = (0.1 * width).max(2.0 * grid.resolution).min(0.4 * width);
            let samples = 16;
            let (mut free, mut occupied) = (0, 0);
            for k in 0..samples {
                let s = g0 + margin + (width - 2.0 * margin) * (k as f64 + 0.5) / samples as f64;
                match grid.at(line.point_at(s)) {
                    Cell::Free => free += 1,
                    Cell::Occupied => occupied += 1,
                    Cell::Unknown => {}
                }
            }
            if occupied > 0 || free * 2 < samples {
                continue;
            }
            let center = line.point_at((g0 + g1) / 2.0);
            let key = (a.id.min(b.id), a.id.max(b.id));
            out.insert(
                key,
                OrientedBox::new(
                    center.with_z(DOOR_HEIGHT / 2.0),
                    Vec3::new(width / 2.0, thickness / 2.0, DOOR_HEIGHT / 2.0),
                    line.dir().angle(),
                ),
            );
        }
    }
    out
}
