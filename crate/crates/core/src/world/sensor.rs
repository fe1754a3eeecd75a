//! Posed sensor: labeled voxel detections, wall points and free-space rays.

use std::collections::BTreeSet;
use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{Pose, World, WorldError};
use crate::geometry::wrap_angle;
use crate::voxel::{center_of, key_of, VoxelSet};
use crate::{Vec2, Vec3};

const RAY_STEP: f64 = 0.5 * std::f64::consts::PI / 180.0;
const WALL_POINT_SPACING: f64 = 0.1;
const WALL_ROW_SPACING: f64 = 0.25;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSpec {
    /// Standard deviation of the jitter applied to voxel centers and wall
    /// points, meters.
    pub sigma: f64,
    /// Probability that a detection carries a wrong label.
    pub label_flip: f64,
    pub seed: u64,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self { sigma: 0.02, label_flip: 0.0, seed: 0 }
    }
}

impl NoiseSpec {
    pub fn none() -> Self {
        Self { sigma: 0.0, label_flip: 0.0, seed: 0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SensorConfig {
    pub fov: f64,
    pub range: f64,
    pub voxel: f64,
    pub camera_height: f64,
    pub noise: NoiseSpec,
}

impl Default for SensorConfig {
    fn default() -> Self {
        Self { fov: std::f64::consts::FRAC_PI_2, range: 5.0, voxel: 0.1, camera_height: 1.0, noise: NoiseSpec::default() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub label: String,
    pub voxels: VoxelSet,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FreeRay {
    pub origin: Vec2,
    pub end: Vec2,
    /// The ray stopped on a surface rather than at the range limit.
    pub hit: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub pose: Pose,
    pub detections: Vec<Detection>,
    pub wall_points: Vec<Vec3>,
    pub free_rays: Vec<FreeRay>,
    pub timestamp: f64,
    pub fov: f64,
    pub range: f64,
}

impl Observation {
    pub fn empty(pose: Pose, timestamp: f64) -> Self {
        Self { pose, detections: vec![], wall_points: vec![], free_rays: vec![], timestamp, fov: 0.0, range: 0.0 }
    }

    pub fn is_panoramic(&self) -> bool {
        self.fov >= TAU - 1e-9
    }
}

fn mix(mut h: u64, v: u64) -> u64 {
    h ^= v.wrapping_add(0x9e37_79b9_7f4a_7c15).wrapping_add(h << 6).wrapping_add(h >> 2);
    h = (h ^ (h >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    (h ^ (h >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb)
}

fn in_view(pose: &Pose, p: Vec2, fov: f64, range: f64) -> bool {
    let d = p - pose.position;
    let dist = d.norm();
    if dist > range {
        return false;
    }
    fov >= TAU - 1e-12 || dist == 0.0 || wrap_angle(d.angle() - pose.yaw).abs() <= fov / 2.0
}

fn occluded(world: &World, a: Vec3, b: Vec3) -> bool {
    world.walls.iter().any(|w| w.intersects_segment(a, b))
}

/// Simulated sensor reading from `pose` with the given field of view.
pub fn sense(world: &World, pose: Pose, cfg: &SensorConfig, timestamp: f64) -> Result<Observation, WorldError> {
    if world.in_collision(pose.position) {
        return Err(WorldError::PoseInCollision { x: pose.position.x, y: pose.position.y });
    }
    let fov = cfg.fov.min(TAU);
    let noise = &cfg.noise;
    let seed = [pose.position.x.to_bits(), pose.position.y.to_bits(), pose.yaw.to_bits(), timestamp.to_bits()]
        .into_iter()
        .fold(noise.seed, mix);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let jitter = Normal::new(0.0, noise.sigma.max(0.0)).expect("finite sigma");
    let cam = pose.position.with_z(cfg.camera_height);
    let all_labels = world.spec.room_catalog.object_labels();

    let mut detections = Vec::new();
    for o in &world.objects {
        let mut voxels = VoxelSet::new(cfg.voxel);
        for &k in &o.surface {
            let c = center_of(k, world.voxel);
            if !in_view(&pose, c.xy(), fov, cfg.range) || occluded(world, cam, c) {
                continue;
            }
            let p = if noise.sigma > 0.0 {
                c + Vec3::new(jitter.sample(&mut rng), jitter.sample(&mut rng), jitter.sample(&mut rng))
            } else {
                c
            };
            voxels.cells.insert(key_of(p, cfg.voxel));
        }
        if voxels.is_empty() {
            continue;
        }
        let mut label = o.label.clone();
        if noise.label_flip > 0.0 && all_labels.len() > 1 && rng.gen_bool(noise.label_flip.min(1.0)) {
            let others: Vec<&String> = all_labels.iter().filter(|l| **l != o.label).collect();
            label = others[rng.gen_range(0..others.len())].clone();
        }
        detections.push(Detection { label, voxels });
    }

    let mut wall_points = Vec::new();
    for (wi, w) in world.walls.iter().enumerate() {
        // Long faces only; the short end faces are jambs or buried in corners.
        let along_x = w.half_extents.x >= w.half_extents.y;
        let (n, half_len, half_t) = if along_x {
            (Vec2::new(0.0, 1.0), w.half_extents.x, w.half_extents.y)
        } else {
            (Vec2::new(1.0, 0.0), w.half_extents.y, w.half_extents.x)
        };
        let side = if (pose.position - w.center.xy()).dot(n) >= 0.0 { 1.0 } else { -1.0 };
        let face = w.center.xy() + n * (side * half_t);
        let dir = n.perp();
        let count = ((2.0 * half_len) / WALL_POINT_SPACING).floor() as usize;
        let rows = ((w.half_extents.z * 2.0 - 0.05) / WALL_ROW_SPACING).floor() as usize + 1;
        for i in 0..count {
            let s = -half_len + WALL_POINT_SPACING * (i as f64 + 0.5);
            let q = face + dir * s;
            if !in_view(&pose, q, fov, cfg.range) {
                continue;
            }
            let probe = q + n * (side * 1e-4);
            if world.walls.iter().enumerate().any(|(j, o)| j != wi && o.contains_point_2d(probe)) {
                continue;
            }
            for r in 0..rows {
                let z = 0.05 + WALL_ROW_SPACING * r as f64;
                if z > w.center.z + w.half_extents.z {
                    break;
                }
                if occluded(world, cam, probe.with_z(z)) {
                    continue;
                }
                let mut p = q.with_z(z);
                if noise.sigma > 0.0 {
                    p += Vec3::new(jitter.sample(&mut rng), jitter.sample(&mut rng), jitter.sample(&mut rng));
                }
                wall_points.push(p);
            }
        }
    }

    let n_rays = if fov >= TAU - 1e-12 { (TAU / RAY_STEP).round() as usize } else { (fov / RAY_STEP).floor() as usize + 1 };
    let start = if fov >= TAU - 1e-12 { pose.yaw } else { pose.yaw - fov / 2.0 };
    let mut free_rays = Vec::with_capacity(n_rays);
    for i in 0..n_rays {
        let d = Vec2::from_angle(start + RAY_STEP * i as f64);
        let mut t = cfg.range;
        let mut hit = false;
        for b in world.walls.iter().chain(world.objects.iter().map(|o| &o.obb)) {
            if let Some(tb) = b.ray_entry_2d(pose.position, d) {
                if tb < t {
                    t = tb;
                    hit = true;
                }
            }
        }
        free_rays.push(FreeRay { origin: pose.position, end: pose.position + d * t, hit });
    }

    Ok(Observation { pose, detections, wall_points, free_rays, timestamp, fov, range: cfg.range })
}

/// Full yaw rotation at `pose`.
pub fn panoramic_scan(world: &World, pose: Pose, cfg: &SensorConfig, timestamp: f64) -> Result<Observation, WorldError> {
    let pano = SensorConfig { fov: TAU, ..cfg.clone() };
    sense(world, pose, &pano, timestamp)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MotionConfig {
    /// m/s
    pub speed: f64,
    /// Duration of the full yaw rotation performed at each waypoint.
    pub scan_time: f64,
    /// Arc length between en-route observations.
    pub obs_interval: f64,
}

impl Default for MotionConfig {
    fn default() -> Self {
        Self { speed: 0.5, scan_time: 8.0, obs_interval: 0.5 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PathProgress {
    pub pose: Pose,
    pub traveled: f64,
    pub elapsed: f64,
    pub observations: Vec<Observation>,
}

/// Drive along `path` from `start`, sensing every `obs_interval` meters with
/// the sensor facing the direction of travel. Elapsed time covers driving
/// plus one final scan rotation when the path is non-empty.
pub fn follow_path(
    world: &World,
    start: Pose,
    path: &[Pose],
    motion: &MotionConfig,
    sensor: &SensorConfig,
    t0: f64,
) -> Result<PathProgress, WorldError> {
    let mut progress = PathProgress { pose: start, traveled: 0.0, elapsed: 0.0, observations: vec![] };
    if path.is_empty() {
        return Ok(progress);
    }
    let mut next_obs = motion.obs_interval;
    let mut cur = start;
    for (i, wp) in path.iter().enumerate() {
        let a = cur.position;
        let b = wp.position;
        let len = a.distance(b);
        if !world.segment_clear(a, b) {
            return Err(WorldError::SegmentInCollision { segment: i, progress: Box::new(progress) });
        }
        let heading = if len > 1e-12 { (b - a).angle() } else { cur.yaw };
        while motion.obs_interval > 0.0 && next_obs < progress.traveled + len - 1e-9 {
            let s = next_obs - progress.traveled;
            let p = a + (b - a) * (s / len);
            let pose = Pose { position: p, yaw: heading };
            let t = t0 + next_obs / motion.speed;
            if let Ok(obs) = sense(world, pose, sensor, t) {
                progress.observations.push(obs);
            }
            next_obs += motion.obs_interval;
        }
        progress.traveled += len;
        cur = Pose { position: b, yaw: if len > 1e-12 { heading } else { wp.yaw } };
        progress.pose = cur;
        progress.elapsed = progress.traveled / motion.speed;
    }
    progress.elapsed += motion.scan_time;
    Ok(progress)
}

/// Union of detection voxel sets per label, as a comparable summary.
pub fn detection_summary(obs: &Observation) -> BTreeSet<(String, [i64; 3])> {
    obs.detections.iter().flat_map(|d| d.voxels.cells.iter().map(move |k| (d.label.clone(), *k))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::{generate_world, WorldSpec};
    use std::f64::consts::{FRAC_PI_2, PI};

    fn noiseless() -> SensorConfig {
        SensorConfig { noise: NoiseSpec::none(), ..Default::default() }
    }

    fn world(seed: u64, rooms: usize) -> World {
        generate_world(&WorldSpec { seed, room_count_range: (rooms, rooms), extent: (10.0, 8.0), ..Default::default() })
            .unwrap()
    }

    #[test]
    fn panoramic_covers_single_room() {
        let w = generate_world(&WorldSpec { seed: 2, room_count_range: (1, 1), extent: (5.0, 4.0), ..Default::default() })
            .unwrap();
        let pose = w.start_pose(0.25);
        let cfg = SensorConfig { range: 10.0, ..noiseless() };
        let obs = panoramic_scan(&w, pose, &cfg, 0.0).unwrap();
        assert_eq!(obs.detections.len(), w.objects.len());
        assert!(!obs.free_rays.is_empty());
        assert_eq!(obs, panoramic_scan(&w, pose, &cfg, 0.0).unwrap());
    }

    #[test]
    fn panorama_is_union_of_quarter_views() {
        let w = world(5, 3);
        let pose = w.start_pose(0.25);
        let cfg = noiseless();
        let pano = panoramic_scan(&w, pose, &cfg, 0.0).unwrap();
        let mut union = BTreeSet::new();
        for k in 0..4 {
            let p = Pose { yaw: pose.yaw + k as f64 * FRAC_PI_2, ..pose };
            union.extend(detection_summary(&sense(&w, p, &cfg, 0.0).unwrap()));
        }
        assert_eq!(union, detection_summary(&pano));
    }

    #[test]
    fn objects_behind_walls_are_not_detected() {
        let w = world(1, 3);
        let pose = w.start_pose(0.25);
        let room = w.room_index_at(pose.position).unwrap();
        let obs = panoramic_scan(&w, pose, &SensorConfig { range: 50.0, ..noiseless() }, 0.0).unwrap();
        for d in &obs.detections {
            // Every detected voxel has a clear line of sight.
            for c in d.voxels.centers() {
                assert!(!occluded(&w, pose.position.with_z(1.0), c));
            }
        }
        let own = w.objects.iter().filter(|o| o.room == room).count();
        assert!(obs.detections.len() >= own);
    }

    #[test]
    fn collision_pose_rejected() {
        let w = world(1, 2);
        let wall = w.walls[0].center.xy();
        assert!(matches!(
            sense(&w, Pose { position: wall, yaw: 0.0 }, &noiseless(), 0.0),
            Err(WorldError::PoseInCollision { .. })
        ));
    }

    #[test]
    fn follow_path_accounting() {
        let w = generate_world(&WorldSpec { seed: 0, room_count_range: (1, 1), extent: (8.0, 6.0), ..Default::default() })
            .unwrap();
        let motion = MotionConfig { speed: 1.0, scan_time: 2.0, obs_interval: 0.5 };
        let start = w.start_pose(0.25);
        let empty = follow_path(&w, start, &[], &motion, &noiseless(), 0.0).unwrap();
        assert_eq!((empty.traveled, empty.elapsed, empty.observations.len()), (0.0, 0.0, 0));

        // Find a clear 4 m straight segment.
        let mut seg = None;
        'outer: for y in 1..12 {
            for x in 1..8 {
                let a = Vec2::new(x as f64 * 0.5, y as f64 * 0.5);
                for dir in [0.0, PI / 2.0, PI, -PI / 2.0] {
                    let b = a + Vec2::from_angle(dir) * 4.0;
                    if !w.in_collision(a) && !w.in_collision(b) && w.segment_clear(a, b) {
                        seg = Some((a, b));
                        break 'outer;
                    }
                }
            }
        }
        let (a, b) = seg.expect("clear segment");
        let r = follow_path(&w, Pose { position: a, yaw: 0.0 }, &[Pose { position: b, yaw: 0.0 }], &motion, &noiseless(), 0.0)
            .unwrap();
        assert!((r.traveled - 4.0).abs() < 1e-9);
        assert!(r.elapsed >= 4.0);
        assert_eq!(r.observations.len(), 7);

        let through = Pose { position: Vec2::new(-1.0, a.y), yaw: 0.0 };
        assert!(matches!(
            follow_path(&w, Pose { position: a, yaw: 0.0 }, &[through], &motion, &noiseless(), 0.0),
            Err(WorldError::SegmentInCollision { segment: 0, .. })
        ));
    }

    #[test]
    fn noise_is_seeded() {
        let w = world(4, 2);
        let pose = w.start_pose(0.25);
        let cfg = SensorConfig::default();
        assert_eq!(sense(&w, pose, &cfg, 1.0).unwrap(), sense(&w, pose, &cfg, 1.0).unwrap());
    }
}
