//! Procedural ground-truth apartments and a posed sensor simulator.
//!
//! Worlds are single-floor sets of axis-aligned rectangular rooms obtained by
//! recursively splitting the extent, joined by doors along a random spanning
//! tree of the room adjacency, and furnished from a [`RoomCatalog`].

mod sensor;

use std::collections::BTreeMap;
use std::f64::consts::FRAC_PI_2;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::{label_histogram, RoomCatalog};
use crate::pgm::GrayImage;
use crate::scene_graph::{NodeId, ObjectNode, Plane, Provenance, RoomNode, SceneGraph, StructureKind, StructureNode};
use crate::voxel::{center_of, VoxelKey};
use crate::{OrientedBox, Rect, Vec2, Vec3};

pub use sensor::{
    detection_summary, follow_path, panoramic_scan, sense, Detection, FreeRay, MotionConfig, NoiseSpec, Observation, PathProgress,
    SensorConfig,
};

/// Shortest admissible room side.
pub const MIN_ROOM_SIDE: f64 = 2.6;
pub const DOOR_HEIGHT: f64 = 2.1;
/// Grid on which room boundaries and door centers are snapped.
const SNAP: f64 = 0.1;
/// Keep door openings this far from wall junctions.
const DOOR_CORNER_MARGIN: f64 = 0.35;
/// Objects are either flush against a wall or at least this far from it and
/// from each other, so that a robot fits through every gap.
const OBJECT_CLEARANCE: f64 = 0.6;
const DOOR_CLEARANCE: f64 = 1.0;
const FACE_GAP: f64 = 0.02;
pub const NAV_RESOLUTION: f64 = 0.1;
const MAX_ATTEMPTS: usize = 64;

#[derive(Debug, Error)]
pub enum WorldError {
    #[error("world generation failed: {0}")]
    GenerationFailure(String),
    #[error("invalid world spec: {0}")]
    InvalidSpec(String),
    #[error("pose ({x:.2}, {y:.2}) is in collision")]
    PoseInCollision { x: f64, y: f64 },
    #[error("path segment {segment} is in collision")]
    SegmentInCollision { segment: usize, progress: Box<PathProgress> },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse: {0}")]
    Parse(#[from] serde_yaml::Error),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorldSpec {
    pub seed: u64,
    pub room_count_range: (usize, usize),
    pub extent: (f64, f64),
    pub door_width: f64,
    pub wall_thickness: f64,
    pub wall_height: f64,
    pub room_catalog: RoomCatalog,
}

impl Default for WorldSpec {
    fn default() -> Self {
        Self {
            seed: 0,
            room_count_range: (3, 5),
            extent: (12.0, 9.0),
            door_width: 0.9,
            wall_thickness: 0.1,
            wall_height: 2.5,
            room_catalog: RoomCatalog::default(),
        }
    }
}

impl WorldSpec {
    pub fn from_yaml(text: &str) -> Result<Self, WorldError> {
        let s: Self = serde_yaml::from_str(text)?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self, WorldError> {
        Self::from_yaml(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<(), WorldError> {
        let (lo, hi) = self.room_count_range;
        if lo == 0 || lo > hi {
            return Err(WorldError::InvalidSpec(format!("room_count_range ({lo}, {hi})")));
        }
        if !(self.extent.0 >= MIN_ROOM_SIDE && self.extent.1 >= MIN_ROOM_SIDE) {
            return Err(WorldError::InvalidSpec("extent smaller than one room".into()));
        }
        if !(self.door_width > 0.0 && self.wall_thickness > 0.0 && self.wall_height > DOOR_HEIGHT) {
            return Err(WorldError::InvalidSpec("door, wall thickness or height".into()));
        }
        self.room_catalog.validate().map_err(|e| WorldError::InvalidSpec(e.to_string()))
    }
}

/// 2D pose: position and heading.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub position: Vec2,
    pub yaw: f64,
}

impl Pose {
    pub fn new(x: f64, y: f64, yaw: f64) -> Self {
        Self { position: Vec2::new(x, y), yaw }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct WorldRoom {
    pub label: String,
    pub rect: Rect,
    pub node: NodeId,
}

#[derive(Clone, Debug, PartialEq)]
pub struct WorldDoor {
    pub center: Vec2,
    /// The door sits in a wall running along x.
    pub along_x: bool,
    pub width: f64,
    pub rooms: (usize, usize),
    pub node: NodeId,
}

#[derive(Clone, Debug, PartialEq)]
pub struct WorldObject {
    pub label: String,
    pub obb: OrientedBox,
    pub room: usize,
    pub node: NodeId,
    /// Voxels of the object's surface at the sensor resolution.
    pub surface: Vec<VoxelKey>,
}

/// Boolean raster of traversable space.
#[derive(Clone, Debug, PartialEq)]
pub struct FreeSpace {
    pub origin: Vec2,
    pub resolution: f64,
    pub width: usize,
    pub height: usize,
    pub cells: Vec<bool>,
}

impl FreeSpace {
    pub fn cell_of(&self, p: Vec2) -> Option<(usize, usize)> {
        let cx = ((p.x - self.origin.x) / self.resolution).floor();
        let cy = ((p.y - self.origin.y) / self.resolution).floor();
        (cx >= 0.0 && cy >= 0.0 && (cx as usize) < self.width && (cy as usize) < self.height)
            .then_some((cx as usize, cy as usize))
    }

    pub fn center(&self, cx: usize, cy: usize) -> Vec2 {
        self.origin + Vec2::new((cx as f64 + 0.5) * self.resolution, (cy as f64 + 0.5) * self.resolution)
    }

    pub fn get(&self, cx: usize, cy: usize) -> bool {
        self.cells[cy * self.width + cx]
    }

    pub fn is_free(&self, p: Vec2) -> bool {
        self.cell_of(p).is_some_and(|(x, y)| self.get(x, y))
    }

    pub fn free_count(&self) -> usize {
        self.cells.iter().filter(|&&c| c).count()
    }

    /// Number of 4-connected components of free cells.
    pub fn component_count(&self) -> usize {
        let mut seen = vec![false; self.cells.len()];
        let mut count = 0;
        for start in 0..self.cells.len() {
            if !self.cells[start] || seen[start] {
                continue;
            }
            count += 1;
            seen[start] = true;
            let mut stack = vec![start];
            while let Some(i) = stack.pop() {
                let (x, y) = (i % self.width, i / self.width);
                let mut push = |nx: usize, ny: usize| {
                    let j = ny * self.width + nx;
                    if self.cells[j] && !seen[j] {
                        seen[j] = true;
                        stack.push(j);
                    }
                };
                if x > 0 {
                    push(x - 1, y);
                }
                if x + 1 < self.width {
                    push(x + 1, y);
                }
                if y > 0 {
                    push(x, y - 1);
                }
                if y + 1 < self.height {
                    push(x, y + 1);
                }
            }
        }
        count
    }

    /// Cells whose center is farther than `radius` from every blocked cell
    /// center (and from the raster border).
    pub fn eroded(&self, radius: f64) -> FreeSpace {
        let r = (radius / self.resolution).ceil() as i64;
        let r2 = (radius / self.resolution).powi(2);
        let mut out = self.clone();
        for y in 0..self.height as i64 {
            for x in 0..self.width as i64 {
                if !self.cells[(y as usize) * self.width + x as usize] {
                    continue;
                }
                'scan: for dy in -r..=r {
                    for dx in -r..=r {
                        if ((dx * dx + dy * dy) as f64) > r2 {
                            continue;
                        }
                        let (nx, ny) = (x + dx, y + dy);
                        let blocked = nx < 0
                            || ny < 0
                            || nx >= self.width as i64
                            || ny >= self.height as i64
                            || !self.cells[ny as usize * self.width + nx as usize];
                        if blocked {
                            out.cells[y as usize * self.width + x as usize] = false;
                            break 'scan;
                        }
                    }
                }
            }
        }
        out
    }

    /// Free cells white, blocked cells black, row 0 at the top.
    pub fn to_image(&self) -> GrayImage {
        let mut img = GrayImage::filled(self.width, self.height, 0);
        for y in 0..self.height {
            for x in 0..self.width {
                if self.get(x, y) {
                    img.set(x, self.height - 1 - y, 255);
                }
            }
        }
        img
    }
}

#[derive(Clone, Debug)]
pub struct World {
    pub spec: WorldSpec,
    pub extent: Rect,
    pub rooms: Vec<WorldRoom>,
    pub walls: Vec<OrientedBox>,
    pub doors: Vec<WorldDoor>,
    pub objects: Vec<WorldObject>,
    pub truth_graph: SceneGraph,
    pub free_space: FreeSpace,
    /// Voxel size of [`WorldObject::surface`].
    pub voxel: f64,
}

impl World {
    /// Index of the room whose rectangle contains `p`.
    pub fn room_index_at(&self, p: Vec2) -> Option<usize> {
        self.rooms.iter().position(|r| r.rect.contains(p))
    }

    /// Whether a point robot at `p` would be inside a wall or object, or
    /// outside the world.
    pub fn in_collision(&self, p: Vec2) -> bool {
        !self.extent.contains(p)
            || self.walls.iter().any(|w| w.contains_point_2d(p))
            || self.objects.iter().any(|o| o.obb.contains_point_2d(p))
    }

    /// Whether the straight segment `a -> b` stays clear of walls and objects.
    pub fn segment_clear(&self, a: Vec2, b: Vec2) -> bool {
        let (a3, b3) = (a.with_z(0.05), b.with_z(0.05));
        !self.walls.iter().any(|w| w.intersects_segment(a3, b3))
            && !self.objects.iter().any(|o| o.obb.intersects_segment(a3, b3))
    }

    /// A collision-free start pose near the center of room 0 with clearance
    /// for a robot of the given radius.
    pub fn start_pose(&self, robot_radius: f64) -> Pose {
        let nav = self.free_space.eroded(robot_radius);
        let c = self.rooms[0].rect.center();
        let mut best: Option<(f64, Vec2)> = None;
        for y in 0..nav.height {
            for x in 0..nav.width {
                if !nav.get(x, y) {
                    continue;
                }
                let p = nav.center(x, y);
                if !self.rooms[0].rect.contains(p) {
                    continue;
                }
                let d = p.distance(c);
                if best.is_none_or(|(bd, _)| d < bd) {
                    best = Some((d, p));
                }
            }
        }
        let p = best.map(|b| b.1).unwrap_or(c);
        Pose { position: p, yaw: 0.0 }
    }

    pub fn truth_yaml(&self) -> String {
        self.truth_graph.to_yaml()
    }
}

fn snap(v: f64) -> f64 {
    (v / SNAP).round() * SNAP
}

/// Deterministic world for `spec`.
pub fn generate_world(spec: &WorldSpec) -> Result<World, WorldError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (lo, hi) = spec.room_count_range;
    let n = rng.gen_range(lo..=hi);
    let extent = Rect::new(Vec2::zero(), Vec2::new(spec.extent.0, spec.extent.1));
    let mut last = String::from("no attempt");
    for _ in 0..MAX_ATTEMPTS {
        match try_generate(spec, extent, n, &mut rng) {
            Ok(w) => return Ok(w),
            Err(why) => last = why,
        }
    }
    Err(WorldError::GenerationFailure(last))
}

fn partition(extent: Rect, n: usize, rng: &mut ChaCha8Rng) -> Option<Vec<Rect>> {
    let mut rects = vec![extent];
    while rects.len() < n {
        let splittable: Vec<usize> = (0..rects.len())
            .filter(|&i| rects[i].width().max(rects[i].height()) >= 2.0 * MIN_ROOM_SIDE)
            .collect();
        if splittable.is_empty() {
            return None;
        }
        let weights: Vec<f64> = splittable.iter().map(|&i| rects[i].area()).collect();
        let total: f64 = weights.iter().sum();
        let mut pick = rng.gen::<f64>() * total;
        let mut idx = splittable[splittable.len() - 1];
        for (k, w) in weights.iter().enumerate() {
            if pick < *w {
                idx = splittable[k];
                break;
            }
            pick -= w;
        }
        let r = rects.swap_remove(idx);
        let split_x = if r.width() >= 2.0 * MIN_ROOM_SIDE && r.height() >= 2.0 * MIN_ROOM_SIDE {
            r.width() >= r.height()
        } else {
            r.width() >= 2.0 * MIN_ROOM_SIDE
        };
        let (a, len) = if split_x { (r.min.x, r.width()) } else { (r.min.y, r.height()) };
        let mut at = snap(a + MIN_ROOM_SIDE + rng.gen::<f64>() * (len - 2.0 * MIN_ROOM_SIDE));
        at = at.clamp(a + MIN_ROOM_SIDE, a + len - MIN_ROOM_SIDE);
        if split_x {
            rects.push(Rect::new(r.min, Vec2::new(at, r.max.y)));
            rects.push(Rect::new(Vec2::new(at, r.min.y), r.max));
        } else {
            rects.push(Rect::new(r.min, Vec2::new(r.max.x, at)));
            rects.push(Rect::new(Vec2::new(r.min.x, at), r.max));
        }
    }
    rects.sort_by(|a, b| (a.min.y, a.min.x).partial_cmp(&(b.min.y, b.min.x)).unwrap());
    Some(rects)
}

/// Shared boundary of two rooms: (line coordinate, interval, runs along x).
fn shared_edge(a: &Rect, b: &Rect) -> Option<(f64, f64, f64, bool)> {
    let eq = |u: f64, v: f64| (u - v).abs() < 1e-9;
    for (line, along_x) in [(a.max.y, true), (a.min.y, true), (a.max.x, false), (a.min.x, false)] {
        let touches = if along_x {
            (eq(line, a.max.y) && eq(b.min.y, line)) || (eq(line, a.min.y) && eq(b.max.y, line))
        } else {
            (eq(line, a.max.x) && eq(b.min.x, line)) || (eq(line, a.min.x) && eq(b.max.x, line))
        };
        if !touches {
            continue;
        }
        let (s0, s1) = if along_x {
            (a.min.x.max(b.min.x), a.max.x.min(b.max.x))
        } else {
            (a.min.y.max(b.min.y), a.max.y.min(b.max.y))
        };
        if s1 > s0 {
            return Some((line, s0, s1, along_x));
        }
    }
    None
}

fn find(parent: &mut [usize], i: usize) -> usize {
    let mut r = i;
    while parent[r] != r {
        r = parent[r];
    }
    parent[i] = r;
    r
}

fn place_doors(rects: &[Rect], width: f64, rng: &mut ChaCha8Rng) -> Option<Vec<(Vec2, bool, (usize, usize))>> {
    let need = width + 2.0 * DOOR_CORNER_MARGIN;
    let mut edges = Vec::new();
    for i in 0..rects.len() {
        for j in i + 1..rects.len() {
            if let Some((line, s0, s1, along_x)) = shared_edge(&rects[i], &rects[j]) {
                if s1 - s0 >= need {
                    edges.push((i, j, line, s0, s1, along_x));
                }
            }
        }
    }
    edges.shuffle(rng);
    let mut parent: Vec<usize> = (0..rects.len()).collect();
    let mut doors = Vec::new();
    for (i, j, line, s0, s1, along_x) in edges {
        let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
        if ri == rj {
            continue;
        }
        parent[ri] = rj;
        let lo = s0 + DOOR_CORNER_MARGIN + width / 2.0;
        let hi = s1 - DOOR_CORNER_MARGIN - width / 2.0;
        let c = snap(lo + rng.gen::<f64>() * (hi - lo)).clamp(lo, hi);
        let center = if along_x { Vec2::new(c, line) } else { Vec2::new(line, c) };
        doors.push((center, along_x, (i, j)));
    }
    (doors.len() + 1 == rects.len()).then_some(doors)
}

fn merge_intervals(mut v: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    v.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out: Vec<(f64, f64)> = Vec::new();
    for (a, b) in v {
        match out.last_mut() {
            Some(last) if a <= last.1 + 1e-9 => last.1 = last.1.max(b),
            _ => out.push((a, b)),
        }
    }
    out
}

/// Wall boxes along every room boundary with door gaps cut out.
fn build_walls(rects: &[Rect], doors: &[(Vec2, bool, (usize, usize))], spec: &WorldSpec) -> Vec<OrientedBox> {
    let t = spec.wall_thickness;
    let h = spec.wall_height;
    let mut walls = Vec::new();
    for along_x in [true, false] {
        let mut lines: BTreeMap<i64, Vec<(f64, f64)>> = BTreeMap::new();
        for r in rects {
            let (c0, c1, s0, s1) =
                if along_x { (r.min.y, r.max.y, r.min.x, r.max.x) } else { (r.min.x, r.max.x, r.min.y, r.max.y) };
            for c in [c0, c1] {
                lines.entry((c * 1000.0).round() as i64).or_default().push((s0, s1));
            }
        }
        for (key, ivals) in lines {
            let line = key as f64 / 1000.0;
            let gaps: Vec<(f64, f64)> = doors
                .iter()
                .filter(|(c, ax, _)| *ax == along_x && ((if along_x { c.y } else { c.x }) - line).abs() < 1e-6)
                .map(|(c, _, _)| {
                    let s = if along_x { c.x } else { c.y };
                    (s - spec.door_width / 2.0, s + spec.door_width / 2.0)
                })
                .collect();
            for (a, b) in merge_intervals(ivals) {
                // Cut the door gaps out of [a, b].
                let mut pieces = vec![(a, b, false, false)];
                for &(g0, g1) in &gaps {
                    let mut next = Vec::new();
                    for (p0, p1, d0, d1) in pieces {
                        if g1 <= p0 || g0 >= p1 {
                            next.push((p0, p1, d0, d1));
                            continue;
                        }
                        if g0 > p0 {
                            next.push((p0, g0, d0, true));
                        }
                        if g1 < p1 {
                            next.push((g1, p1, true, d1));
                        }
                    }
                    pieces = next;
                }
                for (p0, p1, door0, door1) in pieces {
                    // Walls across y are stretched over the corner squares
                    // unless they end at a door jamb.
                    let (e0, e1) = if along_x {
                        (p0, p1)
                    } else {
                        (if door0 { p0 } else { p0 - t / 2.0 }, if door1 { p1 } else { p1 + t / 2.0 })
                    };
                    let mid = (e0 + e1) / 2.0;
                    let half_len = (e1 - e0) / 2.0;
                    let (center, half) = if along_x {
                        (Vec3::new(mid, line, h / 2.0), Vec3::new(half_len, t / 2.0, h / 2.0))
                    } else {
                        (Vec3::new(line, mid, h / 2.0), Vec3::new(t / 2.0, half_len, h / 2.0))
                    };
                    walls.push(OrientedBox::new(center, half, 0.0));
                }
            }
        }
    }
    walls
}

/// Room labels: every label expected at least once comes first, the rest
/// are drawn by catalog weight.
fn draw_labels(catalog: &RoomCatalog, n: usize, rng: &mut ChaCha8Rng) -> Vec<String> {
    let mut required: Vec<String> = catalog
        .rooms
        .iter()
        .flat_map(|(l, r)| std::iter::repeat_n(l.clone(), r.expected as usize))
        .collect();
    required.shuffle(rng);
    required.truncate(n);
    let labels: Vec<&String> = catalog.rooms.keys().collect();
    let total: f64 = catalog.rooms.values().map(|r| r.weight).sum();
    while required.len() < n {
        let mut pick = rng.gen::<f64>() * total;
        let mut chosen = labels[labels.len() - 1];
        for l in &labels {
            let w = catalog.rooms[*l].weight;
            if pick < w {
                chosen = l;
                break;
            }
            pick -= w;
        }
        required.push(chosen.clone());
    }
    required.shuffle(rng);
    required
}

fn rect_distance(a: &Rect, b: &Rect) -> f64 {
    let dx = (a.min.x - b.max.x).max(b.min.x - a.max.x).max(0.0);
    let dy = (a.min.y - b.max.y).max(b.min.y - a.max.y).max(0.0);
    dx.hypot(dy)
}

fn point_rect_distance(p: Vec2, r: &Rect) -> f64 {
    let dx = (r.min.x - p.x).max(p.x - r.max.x).max(0.0);
    let dy = (r.min.y - p.y).max(p.y - r.max.y).max(0.0);
    dx.hypot(dy)
}

/// Place one instance in `inner`; objects near a wall are pushed flush.
fn place_object(
    inner: &Rect,
    half: Vec3,
    placed: &[Rect],
    doors: &[Vec2],
    rng: &mut ChaCha8Rng,
) -> Option<(Vec2, f64)> {
    for _ in 0..200 {
        let yaw = if rng.gen_bool(0.5) { 0.0 } else { FRAC_PI_2 };
        let (hx, hy) = if yaw == 0.0 { (half.x, half.y) } else { (half.y, half.x) };
        let (x0, x1) = (inner.min.x + hx, inner.max.x - hx);
        let (y0, y1) = (inner.min.y + hy, inner.max.y - hy);
        if x0 > x1 || y0 > y1 {
            return None;
        }
        let mut x = rng.gen_range(x0..=x1);
        let mut y = rng.gen_range(y0..=y1);
        if x - x0 < OBJECT_CLEARANCE {
            x = x0;
        } else if x1 - x < OBJECT_CLEARANCE {
            x = x1;
        }
        if y - y0 < OBJECT_CLEARANCE {
            y = y0;
        } else if y1 - y < OBJECT_CLEARANCE {
            y = y1;
        }
        let fp = Rect::new(Vec2::new(x - hx, y - hy), Vec2::new(x + hx, y + hy));
        if placed.iter().any(|o| rect_distance(o, &fp) < OBJECT_CLEARANCE) {
            continue;
        }
        if doors.iter().any(|d| point_rect_distance(*d, &fp) < DOOR_CLEARANCE) {
            continue;
        }
        return Some((Vec2::new(x, y), yaw));
    }
    None
}

fn surface_voxels(obb: &OrientedBox, res: f64) -> Vec<VoxelKey> {
    let bb = obb.aabb();
    let lo = crate::voxel::key_of(bb.min, res);
    let hi = crate::voxel::key_of(bb.max, res);
    let mut inside = std::collections::BTreeSet::new();
    for i in lo[0]..=hi[0] {
        for j in lo[1]..=hi[1] {
            for k in lo[2]..=hi[2] {
                if obb.contains_point(center_of([i, j, k], res)) {
                    inside.insert([i, j, k]);
                }
            }
        }
    }
    inside
        .iter()
        .filter(|k| {
            [[1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0], [0, 0, 1], [0, 0, -1]]
                .iter()
                .any(|d| !inside.contains(&[k[0] + d[0], k[1] + d[1], k[2] + d[2]]))
        })
        .copied()
        .collect()
}

fn rasterize_free(extent: Rect, walls: &[OrientedBox], objects: &[WorldObject]) -> FreeSpace {
    let res = NAV_RESOLUTION;
    let width = (extent.width() / res).round() as usize;
    let height = (extent.height() / res).round() as usize;
    let mut fs = FreeSpace { origin: extent.min, resolution: res, width, height, cells: vec![false; width * height] };
    for y in 0..height {
        for x in 0..width {
            let p = fs.center(x, y);
            let blocked =
                walls.iter().any(|w| w.contains_point_2d(p)) || objects.iter().any(|o| o.obb.contains_point_2d(p));
            fs.cells[y * width + x] = !blocked;
        }
    }
    fs
}

fn try_generate(spec: &WorldSpec, extent: Rect, n: usize, rng: &mut ChaCha8Rng) -> Result<World, String> {
    let rects = partition(extent, n, rng).ok_or("extent too small for the room count")?;
    let doors = place_doors(&rects, spec.door_width, rng).ok_or("rooms not connectable by doors")?;
    let walls = build_walls(&rects, &doors, spec);
    let labels = draw_labels(&spec.room_catalog, n, rng);
    let t = spec.wall_thickness;
    let voxel = 0.1;

    let mut objects = Vec::new();
    for (ri, r) in rects.iter().enumerate() {
        let prior = spec.room_catalog.get(&labels[ri]).expect("label drawn from catalog");
        let inner = r.shrink(t / 2.0 + FACE_GAP);
        let door_pts: Vec<Vec2> =
            doors.iter().filter(|(_, _, (a, b))| *a == ri || *b == ri).map(|(c, _, _)| *c).collect();
        let mut placed = Vec::new();
        let mut room_objects = Vec::new();
        // Anchors first so that optional furniture never crowds them out.
        let mut order: Vec<&crate::catalog::ObjectPrior> = prior.objects.iter().collect();
        order.sort_by_key(|o| std::cmp::Reverse(o.count.0));
        for op in order {
            let count = rng.gen_range(op.count.0..=op.count.1);
            for k in 0..count {
                match place_object(&inner, op.half_extents, &placed, &door_pts, rng) {
                    Some((c, yaw)) => {
                        let (hx, hy) =
                            if yaw == 0.0 { (op.half_extents.x, op.half_extents.y) } else { (op.half_extents.y, op.half_extents.x) };
                        placed.push(Rect::new(Vec2::new(c.x - hx, c.y - hy), Vec2::new(c.x + hx, c.y + hy)));
                        room_objects.push((op.label.clone(), c, yaw, op.half_extents));
                    }
                    None if k < op.count.0 => return Err(format!("could not place {} in {}", op.label, labels[ri])),
                    None => break,
                }
            }
        }
        for (label, c, yaw, half) in room_objects {
            let obb = OrientedBox::new(c.with_z(half.z), half, yaw);
            let surface = surface_voxels(&obb, voxel);
            objects.push(WorldObject { label, obb, room: ri, node: NodeId(0), surface });
        }
    }

    let free_space = rasterize_free(extent, &walls, &objects);
    if free_space.component_count() != 1 {
        return Err("free space not connected".into());
    }
    let nav = free_space.eroded(0.25);
    if nav.component_count() != 1 {
        return Err("navigable space not connected".into());
    }

    // Truth graph.
    let mut g = SceneGraph::new();
    let mut rooms = Vec::new();
    for (ri, r) in rects.iter().enumerate() {
        let id = g.alloc_id();
        let feature = label_histogram(objects.iter().filter(|o| o.room == ri).map(|o| o.label.as_str()));
        g.upsert(RoomNode {
            id,
            label: labels[ri].clone(),
            centroid: r.center(),
            footprint: r.corners(),
            feature,
            provenance: Provenance::Observed,
        })
        .map_err(|e| e.to_string())?;
        rooms.push(WorldRoom { label: labels[ri].clone(), rect: *r, node: id });
    }
    for o in &mut objects {
        let id = g.alloc_id();
        g.upsert(ObjectNode {
            id,
            label: o.label.clone(),
            center: o.obb.center,
            half_extents: o.obb.half_extents,
            yaw: o.obb.yaw,
            parent_room: Some(rooms[o.room].node),
            provenance: Provenance::Observed,
        })
        .map_err(|e| e.to_string())?;
        o.node = id;
    }
    for w in &walls {
        let id = g.alloc_id();
        let normal = if w.half_extents.x >= w.half_extents.y { Vec3::new(0.0, 1.0, 0.0) } else { Vec3::new(1.0, 0.0, 0.0) };
        g.upsert(StructureNode {
            id,
            kind: StructureKind::Wall,
            plane: Plane { normal, offset: normal.dot(w.center) },
            bbox: *w,
            observation_count: 2,
        })
        .map_err(|e| e.to_string())?;
    }
    let mut world_doors = Vec::new();
    for (c, along_x, pair) in &doors {
        let id = g.alloc_id();
        let (normal, half) = if *along_x {
            (Vec3::new(0.0, 1.0, 0.0), Vec3::new(spec.door_width / 2.0, t / 2.0, DOOR_HEIGHT / 2.0))
        } else {
            (Vec3::new(1.0, 0.0, 0.0), Vec3::new(t / 2.0, spec.door_width / 2.0, DOOR_HEIGHT / 2.0))
        };
        let center = c.with_z(DOOR_HEIGHT / 2.0);
        g.upsert(StructureNode {
            id,
            kind: StructureKind::Door,
            plane: Plane { normal, offset: normal.dot(center) },
            bbox: OrientedBox::new(center, half, 0.0),
            observation_count: 2,
        })
        .map_err(|e| e.to_string())?;
        world_doors.push(WorldDoor { center: *c, along_x: *along_x, width: spec.door_width, rooms: *pair, node: id });
    }

    Ok(World {
        spec: spec.clone(),
        extent,
        rooms,
        walls,
        doors: world_doors,
        objects,
        truth_graph: g,
        free_space,
        voxel,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(seed: u64, rooms: (usize, usize), extent: (f64, f64)) -> WorldSpec {
        WorldSpec { seed, room_count_range: rooms, extent, ..Default::default() }
    }

    #[test]
    fn one_room_world() {
        let w = generate_world(&spec(0, (1, 1), (5.0, 4.0))).unwrap();
        assert_eq!(w.rooms.len(), 1);
        assert_eq!(w.walls.len(), 4);
        assert!(w.doors.is_empty());
        assert!(!w.objects.is_empty());
        w.truth_graph.validate().unwrap();
    }

    #[test]
    fn deterministic() {
        let s = spec(11, (3, 5), (12.0, 9.0));
        let a = generate_world(&s).unwrap();
        let b = generate_world(&s).unwrap();
        assert_eq!(a.truth_yaml(), b.truth_yaml());
        assert_eq!(a.free_space, b.free_space);
    }

    #[test]
    fn rooms_tile_and_doors_puncture_walls() {
        let w = generate_world(&spec(3, (4, 4), (12.0, 9.0))).unwrap();
        let area: f64 = w.rooms.iter().map(|r| r.rect.area()).sum();
        assert!((area - w.extent.area()).abs() < 1e-9);
        for (i, a) in w.rooms.iter().enumerate() {
            for b in &w.rooms[i + 1..] {
                assert!(a.rect.overlap_area(&b.rect) < 1e-9);
            }
        }
        assert_eq!(w.doors.len(), w.rooms.len() - 1);
        for d in &w.doors {
            assert!(!w.in_collision(d.center), "door center blocked");
            // The wall line continues on both sides of the opening.
            let dir = if d.along_x { Vec2::new(1.0, 0.0) } else { Vec2::new(0.0, 1.0) };
            for s in [-1.0, 1.0] {
                let jamb = d.center + dir * (s * (d.width / 2.0 + 0.05));
                assert!(w.walls.iter().any(|b| b.contains_point_2d(jamb)));
            }
        }
        for o in &w.objects {
            assert!(w.rooms[o.room].rect.contains(o.obb.center.xy()));
            assert_eq!(w.rooms.iter().filter(|r| r.rect.contains(o.obb.center.xy())).count(), 1);
        }
    }

    #[test]
    fn free_space_connected_over_seed_sweep() {
        for seed in 0..100 {
            let w = generate_world(&spec(seed, (3, 6), (13.0, 10.0))).unwrap();
            assert_eq!(w.free_space.component_count(), 1, "seed {seed}");
            w.truth_graph.validate().unwrap();
        }
    }

    #[test]
    fn impossible_spec_fails() {
        let r = generate_world(&spec(0, (9, 9), (5.5, 5.5)));
        assert!(matches!(r, Err(WorldError::GenerationFailure(_))));
    }
}
