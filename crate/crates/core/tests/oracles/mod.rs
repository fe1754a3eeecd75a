//! Brute-force references and random inputs shared by the integration and
//! acceptance tests. Each oracle is written from the definition, not from
//! the library's algorithm.

#![allow(dead_code)]

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};
use std::f64::consts::{PI, TAU};

use rand::Rng;

use semx_core::eval::GedGraph;
use semx_core::infogain::View;
use semx_core::scene_graph::{NothingNode, ObjectNode, Plane, Provenance, RoomNode, StructureKind, StructureNode};
use semx_core::world::{Pose, World};
use semx_core::{Aabb, NodeId, OrientedBox, SceneGraph, Vec2, Vec3};

// ---- entropy ----

/// Entropy in nats from run lengths of the sorted samples.
pub fn entropy_by_sorting(samples: &[u32]) -> f64 {
    let mut s = samples.to_vec();
    s.sort_unstable();
    let n = s.len() as f64;
    let mut h = 0.0;
    let mut i = 0;
    while i < s.len() {
        let j = i + s[i..].iter().take_while(|&&v| v == s[i]).count();
        let p = (j - i) as f64 / n;
        h -= p * p.ln();
        i = j;
    }
    h
}

// ---- cuboid ----

/// Volume of the largest all-free box, trying every box.
pub fn exhaustive_cuboid(dims: [usize; 3], free: &[bool]) -> usize {
    let [nx, ny, nz] = dims;
    let at = |x: usize, y: usize, z: usize| free[(z * ny + y) * nx + x];
    let mut best = 0;
    for x0 in 0..nx {
        for x1 in x0 + 1..=nx {
            for y0 in 0..ny {
                for y1 in y0 + 1..=ny {
                    for z0 in 0..nz {
                        for z1 in z0 + 1..=nz {
                            let v = (x1 - x0) * (y1 - y0) * (z1 - z0);
                            if v <= best {
                                continue;
                            }
                            let ok = (z0..z1).all(|z| (y0..y1).all(|y| (x0..x1).all(|x| at(x, y, z))));
                            if ok {
                                best = v;
                            }
                        }
                    }
                }
            }
        }
    }
    best
}

// ---- shortest paths ----

#[derive(PartialEq)]
struct Item(f64, usize);

impl Eq for Item {}

impl Ord for Item {
    fn cmp(&self, o: &Self) -> Ordering {
        o.0.total_cmp(&self.0).then(o.1.cmp(&self.1))
    }
}

impl PartialOrd for Item {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

/// Dijkstra on a row-major `w`x`h` mask with 8-connectivity; a diagonal
/// step needs both cells it squeezes between to be open. Costs in cells.
pub fn grid_dijkstra(w: usize, h: usize, open: &[bool], start: usize, goal: usize) -> Option<f64> {
    grid_dijkstra_steps(w, h, open, start, goal).map(|(a, b)| a as f64 + b as f64 * 2f64.sqrt())
}

/// Straight and diagonal step counts of a shortest path. Distinct costs
/// `a + b√2` on a small grid differ by far more than rounding, and equal
/// costs have equal counts, so the pair is an exact cost.
pub fn grid_dijkstra_steps(w: usize, h: usize, open: &[bool], start: usize, goal: usize) -> Option<(u32, u32)> {
    if !open[start] || !open[goal] {
        return None;
    }
    let ok = |x: i64, y: i64| x >= 0 && y >= 0 && (x as usize) < w && (y as usize) < h && open[y as usize * w + x as usize];
    let mut dist = vec![f64::INFINITY; w * h];
    let mut steps = vec![(0u32, 0u32); w * h];
    dist[start] = 0.0;
    let mut heap = BinaryHeap::from([Item(0.0, start)]);
    while let Some(Item(d, i)) = heap.pop() {
        if i == goal {
            return Some(steps[i]);
        }
        if d > dist[i] {
            continue;
        }
        let (x, y) = ((i % w) as i64, (i / w) as i64);
        for dx in -1..=1i64 {
            for dy in -1..=1i64 {
                if (dx, dy) == (0, 0) || !ok(x + dx, y + dy) {
                    continue;
                }
                let diagonal = dx != 0 && dy != 0;
                if diagonal && !(ok(x + dx, y) && ok(x, y + dy)) {
                    continue;
                }
                let (a, b) = steps[i];
                let next = if diagonal { (a, b + 1) } else { (a + 1, b) };
                let nd = next.0 as f64 + next.1 as f64 * 2f64.sqrt();
                let j = (y + dy) as usize * w + (x + dx) as usize;
                if nd < dist[j] - 1e-9 {
                    dist[j] = nd;
                    steps[j] = next;
                    heap.push(Item(nd, j));
                }
            }
        }
    }
    None
}

// ---- graph edit distance ----

fn dist3(a: [f64; 3], b: [f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

/// Minimum edit cost over every partial injection of `a`'s nodes into `b`'s.
/// A matched pair needs equal layer and label and lies within the layer's
/// distance; matched objects must have corresponding parents. Unmatched
/// nodes and unpreserved parent edges cost 1 each, on both sides.
pub fn ged_by_permutation(a: &GedGraph, b: &GedGraph, object_dist: f64, room_dist: f64) -> u64 {
    let edges_a = a.nodes.iter().filter(|n| n.parent.is_some()).count() as u64;
    let edges_b = b.nodes.iter().filter(|n| n.parent.is_some()).count() as u64;
    let mut map: Vec<Option<usize>> = vec![None; a.nodes.len()];
    let mut used = vec![false; b.nodes.len()];
    let mut best = u64::MAX;

    fn eval(a: &GedGraph, b: &GedGraph, map: &[Option<usize>], od: f64, rd: f64, ea: u64, eb: u64) -> Option<u64> {
        let mut kept_edges = 0u64;
        for (i, m) in map.iter().enumerate() {
            let Some(j) = *m else { continue };
            let (x, y) = (&a.nodes[i], &b.nodes[j]);
            if x.is_room != y.is_room || x.label != y.label {
                return None;
            }
            let limit = if x.is_room { rd } else { od };
            if dist3(x.pos, y.pos) > limit {
                return None;
            }
            if !x.is_room {
                let corresponds = match (x.parent, y.parent) {
                    (None, None) => true,
                    (Some(p), Some(q)) => map[p] == Some(q),
                    _ => false,
                };
                if !corresponds {
                    return None;
                }
            }
            if let (Some(p), Some(q)) = (x.parent, y.parent) {
                if map[p] == Some(q) {
                    kept_edges += 1;
                }
            }
        }
        let matched = map.iter().flatten().count() as u64;
        let nodes = (a.nodes.len() as u64 - matched) + (b.nodes.len() as u64 - matched);
        Some(nodes + (ea - kept_edges) + (eb - kept_edges))
    }

    #[allow(clippy::too_many_arguments)]
    fn rec(
        i: usize,
        a: &GedGraph,
        b: &GedGraph,
        map: &mut Vec<Option<usize>>,
        used: &mut Vec<bool>,
        best: &mut u64,
        od: f64,
        rd: f64,
        ea: u64,
        eb: u64,
    ) {
        if i == a.nodes.len() {
            if let Some(c) = eval(a, b, map, od, rd, ea, eb) {
                *best = (*best).min(c);
            }
            return;
        }
        map[i] = None;
        rec(i + 1, a, b, map, used, best, od, rd, ea, eb);
        for j in 0..b.nodes.len() {
            if !used[j] {
                used[j] = true;
                map[i] = Some(j);
                rec(i + 1, a, b, map, used, best, od, rd, ea, eb);
                map[i] = None;
                used[j] = false;
            }
        }
    }

    rec(0, a, b, &mut map, &mut used, &mut best, object_dist, room_dist, edges_a, edges_b);
    best
}

// ---- random graphs ----

pub const ROOM_LABELS: [&str; 3] = ["kitchen", "bedroom", "office"];
pub const OBJECT_LABELS: [&str; 4] = ["chair", "table", "bed", "sofa"];

pub fn square(x0: f64, y0: f64, x1: f64, y1: f64) -> Vec<Vec2> {
    vec![Vec2::new(x0, y0), Vec2::new(x1, y0), Vec2::new(x1, y1), Vec2::new(x0, y1)]
}

pub fn add_room(g: &mut SceneGraph, label: &str, x0: f64, y0: f64, x1: f64, y1: f64, prov: Provenance) -> NodeId {
    let id = g.alloc_id();
    let feature = BTreeMap::new();
    g.upsert(RoomNode {
        id,
        label: label.into(),
        centroid: Vec2::new((x0 + x1) / 2.0, (y0 + y1) / 2.0),
        footprint: square(x0, y0, x1, y1),
        feature,
        provenance: prov,
    })
    .unwrap()
}

pub fn add_object(g: &mut SceneGraph, label: &str, center: Vec3, half: Vec3, yaw: f64, parent: Option<NodeId>, prov: Provenance) -> NodeId {
    let id = g.alloc_id();
    g.upsert(ObjectNode { id, label: label.into(), center, half_extents: half, yaw, parent_room: parent, provenance: prov }).unwrap()
}

pub fn add_wall(g: &mut SceneGraph, kind: StructureKind, center: Vec3, half: Vec3, yaw: f64) -> NodeId {
    let id = g.alloc_id();
    let normal = Vec2::new(0.0, 1.0).rotate(yaw).with_z(0.0);
    let plane = Plane { normal, offset: normal.dot(center) };
    g.upsert(StructureNode { id, kind, plane, bbox: OrientedBox::new(center, half, yaw), observation_count: 3 }).unwrap()
}

/// Rooms side by side along x, each holding a few objects, some nothing
/// boxes and loose objects. Every layer and both provenances appear.
pub fn random_graph(rng: &mut impl Rng, max_rooms: usize, max_objects: usize) -> SceneGraph {
    let mut g = SceneGraph::new();
    let prov = |rng: &mut dyn rand::RngCore| if rng.gen_bool(0.5) { Provenance::Observed } else { Provenance::Predicted };
    let rooms: Vec<(NodeId, f64)> = (0..rng.gen_range(0..=max_rooms))
        .map(|k| {
            let x0 = 5.0 * k as f64;
            let label = ROOM_LABELS[rng.gen_range(0..ROOM_LABELS.len())];
            let p = prov(rng);
            (add_room(&mut g, label, x0, 0.0, x0 + 4.0, 4.0, p), x0)
        })
        .collect();
    for _ in 0..rng.gen_range(0..=max_objects) {
        let label = OBJECT_LABELS[rng.gen_range(0..OBJECT_LABELS.len())];
        let half = Vec3::new(rng.gen_range(0.1..0.6), rng.gen_range(0.1..0.6), rng.gen_range(0.1..0.8));
        let yaw = rng.gen_range(-PI..PI);
        let p = prov(rng);
        if !rooms.is_empty() && rng.gen_bool(0.8) {
            let (room, x0) = rooms[rng.gen_range(0..rooms.len())];
            let c = Vec3::new(x0 + rng.gen_range(0.5..3.5), rng.gen_range(0.5..3.5), half.z);
            add_object(&mut g, label, c, half, yaw, Some(room), p);
        } else {
            let c = Vec3::new(rng.gen_range(-3.0..-0.5), rng.gen_range(0.0..4.0), half.z);
            add_object(&mut g, label, c, half, yaw, None, p);
        }
    }
    for &(room, x0) in &rooms {
        if rng.gen_bool(0.5) {
            let id = g.alloc_id();
            let lo = Vec3::new(x0 + rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0), 0.0);
            let bbox = Aabb::new(lo, lo + Vec3::new(rng.gen_range(1.0..2.0), rng.gen_range(1.0..2.0), 1.0));
            g.upsert(NothingNode { id, bbox, parent_room: Some(room) }).unwrap();
        }
        if rng.gen_bool(0.5) {
            add_wall(&mut g, StructureKind::Wall, Vec3::new(x0 + 2.0, 4.0, 1.25), Vec3::new(2.0, 0.05, 1.25), 0.0);
        }
    }
    g
}

/// Small graphs for exact edit-distance checks: at most `max_nodes` rooms
/// and objects, positions on a coarse lattice so substitutions are common.
pub fn random_ged_graph(rng: &mut impl Rng, max_nodes: usize) -> SceneGraph {
    let mut g = SceneGraph::new();
    let n = rng.gen_range(0..=max_nodes);
    let n_rooms = rng.gen_range(0..=n.min(2));
    let mut rooms = Vec::new();
    for _ in 0..n_rooms {
        let x0 = 4.0 * rng.gen_range(0..3) as f64 + rng.gen_range(-1.0..1.0);
        let label = ROOM_LABELS[rng.gen_range(0..2)];
        rooms.push((add_room(&mut g, label, x0, 0.0, x0 + 4.0, 4.0, Provenance::Observed), x0));
    }
    for _ in n_rooms..n {
        let label = OBJECT_LABELS[rng.gen_range(0..2)];
        let jitter = Vec3::new(rng.gen_range(-0.4..0.4), rng.gen_range(-0.4..0.4), 0.0);
        let half = Vec3::new(0.3, 0.3, 0.4);
        if !rooms.is_empty() && rng.gen_bool(0.7) {
            let (room, x0) = rooms[rng.gen_range(0..rooms.len())];
            let c = Vec3::new(x0 + 1.0 + rng.gen_range(0..3) as f64, 2.0, 0.4) + jitter;
            add_object(&mut g, label, c, half, 0.0, Some(room), Provenance::Observed);
        } else {
            let c = Vec3::new(1.0 + rng.gen_range(0..3) as f64, 2.0, 0.4) + jitter;
            add_object(&mut g, label, c, half, 0.0, None, Provenance::Observed);
        }
    }
    g
}

/// Scene for visibility checks: free-standing walls (some low, some
/// doors), objects and nothing boxes scattered over a 12 m square, and a
/// camera pose off every wall.
pub fn random_render_case(rng: &mut impl Rng) -> (SceneGraph, Pose, View) {
    let mut g = SceneGraph::new();
    let r0 = add_room(&mut g, "kitchen", -6.0, -6.0, 0.0, 6.0, Provenance::Observed);
    let r1 = add_room(&mut g, "office", 0.0, -6.0, 6.0, 6.0, Provenance::Predicted);
    for _ in 0..rng.gen_range(0..6) {
        let kind = if rng.gen_bool(0.8) { StructureKind::Wall } else { StructureKind::Door };
        let top = if rng.gen_bool(0.8) { 2.5 } else { 0.8 };
        let c = Vec3::new(rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0), top / 2.0);
        let half = Vec3::new(rng.gen_range(0.5..3.0), rng.gen_range(0.03..0.15), top / 2.0);
        add_wall(&mut g, kind, c, half, rng.gen_range(-PI..PI));
    }
    for _ in 0..rng.gen_range(0..12) {
        let half = Vec3::new(rng.gen_range(0.1..0.6), rng.gen_range(0.1..0.6), rng.gen_range(0.1..0.8));
        let c = Vec3::new(rng.gen_range(-5.5..5.5), rng.gen_range(-5.5..5.5), rng.gen_range(0.0..1.5) + half.z);
        let parent = if rng.gen_bool(0.8) { Some(if c.x < 0.0 { r0 } else { r1 }) } else { None };
        let label = OBJECT_LABELS[rng.gen_range(0..OBJECT_LABELS.len())];
        add_object(&mut g, label, c, half, rng.gen_range(-PI..PI), parent, Provenance::Predicted);
    }
    for _ in 0..rng.gen_range(0..4) {
        let id = g.alloc_id();
        let lo = Vec3::new(rng.gen_range(-5.5..3.5), rng.gen_range(-5.5..3.5), 0.0);
        let bbox = Aabb::new(lo, lo + Vec3::new(rng.gen_range(1.0..2.0), rng.gen_range(1.0..2.0), 1.0));
        let parent = if lo.x < -1.0 { Some(r0) } else if lo.x > 0.0 { Some(r1) } else { None };
        g.upsert(NothingNode { id, bbox, parent_room: parent }).unwrap();
    }
    let view = View {
        fov: if rng.gen_bool(0.3) { TAU } else { rng.gen_range(0.5..2.5) },
        range: rng.gen_range(2.0..8.0),
        camera_height: rng.gen_range(0.5..1.5),
    };
    let pose = loop {
        let p = Pose::new(rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0), rng.gen_range(-PI..PI));
        if !g.walls().any(|w| in_box(&w.bbox, p.position.with_z(view.camera_height))) {
            break p;
        }
    };
    (g, pose, view)
}

// ---- visibility by sampling ----

/// Spacing of the sampled boundaries and ray steps, meters.
pub const MARCH_STEP: f64 = 2e-3;

fn in_box(b: &OrientedBox, p: Vec3) -> bool {
    let d = p - b.center;
    let (s, c) = b.yaw.sin_cos();
    let lx = c * d.x + s * d.y;
    let ly = -s * d.x + c * d.y;
    lx.abs() <= b.half_extents.x && ly.abs() <= b.half_extents.y && d.z.abs() <= b.half_extents.z
}

fn corners(center: Vec2, half: Vec2, yaw: f64) -> [Vec2; 4] {
    [(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)].map(|(sx, sy)| center + Vec2::new(sx * half.x, sy * half.y).rotate(yaw))
}

fn in_convex(p: Vec2, poly: &[Vec2; 4]) -> bool {
    (0..4).all(|i| {
        let (a, b) = (poly[i], poly[(i + 1) % 4]);
        (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x) >= 0.0
    })
}

fn in_sector(p: Vec2, pose: Pose, view: &View) -> bool {
    let d = p - pose.position;
    if d.x.hypot(d.y) > view.range {
        return false;
    }
    if view.fov >= TAU || d.x == 0.0 && d.y == 0.0 {
        return true;
    }
    let mut a = d.y.atan2(d.x) - pose.yaw;
    while a > PI {
        a -= TAU;
    }
    while a < -PI {
        a += TAU;
    }
    a.abs() <= view.fov / 2.0
}

fn segment_samples(a: Vec2, b: Vec2) -> impl Iterator<Item = Vec2> {
    let n = ((a.distance(b) / MARCH_STEP).ceil() as usize).max(1);
    (0..=n).map(move |k| a + (b - a) * (k as f64 / n as f64))
}

/// Footprint and sector overlap, from dense samples of both boundaries.
fn footprint_in_view(fp: &[Vec2; 4], pose: Pose, view: &View) -> bool {
    if in_convex(pose.position, fp) {
        return true;
    }
    if (0..4).any(|i| segment_samples(fp[i], fp[(i + 1) % 4]).any(|p| in_sector(p, pose, view))) {
        return true;
    }
    let half = if view.fov >= TAU { PI } else { view.fov / 2.0 };
    let n = ((2.0 * half * view.range / MARCH_STEP).ceil() as usize).max(1);
    let arc = (0..=n).map(|k| pose.position + Vec2::from_angle(pose.yaw - half + 2.0 * half * k as f64 / n as f64) * view.range);
    let mut boundary: Vec<Vec2> = arc.collect();
    if view.fov < TAU {
        for s in [-half, half] {
            boundary.extend(segment_samples(pose.position, pose.position + Vec2::from_angle(pose.yaw + s) * view.range));
        }
    }
    boundary.into_iter().any(|p| in_convex(p, fp))
}

fn line_blocked(walls: &[(NodeId, OrientedBox)], eye: Vec3, target: Vec3, skip: NodeId) -> bool {
    let n = ((eye.distance(target) / MARCH_STEP).ceil() as usize).max(1);
    (0..=n).any(|k| {
        let p = eye + (target - eye) * (k as f64 / n as f64);
        walls.iter().any(|(id, b)| *id != skip && in_box(b, p))
    })
}

/// Visible node ids (sorted) and the dominant room label.
pub fn visible_by_marching(g: &SceneGraph, pose: Pose, view: &View) -> (Vec<NodeId>, String) {
    let eye = pose.position.with_z(view.camera_height);
    let walls: Vec<(NodeId, OrientedBox)> = g.structures().filter(|s| s.kind == StructureKind::Wall).map(|s| (s.id, s.bbox)).collect();
    let mut ids = Vec::new();
    let mut per_room: BTreeMap<NodeId, usize> = BTreeMap::new();
    for o in g.objects() {
        let fp = corners(o.center.xy(), o.half_extents.xy(), o.yaw);
        if footprint_in_view(&fp, pose, view) && !line_blocked(&walls, eye, o.center, o.id) {
            ids.push(o.id);
            if let Some(p) = o.parent_room {
                *per_room.entry(p).or_default() += 1;
            }
        }
    }
    for n in g.nothings() {
        let (lo, hi) = (n.bbox.min, n.bbox.max);
        let c = (lo + hi) * 0.5;
        let fp = corners(c.xy(), (hi - lo).xy() * 0.5, 0.0);
        if footprint_in_view(&fp, pose, view) && !line_blocked(&walls, eye, c, n.id) {
            ids.push(n.id);
        }
    }
    for s in g.structures() {
        let b = s.bbox;
        let fp = corners(b.center.xy(), b.half_extents.xy(), b.yaw);
        if footprint_in_view(&fp, pose, view) && !line_blocked(&walls, eye, b.center, s.id) {
            ids.push(s.id);
        }
    }
    ids.sort();
    let mut best: Option<(usize, String)> = None;
    for (room, n) in per_room {
        let label = g.room(room).map(|r| r.label.clone()).unwrap_or_default();
        let better = match &best {
            None => true,
            Some((bn, bl)) => n > *bn || (n == *bn && label < *bl),
        };
        if better {
            best = Some((n, label));
        }
    }
    (ids, best.map(|b| b.1).unwrap_or_else(|| "none".into()))
}

// ---- worlds ----

/// Panoramic scan stops for covering a world: room centers, door centers
/// and a lattice over free space, each nudged off obstacles.
pub fn coverage_stops(world: &World, spacing: f64) -> Vec<Pose> {
    let mut stops: Vec<Vec2> = world.rooms.iter().map(|r| r.rect.center()).collect();
    stops.extend(world.doors.iter().map(|d| d.center));
    let e = world.extent;
    let (nx, ny) = ((e.width() / spacing) as usize, (e.height() / spacing) as usize);
    for i in 0..nx {
        for j in 0..ny {
            stops.push(e.min + Vec2::new((i as f64 + 0.5) * spacing, (j as f64 + 0.5) * spacing));
        }
    }
    stops
        .into_iter()
        .filter_map(|p| {
            (0..40)
                .map(|k| if k == 0 { p } else { p + Vec2::from_angle(k as f64) * (0.1 + 0.05 * k as f64) })
                .find(|&q| !world.in_collision(q) && world.free_space.is_free(q))
                .map(|q| Pose { position: q, yaw: 0.0 })
        })
        .collect()
}
