//! Incremental construction of the observed scene graph: object tracks,
//! occupancy, nothing boxes, walls, doors and rooms.

mod cuboid;
mod grid;
mod rooms;
mod tracks;
mod walls;

use std::collections::{BTreeMap, BTreeSet};

use log::warn;
use serde::{Deserialize, Serialize};

pub use cuboid::{largest_empty_cuboid, largest_rectangle_histogram, Cuboid, VoxelGrid};
pub use grid::{update_occupancy, Cell, OccupancyGrid};
pub use rooms::{barrier_mask, segment_rooms, RoomError, RoomRegion};
pub use tracks::{associate_tracks, fit_box, greedy_assignment, overlap_coefficient, voxel_iou, Association, Track, VoxelError};
pub use walls::{accumulate_walls, fit_wall_planes, infer_doors, WallError, WallFitConfig, WallMergeConfig, WallSegment, WallTrack};

pub use crate::voxel::VoxelSet;

use crate::catalog::{label_histogram, RoomProfiles};
use crate::scene_graph::{
    NodeId, NothingNode, ObjectNode, Plane, Provenance, RoomNode, SceneGraph, StructureKind, StructureNode,
};
use crate::world::Observation;
use crate::{Aabb, Rect, Vec2, Vec3};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MapperConfig {
    /// Seconds without association before a track is terminated.
    pub tau: f64,
    pub iou_min: f64,
    pub wall_confirm_count: u32,
    /// m³
    pub cuboid_min_volume: f64,
    /// Occupancy grid cell size.
    pub resolution: f64,
    /// Voxel size of the 3D occupancy used for nothing extraction.
    pub nothing_resolution: f64,
    /// Nothing-extraction window centered on the pose (x, y, z sizes).
    pub window: (f64, f64, f64),
    pub walls: WallFitConfig,
    pub wall_merge: WallMergeConfig,
    /// Admissible gap between collinear walls for a door.
    pub door_width: (f64, f64),
    /// m²; smaller free-space fragments are absorbed by neighbours.
    pub min_room_area: f64,
    /// Same-label tracks overlapping this much (intersection over the
    /// smaller set) are one object.
    pub dedup_overlap: f64,
    /// Nothing boxes where one holds this fraction of the other are merged.
    pub nothing_merge: f64,
}

impl Default for MapperConfig {
    fn default() -> Self {
        Self {
            tau: 5.0,
            iou_min: 0.3,
            wall_confirm_count: 2,
            cuboid_min_volume: 1.0,
            resolution: 0.1,
            nothing_resolution: 0.2,
            window: (8.0, 8.0, 3.0),
            walls: WallFitConfig::default(),
            wall_merge: WallMergeConfig::default(),
            door_width: (0.6, 1.4),
            min_room_area: 1.0,
            dedup_overlap: 0.5,
            nothing_merge: 0.9,
        }
    }
}

/// Incremental mapper. `integrate` is the only mutating entry point.
#[derive(Clone, Debug)]
pub struct Mapper {
    pub config: MapperConfig,
    graph: SceneGraph,
    tracks: Vec<Track>,
    grid: OccupancyGrid,
    /// Occupied 3D cells at `nothing_resolution`.
    voxel_occ: VoxelSet,
    wall_tracks: Vec<WallTrack>,
    next_wall_id: u64,
    doors: BTreeMap<(u64, u64), NodeId>,
    room_cells: BTreeMap<NodeId, BTreeSet<(i64, i64)>>,
    profiles: RoomProfiles,
    next_track_id: u64,
    obs_count: u64,
}

impl Mapper {
    pub fn new(config: MapperConfig) -> Self {
        Self::with_profiles(config, RoomProfiles::default())
    }

    pub fn with_profiles(config: MapperConfig, profiles: RoomProfiles) -> Self {
        let r = config.resolution;
        Self {
            graph: SceneGraph::new().with_nothing_min_volume(config.cuboid_min_volume),
            tracks: Vec::new(),
            grid: OccupancyGrid::new(r, Rect::new(Vec2::zero(), Vec2::new(r, r))),
            voxel_occ: VoxelSet::new(config.nothing_resolution),
            wall_tracks: Vec::new(),
            next_wall_id: 1,
            doors: BTreeMap::new(),
            room_cells: BTreeMap::new(),
            profiles,
            next_track_id: 1,
            obs_count: 0,
            config,
        }
    }

    pub fn graph(&self) -> &SceneGraph {
        &self.graph
    }

    pub fn grid(&self) -> &OccupancyGrid {
        &self.grid
    }

    pub fn tracks(&self) -> &[Track] {
        &self.tracks
    }

    pub fn wall_tracks(&self) -> &[WallTrack] {
        &self.wall_tracks
    }

    pub fn voxel_occ(&self) -> &VoxelSet {
        &self.voxel_occ
    }

    pub fn observation_count(&self) -> u64 {
        self.obs_count
    }

    /// Fold one observation into the map and return the graph revision.
    pub fn integrate(&mut self, obs: &Observation) -> u64 {
        self.obs_count += 1;
        self.update_tracks(obs);
        update_occupancy(&mut self.grid, obs);
        for p in &obs.wall_points {
            self.voxel_occ.insert_point(*p);
        }
        for d in &obs.detections {
            for c in d.voxels.centers() {
                self.voxel_occ.insert_point(c);
            }
        }
        self.update_walls(obs);
        if obs.is_panoramic() {
            self.extract_nothing(obs.pose.position);
        }
        self.update_rooms();
        self.graph.revision()
    }

    fn update_tracks(&mut self, obs: &Observation) {
        let now = obs.timestamp;
        let cfg = &self.config;
        let assoc = associate_tracks(&self.tracks, &obs.detections, now, cfg.iou_min, cfg.tau);
        let mut touched = BTreeSet::new();
        for &(t, d) in &assoc.matches {
            let tr = &mut self.tracks[t];
            tr.voxels.union_with(&obs.detections[d].voxels);
            tr.last_seen = now;
            tr.hit_count += 1;
            touched.insert(tr.id);
        }
        for &t in &assoc.terminated {
            self.tracks[t].active = false;
        }
        for &d in &assoc.new_tracks {
            let det = &obs.detections[d];
            // A detection covering most of a known object of the same label
            // (a partial view, or a view after termination) extends it.
            let best = self
                .tracks
                .iter()
                .enumerate()
                .filter(|(_, t)| t.label == det.label)
                .map(|(i, t)| (i, overlap_coefficient(&t.voxels, &det.voxels)))
                .filter(|&(_, o)| o >= cfg.dedup_overlap)
                .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)));
            if let Some((i, _)) = best {
                let tr = &mut self.tracks[i];
                tr.voxels.union_with(&det.voxels);
                tr.last_seen = now;
                tr.hit_count += 1;
                tr.active = true;
                touched.insert(tr.id);
            } else {
                let id = self.next_track_id;
                self.next_track_id += 1;
                self.tracks.push(Track {
                    id,
                    label: det.label.clone(),
                    voxels: det.voxels.clone(),
                    last_seen: now,
                    hit_count: 1,
                    active: true,
                    node: None,
                });
                touched.insert(id);
            }
        }
        self.dedup_tracks(&mut touched);
        for tr in self.tracks.iter_mut().filter(|t| touched.contains(&t.id)) {
            let Some((center, half, yaw)) = fit_box(&tr.voxels) else { continue };
            let id = *tr.node.get_or_insert_with(|| self.graph.alloc_id());
            let parent = self.graph.object(id).and_then(|o| o.parent_room);
            let mut node = ObjectNode {
                id,
                label: tr.label.clone(),
                center,
                half_extents: half,
                yaw,
                parent_room: parent,
                provenance: Provenance::Observed,
            };
            if self.graph.upsert(node.clone()).is_err() {
                // The refit moved the center out of the old parent room.
                node.parent_room = None;
                if let Err(e) = self.graph.upsert(node) {
                    warn!("object track {} not stored: {e}", tr.id);
                }
            }
        }
    }

    /// Merge same-label tracks that describe one object; the older track
    /// survives and the younger one's node is dropped.
    fn dedup_tracks(&mut self, touched: &mut BTreeSet<u64>) {
        loop {
            let mut pair = None;
            'outer: for i in 0..self.tracks.len() {
                for j in i + 1..self.tracks.len() {
                    let (a, b) = (&self.tracks[i], &self.tracks[j]);
                    if a.label == b.label
                        && (touched.contains(&a.id) || touched.contains(&b.id))
                        && overlap_coefficient(&a.voxels, &b.voxels) >= self.config.dedup_overlap
                    {
                        pair = Some(if a.id < b.id { (i, j) } else { (j, i) });
                        break 'outer;
                    }
                }
            }
            let Some((keep, drop)) = pair else { return };
            let gone = self.tracks[drop].clone();
            let k = &mut self.tracks[keep];
            k.voxels.union_with(&gone.voxels);
            k.last_seen = k.last_seen.max(gone.last_seen);
            k.hit_count += gone.hit_count;
            k.active |= gone.active;
            touched.insert(k.id);
            if let Some(n) = gone.node {
                let _ = self.graph.remove(n);
            }
            self.tracks.remove(drop);
        }
    }

    fn update_walls(&mut self, obs: &Observation) {
        let cfg = &self.config;
        if obs.wall_points.len() >= 3 {
            let fit_cfg = WallFitConfig { seed: cfg.walls.seed ^ self.obs_count, ..cfg.walls.clone() };
            match fit_wall_planes(&obs.wall_points, &fit_cfg) {
                Ok(nodes) => {
                    let t = cfg.walls.thickness;
                    let pose = obs.pose.position;
                    // Observed points lie on the face toward the sensor; move
                    // each candidate to the wall's center line.
                    let cands: Vec<WallSegment> = nodes
                        .iter()
                        .map(|n| {
                            let mut s = WallSegment::from_node(n);
                            let side = if s.normal.dot(pose) >= s.offset { 1.0 } else { -1.0 };
                            s.offset -= side * t / 2.0;
                            s
                        })
                        .collect();
                    let before: BTreeMap<u64, Option<NodeId>> =
                        self.wall_tracks.iter().map(|w| (w.id, w.node)).collect();
                    accumulate_walls(&mut self.wall_tracks, &cands, self.obs_count, t, &cfg.wall_merge, &mut self.next_wall_id);
                    let alive: BTreeSet<u64> = self.wall_tracks.iter().map(|w| w.id).collect();
                    for (id, node) in before {
                        if !alive.contains(&id) {
                            if let Some(n) = node {
                                let _ = self.graph.remove(n);
                            }
                        }
                    }
                }
                Err(e) => warn!("wall fitting skipped: {e}"),
            }
        }
        let t = self.config.walls.thickness;
        for w in self.wall_tracks.iter_mut().filter(|w| w.count >= self.config.wall_confirm_count) {
            let id = *w.node.get_or_insert_with(|| self.graph.alloc_id());
            if let Err(e) = self.graph.upsert(w.seg.to_node(id, t, w.count)) {
                warn!("wall {} not stored: {e}", w.id);
            }
        }
        let confirmed: Vec<&WallTrack> =
            self.wall_tracks.iter().filter(|w| w.count >= self.config.wall_confirm_count).collect();
        let found = infer_doors(&confirmed, &self.grid, t, self.config.door_width, &self.config.wall_merge);
        let counts: BTreeMap<u64, u32> = confirmed.iter().map(|w| (w.id, w.count)).collect();
        for (key, node) in std::mem::take(&mut self.doors) {
            if !found.contains_key(&key) {
                let _ = self.graph.remove(node);
            } else {
                self.doors.insert(key, node);
            }
        }
        for (key, bbox) in found {
            let id = *self.doors.entry(key).or_insert_with(|| self.graph.alloc_id());
            let normal = Vec2::from_angle(bbox.yaw).perp();
            let door = StructureNode {
                id,
                kind: StructureKind::Door,
                plane: Plane { normal: normal.with_z(0.0), offset: normal.dot(bbox.center.xy()) },
                bbox,
                observation_count: counts[&key.0].min(counts[&key.1]),
            };
            if let Err(e) = self.graph.upsert(door) {
                warn!("door not stored: {e}");
            }
        }
    }

    /// Largest confirmed-free cuboid in the window around `pos`, kept as a
    /// nothing node when large enough.
    fn extract_nothing(&mut self, pos: Vec2) {
        let cfg = &self.config;
        let r = cfg.nothing_resolution;
        let (wx, wy, wz) = cfg.window;
        let nx = (wx / r).round() as usize;
        let ny = (wy / r).round() as usize;
        let nz = (wz / r).round() as usize;
        let kx0 = ((pos.x - wx / 2.0) / r).floor() as i64;
        let ky0 = ((pos.y - wy / 2.0) / r).floor() as i64;
        let fine = self.grid.resolution;
        let sub = (r / fine).round().max(1.0) as i64;
        let mut vg = VoxelGrid::filled([nx, ny, nz], Cell::Unknown);
        for y in 0..ny {
            for x in 0..nx {
                let base = Vec2::new((kx0 + x as i64) as f64 * r, (ky0 + y as i64) as f64 * r);
                let mut all_free = true;
                'cells: for i in 0..sub {
                    for j in 0..sub {
                        let p = base + Vec2::new((i as f64 + 0.5) * fine, (j as f64 + 0.5) * fine);
                        if self.grid.index_of(p).map(|k| self.grid.get(k)) != Some(Cell::Free) {
                            all_free = false;
                            break 'cells;
                        }
                    }
                }
                for z in 0..nz {
                    let key = [kx0 + x as i64, ky0 + y as i64, z as i64];
                    let c = if self.voxel_occ.cells.contains(&key) {
                        Cell::Occupied
                    } else if all_free {
                        Cell::Free
                    } else {
                        Cell::Unknown
                    };
                    vg.set(x, y, z, c);
                }
            }
        }
        let best = largest_empty_cuboid(&vg);
        let bbox = Aabb::new(
            Vec3::new(
                (kx0 + best.x.start as i64) as f64 * r,
                (ky0 + best.y.start as i64) as f64 * r,
                best.z.start as f64 * r,
            ),
            Vec3::new(
                (kx0 + best.x.end as i64) as f64 * r,
                (ky0 + best.y.end as i64) as f64 * r,
                best.z.end as f64 * r,
            ),
        );
        if best.volume() == 0 || bbox.volume() < cfg.cuboid_min_volume {
            return;
        }
        let merge = cfg.nothing_merge;
        let mut dominated = false;
        let mut absorbed = Vec::new();
        for n in self.graph.nothings() {
            let inter = n.bbox.overlap_volume(&bbox);
            if inter >= merge * bbox.volume() && n.bbox.volume() >= bbox.volume() {
                dominated = true;
                break;
            }
            if inter >= merge * n.bbox.volume() {
                absorbed.push(n.id);
            }
        }
        if dominated {
            return;
        }
        for id in absorbed {
            let _ = self.graph.remove(id);
        }
        let id = self.graph.alloc_id();
        if let Err(e) = self.graph.upsert(NothingNode { id, bbox, parent_room: None }) {
            warn!("nothing box not stored: {e}");
        }
    }

    fn update_rooms(&mut self) {
        let mut barriers: Vec<_> = self
            .graph
            .structures()
            .filter(|s| matches!(s.kind, StructureKind::Wall | StructureKind::Door))
            .map(|s| s.bbox)
            .collect();
        barriers.sort_by(|a, b| a.center.x.total_cmp(&b.center.x).then(a.center.y.total_cmp(&b.center.y)));
        let regions = match segment_rooms(&self.grid, &barriers, self.config.min_room_area) {
            Ok(r) => r,
            Err(e) => {
                warn!("room segmentation skipped: {e}");
                return;
            }
        };

        // Stable ids: regions take the id of the old room they overlap most.
        let mut pairs = Vec::new();
        for (ri, reg) in regions.iter().enumerate() {
            for (id, cells) in &self.room_cells {
                let n = reg.cells.intersection(cells).count();
                if n > 0 {
                    pairs.push((n, *id, ri));
                }
            }
        }
        pairs.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        let mut ids: Vec<Option<NodeId>> = vec![None; regions.len()];
        let mut used = BTreeSet::new();
        for (_, id, ri) in pairs {
            if ids[ri].is_none() && used.insert(id) {
                ids[ri] = Some(id);
            }
        }

        let children: Vec<NodeId> = self.graph.objects().map(|o| o.id).chain(self.graph.nothings().map(|n| n.id)).collect();
        for c in children {
            let _ = self.graph.clear_parent(c);
        }
        let stale: Vec<NodeId> = self.room_cells.keys().filter(|id| !used.contains(*id)).copied().collect();
        for id in stale {
            let _ = self.graph.remove(id);
        }
        self.room_cells.clear();
        for (ri, reg) in regions.into_iter().enumerate() {
            let id = ids[ri].unwrap_or_else(|| self.graph.alloc_id());
            let node = RoomNode {
                id,
                label: "unknown".into(),
                centroid: reg.centroid,
                footprint: reg.footprint.corners(),
                feature: BTreeMap::new(),
                provenance: Provenance::Observed,
            };
            if let Err(e) = self.graph.upsert(node) {
                warn!("room not stored: {e}");
                continue;
            }
            self.room_cells.insert(id, reg.cells);
        }
        self.assign_parents();

        let rooms: Vec<RoomNode> = self.graph.rooms().cloned().collect();
        for mut room in rooms {
            let feature = label_histogram(self.graph.children_of(room.id).map(|o| o.label.as_str()));
            room.label = self.profiles.classify(&feature);
            room.feature = feature;
            if let Err(e) = self.graph.upsert(room) {
                warn!("room feature not stored: {e}");
            }
        }
    }

    /// Parent every object and nothing node to the room containing its
    /// center; smallest footprint wins where rooms overlap.
    fn assign_parents(&mut self) {
        let links: Vec<(NodeId, NodeId)> = self
            .graph
            .objects()
            .map(|o| (o.id, o.center.xy()))
            .chain(self.graph.nothings().map(|n| (n.id, n.bbox.center().xy())))
            .filter_map(|(id, c)| self.graph.room_at(c).map(|r| (id, r.id)))
            .collect();
        for (child, room) in links {
            if let Err(e) = self.graph.connect_parent(child, room) {
                warn!("parent link skipped: {e}");
            }
        }
    }
}

impl Default for Mapper {
    fn default() -> Self {
        Self::new(MapperConfig::default())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::{Detection, FreeRay, Pose};

    fn det(label: &str, x0: i64, n: i64) -> Detection {
        let mut cells = Vec::new();
        for x in x0..x0 + n {
            for y in 0..n {
                for z in 0..n {
                    cells.push([x, y, z]);
                }
            }
        }
        Detection { label: label.into(), voxels: VoxelSet::from_cells(0.1, cells) }
    }

    fn obs_with(dets: Vec<Detection>, t: f64) -> Observation {
        let mut o = Observation::empty(Pose::new(0.0, 0.0, 0.0), t);
        o.detections = dets;
        o
    }

    #[test]
    fn tau_terminates_track() {
        let mut m = Mapper::default();
        m.integrate(&obs_with(vec![det("chair", 0, 4)], 0.0));
        assert!(m.tracks()[0].active);
        m.integrate(&obs_with(vec![], 6.0));
        assert!(!m.tracks()[0].active);
        assert_eq!(m.graph().object_count(), 1);
    }

    #[test]
    fn partial_view_extends_track() {
        let mut m = Mapper::default();
        m.integrate(&obs_with(vec![det("chair", 0, 6)], 0.0));
        // A small corner of the same chair: IoU below the gate.
        m.integrate(&obs_with(vec![det("chair", 0, 2)], 1.0));
        assert_eq!(m.tracks().len(), 1);
        assert_eq!(m.graph().object_count(), 1);
    }

    /// Wall points of the face y = 0.95 of a wall along x from 0 to `len`.
    fn wall_obs(len: f64, t: f64) -> Observation {
        let mut o = Observation::empty(Pose::new(len / 2.0, -1.0, 0.0), t);
        let n = (len / 0.1).round() as usize;
        for i in 0..n {
            for r in 0..9 {
                o.wall_points.push(Vec3::new(0.05 + 0.1 * i as f64, 0.95, 0.05 + 0.25 * r as f64));
            }
            o.free_rays.push(FreeRay { origin: o.pose.position, end: Vec2::new(0.05 + 0.1 * i as f64, 0.95), hit: true });
        }
        o
    }

    #[test]
    fn wall_needs_confirmation() {
        let mut m = Mapper::default();
        m.integrate(&wall_obs(3.0, 0.0));
        assert_eq!(m.graph().walls().count(), 0);
        m.integrate(&wall_obs(3.0, 1.0));
        let walls: Vec<_> = m.graph().walls().collect();
        assert_eq!(walls.len(), 1);
        // Center line sits half a thickness behind the observed face.
        assert!((walls[0].bbox.center.y - 1.0).abs() < 0.02, "{:?}", walls[0].bbox.center);
        assert_eq!(walls[0].observation_count, 2);
    }
}
