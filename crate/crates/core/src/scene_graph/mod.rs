//! Layered scene graph: rooms, objects, free-space "nothing" boxes and
//! structural elements, with object/nothing -> room parent links.

mod raster;
mod yaml;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{point_in_expanded_polygon, point_in_polygon, polygon_is_simple};
use crate::{Aabb, OrientedBox, Rect, Vec2, Vec3};

pub use raster::{cross_section_raster, CrossSection, DEFAULT_BANDS};

/// Margin by which a room footprint is grown when checking that a child
/// object lies inside it.
pub const PARENT_MARGIN: f64 = 0.25;
/// Thickest admissible structure box.
pub const MAX_STRUCTURE_THICKNESS: f64 = 0.4;
pub const DEFAULT_NOTHING_MIN_VOLUME: f64 = 1.0;
const UNIT_NORMAL_TOL: f64 = 1e-9;
const FEATURE_SUM_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u64);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Observed,
    Predicted,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectNode {
    pub id: NodeId,
    pub label: String,
    pub center: Vec3,
    pub half_extents: Vec3,
    pub yaw: f64,
    pub parent_room: Option<NodeId>,
    pub provenance: Provenance,
}

impl ObjectNode {
    pub fn obb(&self) -> OrientedBox {
        OrientedBox::new(self.center, self.half_extents, self.yaw)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoomNode {
    pub id: NodeId,
    pub label: String,
    pub centroid: Vec2,
    pub footprint: Vec<Vec2>,
    pub feature: BTreeMap<String, f64>,
    pub provenance: Provenance,
}

impl RoomNode {
    pub fn footprint_bounds(&self) -> Rect {
        Rect::bounding(&self.footprint).unwrap_or_else(|| Rect::new(self.centroid, self.centroid))
    }

    pub fn contains(&self, p: Vec2) -> bool {
        point_in_polygon(p, &self.footprint)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NothingNode {
    pub id: NodeId,
    #[serde(rename = "box")]
    pub bbox: Aabb,
    pub parent_room: Option<NodeId>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StructureKind {
    Wall,
    Door,
    Window,
}

impl StructureKind {
    pub fn as_str(self) -> &'static str {
        match self {
            StructureKind::Wall => "wall",
            StructureKind::Door => "door",
            StructureKind::Window => "window",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Plane {
    pub normal: Vec3,
    pub offset: f64,
}

impl Plane {
    pub fn signed_distance(&self, p: Vec3) -> f64 {
        self.normal.dot(p) - self.offset
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StructureNode {
    pub id: NodeId,
    pub kind: StructureKind,
    pub plane: Plane,
    #[serde(rename = "box")]
    pub bbox: OrientedBox,
    pub observation_count: u32,
}

impl StructureNode {
    /// Thickness across the wall plane: the smaller horizontal extent.
    pub fn thickness(&self) -> f64 {
        2.0 * self.bbox.half_extents.x.min(self.bbox.half_extents.y)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Node {
    Object(ObjectNode),
    Room(RoomNode),
    Nothing(NothingNode),
    Structure(StructureNode),
}

impl Node {
    pub fn id(&self) -> NodeId {
        match self {
            Node::Object(n) => n.id,
            Node::Room(n) => n.id,
            Node::Nothing(n) => n.id,
            Node::Structure(n) => n.id,
        }
    }

    fn kind_name(&self) -> &'static str {
        match self {
            Node::Object(_) => "object",
            Node::Room(_) => "room",
            Node::Nothing(_) => "nothing",
            Node::Structure(_) => "structure",
        }
    }
}

impl From<ObjectNode> for Node {
    fn from(n: ObjectNode) -> Self {
        Node::Object(n)
    }
}
impl From<RoomNode> for Node {
    fn from(n: RoomNode) -> Self {
        Node::Room(n)
    }
}
impl From<NothingNode> for Node {
    fn from(n: NothingNode) -> Self {
        Node::Nothing(n)
    }
}
impl From<StructureNode> for Node {
    fn from(n: StructureNode) -> Self {
        Node::Structure(n)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("invariant violated on {node} field `{field}`: {reason}")]
    InvariantViolation { node: NodeId, field: &'static str, reason: String },
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("node {id} is not a {expected}")]
    KindMismatch { id: NodeId, expected: &'static str },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid band: z_lo={z_lo} z_hi={z_hi} cell={cell}")]
    InvalidBand { z_lo: f64, z_hi: f64, cell: f64 },
}

fn violation(node: NodeId, field: &'static str, reason: impl Into<String>) -> GraphError {
    GraphError::InvariantViolation { node, field, reason: reason.into() }
}

/// Layered scene graph. Node ids are unique across all layers and are never
/// reused; `revision` increases on every mutation.
#[derive(Clone, Debug, Default)]
pub struct SceneGraph {
    objects: BTreeMap<NodeId, ObjectNode>,
    rooms: BTreeMap<NodeId, RoomNode>,
    nothings: BTreeMap<NodeId, NothingNode>,
    structures: BTreeMap<NodeId, StructureNode>,
    revision: u64,
    next_id: u64,
    nothing_min_volume: Option<f64>,
}

/// Content equality: revision and id counters are ignored.
impl PartialEq for SceneGraph {
    fn eq(&self, o: &Self) -> bool {
        self.objects == o.objects
            && self.rooms == o.rooms
            && self.nothings == o.nothings
            && self.structures == o.structures
    }
}

impl SceneGraph {
    pub fn new() -> Self {
        Self { next_id: 1, ..Default::default() }
    }

    pub fn with_nothing_min_volume(mut self, v: f64) -> Self {
        self.nothing_min_volume = Some(v);
        self
    }

    pub fn nothing_min_volume(&self) -> f64 {
        self.nothing_min_volume.unwrap_or(DEFAULT_NOTHING_MIN_VOLUME)
    }

    pub fn revision(&self) -> u64 {
        self.revision
    }

    /// Reserve a fresh id. Ids are monotonic and never handed out twice.
    pub fn alloc_id(&mut self) -> NodeId {
        let id = NodeId(self.next_id.max(1));
        self.next_id = id.0 + 1;
        id
    }

    pub fn objects(&self) -> impl Iterator<Item = &ObjectNode> {
        self.objects.values()
    }
    pub fn rooms(&self) -> impl Iterator<Item = &RoomNode> {
        self.rooms.values()
    }
    pub fn nothings(&self) -> impl Iterator<Item = &NothingNode> {
        self.nothings.values()
    }
    pub fn structures(&self) -> impl Iterator<Item = &StructureNode> {
        self.structures.values()
    }
    pub fn walls(&self) -> impl Iterator<Item = &StructureNode> {
        self.structures.values().filter(|s| s.kind == StructureKind::Wall)
    }
    pub fn doors(&self) -> impl Iterator<Item = &StructureNode> {
        self.structures.values().filter(|s| s.kind == StructureKind::Door)
    }

    pub fn object(&self, id: NodeId) -> Option<&ObjectNode> {
        self.objects.get(&id)
    }
    pub fn room(&self, id: NodeId) -> Option<&RoomNode> {
        self.rooms.get(&id)
    }
    pub fn nothing(&self, id: NodeId) -> Option<&NothingNode> {
        self.nothings.get(&id)
    }
    pub fn structure(&self, id: NodeId) -> Option<&StructureNode> {
        self.structures.get(&id)
    }

    pub fn object_count(&self) -> usize {
        self.objects.len()
    }
    pub fn room_count(&self) -> usize {
        self.rooms.len()
    }
    pub fn node_count(&self) -> usize {
        self.objects.len() + self.rooms.len() + self.nothings.len() + self.structures.len()
    }

    pub fn contains(&self, id: NodeId) -> bool {
        self.objects.contains_key(&id)
            || self.rooms.contains_key(&id)
            || self.nothings.contains_key(&id)
            || self.structures.contains_key(&id)
    }

    /// Parent edges `(child, room)` sorted by child id.
    pub fn edges(&self) -> Vec<(NodeId, NodeId)> {
        let mut e: Vec<_> = self
            .objects
            .values()
            .filter_map(|o| o.parent_room.map(|r| (o.id, r)))
            .chain(self.nothings.values().filter_map(|n| n.parent_room.map(|r| (n.id, r))))
            .collect();
        e.sort();
        e
    }

    /// Insert or replace a node. The node's own invariants and its parent
    /// reference are checked before anything is stored.
    pub fn upsert(&mut self, node: impl Into<Node>) -> Result<NodeId, GraphError> {
        let node = node.into();
        let id = node.id();
        if id.0 == 0 {
            return Err(violation(id, "id", "id 0 is reserved"));
        }
        if let Some(existing) = self.kind_of(id) {
            if existing != node.kind_name() {
                return Err(GraphError::KindMismatch { id, expected: existing });
            }
        }
        self.check_node(&node)?;
        match node {
            Node::Object(n) => {
                self.objects.insert(id, n);
            }
            Node::Room(n) => {
                self.rooms.insert(id, n);
            }
            Node::Nothing(n) => {
                self.nothings.insert(id, n);
            }
            Node::Structure(n) => {
                self.structures.insert(id, n);
            }
        }
        self.next_id = self.next_id.max(id.0 + 1);
        self.revision += 1;
        Ok(id)
    }

    /// Remove a node; children of a removed room lose their parent link.
    pub fn remove(&mut self, id: NodeId) -> Result<Node, GraphError> {
        let node = if let Some(n) = self.objects.remove(&id) {
            Node::Object(n)
        } else if let Some(n) = self.rooms.remove(&id) {
            for o in self.objects.values_mut() {
                if o.parent_room == Some(id) {
                    o.parent_room = None;
                }
            }
            for o in self.nothings.values_mut() {
                if o.parent_room == Some(id) {
                    o.parent_room = None;
                }
            }
            Node::Room(n)
        } else if let Some(n) = self.nothings.remove(&id) {
            Node::Nothing(n)
        } else if let Some(n) = self.structures.remove(&id) {
            Node::Structure(n)
        } else {
            return Err(GraphError::UnknownNode(id));
        };
        self.revision += 1;
        Ok(node)
    }

    /// Set the parent room of an object or nothing node, replacing any
    /// previous parent.
    pub fn connect_parent(&mut self, child: NodeId, room: NodeId) -> Result<(), GraphError> {
        if !self.contains(child) {
            return Err(GraphError::UnknownNode(child));
        }
        if !self.contains(room) {
            return Err(GraphError::UnknownNode(room));
        }
        let Some(r) = self.rooms.get(&room) else {
            return Err(GraphError::KindMismatch { id: room, expected: "room" });
        };
        if let Some(o) = self.objects.get(&child) {
            if !point_in_expanded_polygon(o.center.xy(), &r.footprint, PARENT_MARGIN) {
                return Err(violation(child, "parent_room", format!("center outside footprint of {room}")));
            }
            self.objects.get_mut(&child).unwrap().parent_room = Some(room);
        } else if let Some(n) = self.nothings.get_mut(&child) {
            n.parent_room = Some(room);
        } else {
            return Err(GraphError::KindMismatch { id: child, expected: "object or nothing" });
        }
        self.revision += 1;
        Ok(())
    }

    pub fn clear_parent(&mut self, child: NodeId) -> Result<(), GraphError> {
        if let Some(o) = self.objects.get_mut(&child) {
            o.parent_room = None;
        } else if let Some(n) = self.nothings.get_mut(&child) {
            n.parent_room = None;
        } else {
            return Err(GraphError::UnknownNode(child));
        }
        self.revision += 1;
        Ok(())
    }

    fn kind_of(&self, id: NodeId) -> Option<&'static str> {
        if self.objects.contains_key(&id) {
            Some("object")
        } else if self.rooms.contains_key(&id) {
            Some("room")
        } else if self.nothings.contains_key(&id) {
            Some("nothing")
        } else if self.structures.contains_key(&id) {
            Some("structure")
        } else {
            None
        }
    }

    fn check_parent(&self, child: NodeId, parent: Option<NodeId>, center: Option<Vec2>) -> Result<(), GraphError> {
        let Some(p) = parent else { return Ok(()) };
        let Some(room) = self.rooms.get(&p) else {
            return Err(violation(child, "parent_room", format!("{p} is not a room in this graph")));
        };
        if let Some(c) = center {
            if !point_in_expanded_polygon(c, &room.footprint, PARENT_MARGIN) {
                return Err(violation(child, "parent_room", format!("center outside footprint of {p}")));
            }
        }
        Ok(())
    }

    fn check_node(&self, node: &Node) -> Result<(), GraphError> {
        match node {
            Node::Object(o) => {
                if o.label.is_empty() {
                    return Err(violation(o.id, "label", "empty"));
                }
                if !o.center.is_finite() || !o.yaw.is_finite() {
                    return Err(violation(o.id, "center", "non-finite"));
                }
                let h = o.half_extents;
                if !(h.x > 0.0 && h.y > 0.0 && h.z > 0.0) || !h.is_finite() {
                    return Err(violation(o.id, "half_extents", "must be positive componentwise"));
                }
                self.check_parent(o.id, o.parent_room, Some(o.center.xy()))
            }
            Node::Room(r) => {
                if r.label.is_empty() {
                    return Err(violation(r.id, "label", "empty"));
                }
                if !r.centroid.x.is_finite() || !r.centroid.y.is_finite() {
                    return Err(violation(r.id, "centroid", "non-finite"));
                }
                if !polygon_is_simple(&r.footprint) {
                    return Err(violation(r.id, "footprint", "not a simple polygon"));
                }
                if r.feature.values().any(|w| !w.is_finite() || *w < 0.0) {
                    return Err(violation(r.id, "feature", "negative or non-finite weight"));
                }
                let sum: f64 = r.feature.values().sum();
                if sum != 0.0 && (sum - 1.0).abs() > FEATURE_SUM_TOL {
                    return Err(violation(r.id, "feature", format!("sums to {sum}, expected 1 or 0")));
                }
                Ok(())
            }
            Node::Nothing(n) => {
                if !n.bbox.is_valid() {
                    return Err(violation(n.id, "box", "min corner exceeds max corner"));
                }
                let min_v = self.nothing_min_volume();
                if n.bbox.volume() < min_v - 1e-9 {
                    return Err(violation(n.id, "box", format!("volume {} below {min_v}", n.bbox.volume())));
                }
                self.check_parent(n.id, n.parent_room, None)
            }
            Node::Structure(s) => {
                let norm = s.plane.normal.norm();
                if (norm - 1.0).abs() > UNIT_NORMAL_TOL {
                    return Err(violation(s.id, "plane", format!("normal norm {norm}")));
                }
                if !s.plane.offset.is_finite() || !s.bbox.center.is_finite() || !s.bbox.yaw.is_finite() {
                    return Err(violation(s.id, "plane", "non-finite"));
                }
                let h = s.bbox.half_extents;
                if !(h.x > 0.0 && h.y > 0.0 && h.z > 0.0) || !h.is_finite() {
                    return Err(violation(s.id, "box", "half extents must be positive"));
                }
                if s.thickness() > MAX_STRUCTURE_THICKNESS + 1e-12 {
                    return Err(violation(s.id, "box", format!("thickness {} > {MAX_STRUCTURE_THICKNESS}", s.thickness())));
                }
                if s.observation_count == 0 {
                    return Err(violation(s.id, "observation_count", "must be at least 1"));
                }
                Ok(())
            }
        }
    }

    /// Re-check every node and edge invariant.
    pub fn validate(&self) -> Result<(), GraphError> {
        for o in self.objects.values() {
            self.check_node(&Node::Object(o.clone()))?;
        }
        for r in self.rooms.values() {
            self.check_node(&Node::Room(r.clone()))?;
        }
        for n in self.nothings.values() {
            self.check_node(&Node::Nothing(n.clone()))?;
        }
        for s in self.structures.values() {
            self.check_node(&Node::Structure(s.clone()))?;
        }
        Ok(())
    }

    /// Objects whose parent is `room`.
    pub fn children_of(&self, room: NodeId) -> impl Iterator<Item = &ObjectNode> {
        self.objects.values().filter(move |o| o.parent_room == Some(room))
    }

    /// Room whose footprint contains `p`, preferring the smallest footprint
    /// when several overlap.
    pub fn room_at(&self, p: Vec2) -> Option<&RoomNode> {
        self.rooms
            .values()
            .filter(|r| r.contains(p))
            .min_by(|a, b| a.footprint_bounds().area().total_cmp(&b.footprint_bounds().area()))
    }

    /// Copy holding only observed objects and rooms plus every nothing and
    /// structure node.
    pub fn observed_subgraph(&self) -> SceneGraph {
        let mut g = self.clone();
        g.objects.retain(|_, o| o.provenance == Provenance::Observed);
        g.rooms.retain(|_, r| r.provenance == Provenance::Observed);
        let rooms = g.rooms.keys().copied().collect::<std::collections::BTreeSet<_>>();
        for o in g.objects.values_mut() {
            if o.parent_room.is_some_and(|p| !rooms.contains(&p)) {
                o.parent_room = None;
            }
        }
        for n in g.nothings.values_mut() {
            if n.parent_room.is_some_and(|p| !rooms.contains(&p)) {
                n.parent_room = None;
            }
        }
        g
    }

    /// Mutable access for in-crate bulk edits that maintain invariants
    /// themselves (perturbation, sampling).
    pub(crate) fn object_mut(&mut self, id: NodeId) -> Option<&mut ObjectNode> {
        self.revision += 1;
        self.objects.get_mut(&id)
    }

    pub(crate) fn room_mut(&mut self, id: NodeId) -> Option<&mut RoomNode> {
        self.revision += 1;
        self.rooms.get_mut(&id)
    }

    /// Smallest rectangle covering every node footprint.
    pub fn xy_bounds(&self) -> Option<Rect> {
        let mut pts: Vec<Vec2> = Vec::new();
        for r in self.rooms.values() {
            pts.extend(r.footprint.iter().copied());
        }
        for o in self.objects.values() {
            pts.extend(o.obb().footprint());
        }
        for n in self.nothings.values() {
            pts.extend(n.bbox.footprint());
        }
        for s in self.structures.values() {
            pts.extend(s.bbox.footprint());
        }
        Rect::bounding(&pts)
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub fn square(x0: f64, y0: f64, x1: f64, y1: f64) -> Vec<Vec2> {
        vec![Vec2::new(x0, y0), Vec2::new(x1, y0), Vec2::new(x1, y1), Vec2::new(x0, y1)]
    }

    pub fn room(g: &mut SceneGraph, label: &str, x0: f64, y0: f64, x1: f64, y1: f64) -> NodeId {
        let id = g.alloc_id();
        g.upsert(RoomNode {
            id,
            label: label.into(),
            centroid: Vec2::new((x0 + x1) / 2.0, (y0 + y1) / 2.0),
            footprint: square(x0, y0, x1, y1),
            feature: BTreeMap::new(),
            provenance: Provenance::Observed,
        })
        .unwrap()
    }

    pub fn object(g: &mut SceneGraph, label: &str, x: f64, y: f64, parent: Option<NodeId>) -> NodeId {
        let id = g.alloc_id();
        g.upsert(ObjectNode {
            id,
            label: label.into(),
            center: Vec3::new(x, y, 0.4),
            half_extents: Vec3::new(0.3, 0.3, 0.4),
            yaw: 0.0,
            parent_room: parent,
            provenance: Provenance::Observed,
        })
        .unwrap()
    }

    #[test]
    fn first_insert_bumps_revision() {
        let mut g = SceneGraph::new();
        object(&mut g, "chair", 1.0, 1.0, None);
        assert_eq!(g.object_count(), 1);
        assert_eq!(g.revision(), 1);
    }

    #[test]
    fn zero_extent_rejected() {
        let mut g = SceneGraph::new();
        let id = g.alloc_id();
        let err = g
            .upsert(ObjectNode {
                id,
                label: "chair".into(),
                center: Vec3::zero(),
                half_extents: Vec3::new(0.0, 1.0, 1.0),
                yaw: 0.0,
                parent_room: None,
                provenance: Provenance::Observed,
            })
            .unwrap_err();
        assert!(matches!(err, GraphError::InvariantViolation { field: "half_extents", .. }));
    }

    #[test]
    fn reupsert_keeps_id() {
        let mut g = SceneGraph::new();
        let id = object(&mut g, "chair", 1.0, 1.0, None);
        let mut o = g.object(id).unwrap().clone();
        o.center.x = 2.0;
        let rev = g.revision();
        assert_eq!(g.upsert(o).unwrap(), id);
        assert_eq!(g.revision(), rev + 1);
        assert_eq!(g.object(id).unwrap().center.x, 2.0);
        assert_eq!(g.object_count(), 1);
    }

    #[test]
    fn parent_edges_single_and_kind_checked() {
        let mut g = SceneGraph::new();
        let a = room(&mut g, "kitchen", 0.0, 0.0, 4.0, 4.0);
        let b = room(&mut g, "bedroom", 0.0, 0.0, 4.0, 4.0);
        let o = object(&mut g, "chair", 1.0, 1.0, None);
        g.connect_parent(o, a).unwrap();
        assert_eq!(g.edges(), vec![(o, a)]);
        g.connect_parent(o, b).unwrap();
        assert_eq!(g.edges(), vec![(o, b)]);
        let o2 = object(&mut g, "table", 2.0, 2.0, None);
        assert!(matches!(g.connect_parent(o, o2), Err(GraphError::KindMismatch { .. })));
        assert!(matches!(g.connect_parent(NodeId(99), a), Err(GraphError::UnknownNode(_))));
    }

    #[test]
    fn ids_never_reused() {
        let mut g = SceneGraph::new();
        let a = object(&mut g, "chair", 1.0, 1.0, None);
        g.remove(a).unwrap();
        let b = object(&mut g, "chair", 1.0, 1.0, None);
        assert!(b > a);
    }

    #[test]
    fn structure_invariants() {
        let mut g = SceneGraph::new();
        let id = g.alloc_id();
        let mut s = StructureNode {
            id,
            kind: StructureKind::Wall,
            plane: Plane { normal: Vec3::new(1.0, 0.0, 0.0), offset: 2.0 },
            bbox: OrientedBox::new(Vec3::new(2.0, 0.0, 1.25), Vec3::new(0.05, 2.0, 1.25), 0.0),
            observation_count: 2,
        };
        g.upsert(s.clone()).unwrap();
        s.bbox.half_extents.x = 0.3;
        assert!(g.upsert(s.clone()).is_err());
        s.bbox.half_extents.x = 0.05;
        s.plane.normal = Vec3::new(1.0 + 1e-6, 0.0, 0.0);
        assert!(g.upsert(s).is_err());
        g.validate().unwrap();
    }

    #[test]
    fn removing_room_clears_children() {
        let mut g = SceneGraph::new();
        let r = room(&mut g, "kitchen", 0.0, 0.0, 4.0, 4.0);
        let o = object(&mut g, "fridge", 1.0, 1.0, Some(r));
        g.remove(r).unwrap();
        assert_eq!(g.object(o).unwrap().parent_room, None);
        g.validate().unwrap();
    }
}
