//! Deterministic rendering of what a graph would show from a pose.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::scene_graph::NodeId;
use crate::world::Pose;
use crate::{OrientedBox, SceneGraph, Sector, Vec3};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Layer {
    Object,
    Nothing,
    Structure,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VisibleNode {
    pub layer: Layer,
    pub label: String,
    pub id: NodeId,
    /// Center of the node's box.
    pub center: Vec3,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RenderedObservation {
    pub visible: Vec<VisibleNode>,
    /// Labels of the rooms holding visible nodes.
    pub room_labels: BTreeSet<String>,
    /// Label of the room holding most visible objects, [`NO_ROOM`] if none.
    pub dominant_room: String,
}

/// Dominant room of an observation without parented objects.
pub const NO_ROOM: &str = "none";

/// Camera model for rendering.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct View {
    pub fov: f64,
    pub range: f64,
    pub camera_height: f64,
}

/// Whether the segment from `eye` to `target` crosses any of `walls`,
/// skipping the box at index `skip`.
pub fn occluded(walls: &[(NodeId, OrientedBox)], eye: Vec3, target: Vec3, skip: Option<NodeId>) -> bool {
    walls.iter().any(|(id, w)| Some(*id) != skip && w.intersects_segment(eye, target))
}

/// Nodes whose footprint meets the view sector and whose center is in line
/// of sight from the camera. Only walls occlude; doors and windows do not.
pub fn render_observation(graph: &SceneGraph, pose: Pose, view: &View) -> RenderedObservation {
    let sector = Sector::new(pose.position, view.range, pose.yaw, view.fov);
    let eye = pose.position.with_z(view.camera_height);
    let walls: Vec<(NodeId, OrientedBox)> = graph.walls().map(|w| (w.id, w.bbox)).collect();
    let seen = |fp: &[crate::Vec2], c: Vec3, id: NodeId| sector.intersects_polygon(fp) && !occluded(&walls, eye, c, Some(id));

    let mut visible = Vec::new();
    let mut per_room: BTreeMap<NodeId, usize> = BTreeMap::new();
    let mut room_labels = BTreeSet::new();
    let mut note_parent = |p: Option<NodeId>, counts: bool, per_room: &mut BTreeMap<NodeId, usize>| {
        if let Some(r) = p.and_then(|p| graph.room(p)) {
            room_labels.insert(r.label.clone());
            if counts {
                *per_room.entry(r.id).or_default() += 1;
            }
        }
    };
    for o in graph.objects() {
        let b = o.obb();
        if seen(&b.footprint(), o.center, o.id) {
            visible.push(VisibleNode { layer: Layer::Object, label: o.label.clone(), id: o.id, center: o.center });
            note_parent(o.parent_room, true, &mut per_room);
        }
    }
    for n in graph.nothings() {
        let c = n.bbox.center();
        if seen(&n.bbox.footprint(), c, n.id) {
            visible.push(VisibleNode { layer: Layer::Nothing, label: "nothing".into(), id: n.id, center: c });
            note_parent(n.parent_room, false, &mut per_room);
        }
    }
    for s in graph.structures() {
        if seen(&s.bbox.footprint(), s.bbox.center, s.id) {
            visible.push(VisibleNode {
                layer: Layer::Structure,
                label: s.kind.as_str().into(),
                id: s.id,
                center: s.bbox.center,
            });
        }
    }
    let dominant_room = per_room
        .iter()
        .map(|(id, n)| (*n, graph.room(*id).map(|r| r.label.clone()).unwrap_or_default()))
        .min_by(|a, b| b.0.cmp(&a.0).then_with(|| a.1.cmp(&b.1)))
        .map(|(_, l)| l)
        .unwrap_or_else(|| NO_ROOM.to_string());
    RenderedObservation { visible, room_labels, dominant_room }
}

/// Token of a visible node: layer, label and optionally a quantized
/// position.
pub type Token = (Layer, String, Option<(i64, i64)>);

/// Order-free summary of an observation used to compare renders across
/// graphs whose node ids differ.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CanonicalObservation {
    /// Sorted token multiset.
    pub tokens: Vec<Token>,
    pub dominant_room: String,
}

pub fn canonicalize(obs: &RenderedObservation, quantum: Option<f64>) -> CanonicalObservation {
    let mut tokens: Vec<Token> = obs
        .visible
        .iter()
        .map(|v| {
            let q = quantum.map(|q| ((v.center.x / q).floor() as i64, (v.center.y / q).floor() as i64));
            (v.layer, v.label.clone(), q)
        })
        .collect();
    tokens.sort();
    CanonicalObservation { tokens, dominant_room: obs.dominant_room.clone() }
}
