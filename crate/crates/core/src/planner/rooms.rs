//! Room-level routes over the door adjacency of a scene graph.

use std::collections::{BTreeMap, BinaryHeap};

use crate::scene_graph::NodeId;
use crate::{SceneGraph, Vec2};

use super::PlanError;

/// Room pairs joined by a door, with the door center.
pub fn door_links(graph: &SceneGraph, probe: f64) -> Vec<(NodeId, NodeId, Vec2)> {
    let mut out = Vec::new();
    for d in graph.doors() {
        let c = d.bbox.center.xy();
        let n = Vec2::from_angle(d.bbox.yaw).perp();
        let a = graph.room_at(c + n * probe).map(|r| r.id);
        let b = graph.room_at(c - n * probe).map(|r| r.id);
        if let (Some(a), Some(b)) = (a, b) {
            if a != b {
                out.push((a, b, c));
            }
        }
    }
    out
}

#[derive(PartialEq)]
struct Item(f64, NodeId);

impl Eq for Item {}

impl Ord for Item {
    fn cmp(&self, o: &Self) -> std::cmp::Ordering {
        o.0.total_cmp(&self.0).then(o.1.cmp(&self.1))
    }
}

impl PartialOrd for Item {
    fn partial_cmp(&self, o: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(o))
    }
}

/// Waypoints from `start_room` to `goal`: for every room change, the door
/// center followed by the next room's centroid; the final room's centroid
/// is replaced by `goal`. Edge cost runs centroid to door to centroid.
pub fn plan_scene_graph(graph: &SceneGraph, start_room: NodeId, goal: Vec2) -> Result<Vec<Vec2>, PlanError> {
    let start = graph.room(start_room).ok_or(PlanError::NoRoomPath)?;
    let goal_room = graph.room_at(goal).ok_or(PlanError::NoRoomPath)?.id;
    if goal_room == start.id {
        return Ok(vec![goal]);
    }
    let links = door_links(graph, 0.5);
    let centroid = |id: NodeId| graph.room(id).map(|r| r.centroid).expect("linked room exists");
    let mut adj: BTreeMap<NodeId, Vec<(NodeId, Vec2)>> = BTreeMap::new();
    for &(a, b, c) in &links {
        adj.entry(a).or_default().push((b, c));
        adj.entry(b).or_default().push((a, c));
    }
    let goal_c = centroid(goal_room);
    let mut dist: BTreeMap<NodeId, f64> = BTreeMap::from([(start.id, 0.0)]);
    let mut prev: BTreeMap<NodeId, (NodeId, Vec2)> = BTreeMap::new();
    let mut open = BinaryHeap::from([Item(centroid(start.id).distance(goal_c), start.id)]);
    while let Some(Item(_, r)) = open.pop() {
        if r == goal_room {
            let mut out = vec![goal];
            let mut cur = r;
            while let Some(&(p, door)) = prev.get(&cur) {
                if cur != goal_room {
                    out.push(centroid(cur));
                }
                out.push(door);
                cur = p;
            }
            out.reverse();
            return Ok(out);
        }
        let dr = dist[&r];
        for &(n, door) in adj.get(&r).into_iter().flatten() {
            let nd = dr + centroid(r).distance(door) + door.distance(centroid(n));
            if dist.get(&n).is_none_or(|&d| nd < d - 1e-12) {
                dist.insert(n, nd);
                prev.insert(n, (r, door));
                open.push(Item(nd + centroid(n).distance(goal_c), n));
            }
        }
    }
    Err(PlanError::NoRoomPath)
}
