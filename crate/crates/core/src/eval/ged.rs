//! Graph edit distance over the room and object layers and their parent
//! edges. Node and edge insertions and deletions cost 1. A node may only be
//! substituted by a permitted partner (free of charge): rooms with the same
//! label within `room_dist`, objects with the same label within
//! `object_dist` whose parents correspond under the same mapping.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::MatchSpec;
use crate::SceneGraph;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GedResult {
    pub cost: u64,
    /// Upper bound from beam search rather than the exact minimum.
    pub approximate: bool,
}

/// Node of the compared layers. Rooms come first in [`GedGraph::nodes`] and
/// `parent` indexes a room.
#[derive(Clone, Debug, PartialEq)]
pub struct GedNode {
    pub is_room: bool,
    pub label: String,
    pub pos: [f64; 3],
    pub parent: Option<usize>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct GedGraph {
    pub nodes: Vec<GedNode>,
}

impl GedGraph {
    /// Rooms (centroid at z = 0) then objects; parent links to rooms that
    /// are not in the graph are dropped.
    pub fn from_scene(g: &SceneGraph) -> Self {
        let mut index = BTreeMap::new();
        let mut nodes = Vec::new();
        for r in g.rooms() {
            index.insert(r.id, nodes.len());
            nodes.push(GedNode { is_room: true, label: r.label.clone(), pos: [r.centroid.x, r.centroid.y, 0.0], parent: None });
        }
        for o in g.objects() {
            nodes.push(GedNode {
                is_room: false,
                label: o.label.clone(),
                pos: [o.center.x, o.center.y, o.center.z],
                parent: o.parent_room.and_then(|p| index.get(&p).copied()),
            });
        }
        Self { nodes }
    }

    pub fn edge_count(&self) -> usize {
        self.nodes.iter().filter(|n| n.parent.is_some()).count()
    }

    /// Cost of building this graph from nothing.
    pub fn size(&self) -> u64 {
        (self.nodes.len() + self.edge_count()) as u64
    }
}

fn dist(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

/// Whether `a` may be substituted by `b`, given the images of the rooms
/// decided so far (`None` = deleted).
pub fn permitted(a: &GedNode, b: &GedNode, room_map: &[Option<usize>], spec: &MatchSpec) -> bool {
    if a.is_room != b.is_room || a.label != b.label {
        return false;
    }
    if a.is_room {
        return dist(&a.pos, &b.pos) <= spec.room_dist;
    }
    if dist(&a.pos, &b.pos) > spec.object_dist {
        return false;
    }
    match (a.parent, b.parent) {
        (None, None) => true,
        (Some(pa), Some(pb)) => room_map.get(pa).copied().flatten() == Some(pb),
        _ => false,
    }
}

#[derive(Clone)]
struct State {
    /// Image of each decided node of g1.
    map: Vec<Option<usize>>,
    used: Vec<bool>,
    cost: u64,
}

struct Search<'a> {
    g1: &'a GedGraph,
    g2: &'a GedGraph,
    spec: &'a MatchSpec,
    rooms1: usize,
}

impl Search<'_> {
    fn candidates(&self, s: &State) -> Vec<usize> {
        let i = s.map.len();
        let a = &self.g1.nodes[i];
        let room_map = &s.map[..self.rooms1.min(s.map.len())];
        (0..self.g2.nodes.len())
            .filter(|&j| !s.used[j] && permitted(a, &self.g2.nodes[j], room_map, self.spec))
            .collect()
    }

    fn delete_cost(&self, i: usize) -> u64 {
        1 + self.g1.nodes[i].parent.is_some() as u64
    }

    fn finish(&self, s: &State) -> u64 {
        s.cost
            + s.used
                .iter()
                .enumerate()
                .filter(|(_, u)| !**u)
                .map(|(j, _)| 1 + self.g2.nodes[j].parent.is_some() as u64)
                .sum::<u64>()
    }

    /// Admissible bound on the cost still to come: g2 nodes beyond what the
    /// remaining g1 nodes could absorb must be inserted.
    fn lower_bound(&self, s: &State) -> u64 {
        let remaining = (self.g1.nodes.len() - s.map.len()) as u64;
        let free = s.used.iter().filter(|u| !**u).count() as u64;
        free.saturating_sub(remaining)
    }

    fn children(&self, s: &State) -> Vec<State> {
        let i = s.map.len();
        let mut out = Vec::new();
        for j in self.candidates(s) {
            let mut t = s.clone();
            t.map.push(Some(j));
            t.used[j] = true;
            out.push(t);
        }
        let mut t = s.clone();
        t.map.push(None);
        t.cost += self.delete_cost(i);
        out.push(t);
        out
    }

    fn exact(&self) -> u64 {
        let mut best = self.g1.size() + self.g2.size();
        let root = State { map: Vec::new(), used: vec![false; self.g2.nodes.len()], cost: 0 };
        let mut stack = vec![root];
        while let Some(s) = stack.pop() {
            if s.cost + self.lower_bound(&s) >= best {
                continue;
            }
            if s.map.len() == self.g1.nodes.len() {
                best = best.min(self.finish(&s));
                continue;
            }
            // Children pushed in reverse so substitutions are explored first.
            let mut kids = self.children(&s);
            kids.reverse();
            stack.extend(kids);
        }
        best
    }

    fn beam(&self, width: usize) -> u64 {
        let mut level = vec![State { map: Vec::new(), used: vec![false; self.g2.nodes.len()], cost: 0 }];
        for _ in 0..self.g1.nodes.len() {
            let mut next: Vec<State> = level.iter().flat_map(|s| self.children(s)).collect();
            next.sort_by_key(|s| s.cost + self.lower_bound(s));
            next.truncate(width.max(1));
            level = next;
        }
        level.iter().map(|s| self.finish(s)).min().unwrap_or(0)
    }
}

/// Sort rooms first, then objects, each by label and position, so the search
/// order does not depend on node ids.
fn canonical(g: &GedGraph) -> GedGraph {
    let key = |n: &GedNode| (!n.is_room, n.label.clone(), n.pos.map(|v| (v * 1e6).round() as i64));
    let mut order: Vec<usize> = (0..g.nodes.len()).collect();
    order.sort_by_key(|&i| key(&g.nodes[i]));
    let mut new_index = vec![0; g.nodes.len()];
    for (k, &i) in order.iter().enumerate() {
        new_index[i] = k;
    }
    GedGraph {
        nodes: order
            .iter()
            .map(|&i| {
                let mut n = g.nodes[i].clone();
                n.parent = n.parent.map(|p| new_index[p]);
                n
            })
            .collect(),
    }
}

/// Edit distance between two prepared graphs: exact branch and bound when
/// the combined node count is within `spec.exact_limit`, beam search
/// otherwise.
pub fn ged(g1: &GedGraph, g2: &GedGraph, spec: &MatchSpec) -> GedResult {
    let (a, b) = (canonical(g1), canonical(g2));
    let search = Search { rooms1: a.nodes.iter().filter(|n| n.is_room).count(), g1: &a, g2: &b, spec };
    if a.nodes.len() + b.nodes.len() <= spec.exact_limit {
        GedResult { cost: search.exact(), approximate: false }
    } else {
        GedResult { cost: search.beam(spec.beam_width), approximate: true }
    }
}

pub fn graph_edit_distance(g1: &SceneGraph, g2: &SceneGraph, spec: &MatchSpec) -> GedResult {
    ged(&GedGraph::from_scene(g1), &GedGraph::from_scene(g2), spec)
}
