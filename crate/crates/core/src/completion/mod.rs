//! Sampling completed scene graphs consistent with the current map, and the
//! perturbation applied to them before rendering.

mod adapter;
mod perturb;
mod prior;

use serde::{Deserialize, Serialize};

pub use adapter::{AdapterConfig, AdapterError, AdapterRequest, AdapterResponse, HttpTransport, LlmAdapter, Transport};
pub use perturb::{perturb, PerturbConfig};
pub use prior::{PriorConfig, PriorSampler};

use crate::geometry::convex_polygons_intersect;
use crate::mapping::OccupancyGrid;
use crate::scene_graph::{NodeId, ObjectNode, Provenance};
use crate::{Aabb, OrientedBox, Rect, SceneGraph, Vec2};

/// Extra information a sampler may use beyond the graph itself.
#[derive(Clone, Copy, Debug, Default)]
pub struct SampleContext<'a> {
    /// Occupancy of the map the graph was built from; Unknown cells are
    /// where unseen content may go.
    pub grid: Option<&'a OccupancyGrid>,
}

/// Source of completed graphs. Every returned graph contains the current
/// graph's observed nodes unchanged; additions are marked Predicted.
pub trait CompletionSampler: Send + Sync {
    fn sample_with(&self, current: &SceneGraph, ctx: &SampleContext, m: usize, seed: u64) -> Vec<SceneGraph>;

    fn sample(&self, current: &SceneGraph, m: usize, seed: u64) -> Vec<SceneGraph> {
        self.sample_with(current, &SampleContext::default(), m, seed)
    }

    fn name(&self) -> &str;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnsembleSpec {
    /// Current graphs, each built from a subset of the observations.
    pub j: usize,
    /// Completions per current graph.
    pub m: usize,
    /// Perturbations per completion.
    pub n: usize,
}

impl Default for EnsembleSpec {
    fn default() -> Self {
        Self { j: 2, m: 4, n: 4 }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    NothingOverlap { object: NodeId, nothing: NodeId },
    ObjectOutsideRooms { object: NodeId },
    RoomOverlap { room: NodeId, observed: NodeId },
    RoomNotAdjacentToDoor { room: NodeId },
    /// An observed node of the current graph is missing or altered.
    ObservedChanged { node: NodeId },
}

/// Overlap area above which a predicted room is said to cover an observed
/// one; footprints sharing an edge do not count.
const ROOM_OVERLAP_AREA: f64 = 0.25;
/// A predicted room must come this close to a door or the map boundary.
const DOOR_REACH: f64 = 0.5;

/// Whether an object's box cuts into a nothing box by more than a
/// millimetre.
pub fn overlaps_nothing(obb: &OrientedBox, nothing: &Aabb) -> bool {
    let eps = 1e-3;
    let (z0, z1) = obb.z_range();
    if z1 <= nothing.min.z + eps || z0 >= nothing.max.z - eps {
        return false;
    }
    let half = obb.half_extents;
    let shrunk = OrientedBox::new(obb.center, crate::Vec3::new((half.x - eps).max(half.x / 2.0), (half.y - eps).max(half.y / 2.0), half.z), obb.yaw);
    convex_polygons_intersect(&shrunk.footprint(), &nothing.footprint())
}

fn first_nothing_hit(g: &SceneGraph, o: &ObjectNode) -> Option<NodeId> {
    let obb = o.obb();
    g.nothings().find(|n| overlaps_nothing(&obb, &n.bbox)).map(|n| n.id)
}

/// Rooms whose label carries evidence; "unknown" rooms are glimpses that a
/// prediction may still explain.
pub(crate) fn labeled(label: &str) -> bool {
    label != crate::catalog::UNKNOWN_ROOM
}

/// Extent of the current map: the box around all observed content.
pub fn map_bounds(g: &SceneGraph) -> Option<Rect> {
    g.observed_subgraph().xy_bounds()
}

/// Report every way `completed` disagrees with `current` or with the
/// layout rules for predicted content.
pub fn consistency_check(current: &SceneGraph, completed: &SceneGraph) -> Result<(), Vec<Violation>> {
    let mut v = Vec::new();
    let obs = current.observed_subgraph();
    for o in obs.objects() {
        if completed.object(o.id) != Some(o) {
            v.push(Violation::ObservedChanged { node: o.id });
        }
    }
    for r in obs.rooms() {
        if completed.room(r.id) != Some(r) {
            v.push(Violation::ObservedChanged { node: r.id });
        }
    }
    for n in obs.nothings() {
        if completed.nothing(n.id).map(|c| c.bbox) != Some(n.bbox) {
            v.push(Violation::ObservedChanged { node: n.id });
        }
    }
    for s in obs.structures() {
        if completed.structure(s.id) != Some(s) {
            v.push(Violation::ObservedChanged { node: s.id });
        }
    }

    for o in completed.objects().filter(|o| o.provenance == Provenance::Predicted) {
        if let Some(n) = first_nothing_hit(completed, o) {
            v.push(Violation::NothingOverlap { object: o.id, nothing: n });
        }
        if !completed.rooms().any(|r| r.contains(o.center.xy())) {
            v.push(Violation::ObjectOutsideRooms { object: o.id });
        }
    }

    let doors: Vec<Vec2> = completed.doors().map(|d| d.bbox.center.xy()).collect();
    let bounds = map_bounds(current);
    for r in completed.rooms().filter(|r| r.provenance == Provenance::Predicted) {
        let fp = r.footprint_bounds();
        for o in completed.rooms().filter(|o| o.provenance == Provenance::Observed && labeled(&o.label)) {
            if fp.overlap_area(&o.footprint_bounds()) > ROOM_OVERLAP_AREA {
                v.push(Violation::RoomOverlap { room: r.id, observed: o.id });
            }
        }
        let near_door = doors.iter().any(|d| {
            let dx = (fp.min.x - d.x).max(d.x - fp.max.x).max(0.0);
            let dy = (fp.min.y - d.y).max(d.y - fp.max.y).max(0.0);
            dx.hypot(dy) <= DOOR_REACH
        });
        let at_boundary = bounds.is_none_or(|b| {
            fp.min.x <= b.min.x + DOOR_REACH
                || fp.min.y <= b.min.y + DOOR_REACH
                || fp.max.x >= b.max.x - DOOR_REACH
                || fp.max.y >= b.max.y - DOOR_REACH
        });
        if !near_door && !at_boundary {
            v.push(Violation::RoomNotAdjacentToDoor { room: r.id });
        }
    }
    if v.is_empty() {
        Ok(())
    } else {
        Err(v)
    }
}
