//! Random displacement of predicted content, used to turn one completed
//! graph into several plausible observation sources.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::overlaps_nothing;
use crate::scene_graph::{NodeId, Provenance};
use crate::{SceneGraph, Vec2};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PerturbConfig {
    /// Object displacement bound as a fraction of the parent room's extent
    /// along each axis.
    pub object_fraction: f64,
    /// Room translation bound per axis in meters.
    pub room_shift: f64,
    pub max_tries: usize,
    /// Move observed nodes too.
    pub perturb_observed: bool,
}

impl Default for PerturbConfig {
    fn default() -> Self {
        Self { object_fraction: 0.25, room_shift: 0.5, max_tries: 50, perturb_observed: false }
    }
}

fn movable(p: Provenance, cfg: &PerturbConfig) -> bool {
    cfg.perturb_observed || p == Provenance::Predicted
}

/// Copy of `graph` with rooms translated (children follow) and objects moved
/// within their rooms. A draw that leaves a child outside its room or in a
/// nothing box is redrawn; after `max_tries` the node stays put.
pub fn perturb(graph: &SceneGraph, seed: u64, cfg: &PerturbConfig) -> SceneGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut g = graph.clone();

    let rooms: Vec<NodeId> = g.rooms().filter(|r| movable(r.provenance, cfg)).map(|r| r.id).collect();
    for rid in rooms {
        let kids: Vec<NodeId> = g.children_of(rid).map(|o| o.id).collect();
        // A room holding fixed content stays where it is.
        if kids.iter().any(|k| !movable(g.object(*k).expect("child exists").provenance, cfg)) {
            continue;
        }
        for _ in 0..cfg.max_tries {
            let d = Vec2::new(
                rng.gen_range(-cfg.room_shift..=cfg.room_shift),
                rng.gen_range(-cfg.room_shift..=cfg.room_shift),
            );
            let clear = kids.iter().all(|k| {
                let mut b = g.object(*k).expect("child exists").obb();
                b.center.x += d.x;
                b.center.y += d.y;
                !g.nothings().any(|n| overlaps_nothing(&b, &n.bbox))
            });
            if !clear {
                continue;
            }
            let room = g.room_mut(rid).expect("room exists");
            room.centroid += d;
            for p in room.footprint.iter_mut() {
                *p += d;
            }
            for k in &kids {
                let o = g.object_mut(*k).expect("child exists");
                o.center.x += d.x;
                o.center.y += d.y;
            }
            break;
        }
    }

    let objects: Vec<NodeId> = g.objects().filter(|o| movable(o.provenance, cfg)).map(|o| o.id).collect();
    for oid in objects {
        let o = g.object(oid).expect("object exists").clone();
        let Some(room) = o.parent_room.and_then(|p| g.room(p)).cloned() else { continue };
        let ext = room.footprint_bounds();
        let (bx, by) = (cfg.object_fraction * ext.width(), cfg.object_fraction * ext.height());
        for _ in 0..cfg.max_tries {
            let d = Vec2::new(rng.gen_range(-bx..=bx), rng.gen_range(-by..=by));
            let mut b = o.obb();
            b.center.x += d.x;
            b.center.y += d.y;
            if !room.contains(b.center.xy()) || g.nothings().any(|n| overlaps_nothing(&b, &n.bbox)) {
                continue;
            }
            g.object_mut(oid).expect("object exists").center = b.center;
            break;
        }
    }
    g
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene_graph::tests::{object, room};
    use crate::scene_graph::NothingNode;
    use crate::{Aabb, Vec3};

    fn with_predicted() -> (SceneGraph, NodeId) {
        let mut g = SceneGraph::new();
        let r = room(&mut g, "bedroom", 0.0, 0.0, 4.0, 3.0);
        object(&mut g, "bed", 1.0, 1.0, Some(r));
        let id = g.alloc_id();
        g.upsert(NothingNode { id, bbox: Aabb::new(Vec3::new(2.5, 1.5, 0.0), Vec3::new(4.0, 3.0, 2.0)), parent_room: Some(r) })
            .unwrap();
        let o = object(&mut g, "wardrobe", 2.0, 1.0, Some(r));
        let mut n = g.object(o).unwrap().clone();
        n.provenance = Provenance::Predicted;
        g.upsert(n).unwrap();
        (g, o)
    }

    #[test]
    fn observed_only_graph_is_unchanged() {
        let mut g = SceneGraph::new();
        let r = room(&mut g, "kitchen", 0.0, 0.0, 4.0, 4.0);
        object(&mut g, "fridge", 1.0, 1.0, Some(r));
        for seed in 0..20 {
            assert_eq!(perturb(&g, seed, &PerturbConfig::default()), g);
        }
    }

    #[test]
    fn same_seed_same_output() {
        let (g, _) = with_predicted();
        let cfg = PerturbConfig::default();
        assert_eq!(perturb(&g, 42, &cfg).to_yaml(), perturb(&g, 42, &cfg).to_yaml());
    }

    #[test]
    fn monte_carlo_bounds() {
        let (g, o) = with_predicted();
        let start = g.object(o).unwrap().center;
        let cfg = PerturbConfig::default();
        let nothing = g.nothings().next().unwrap().bbox;
        let (mut max_dx, mut max_dy, mut moved) = (0.0f64, 0.0f64, 0);
        for seed in 0..1000 {
            let p = perturb(&g, seed, &cfg);
            p.validate().unwrap();
            assert_eq!(p.node_count(), g.node_count());
            let c = p.object(o).unwrap();
            max_dx = max_dx.max((c.center.x - start.x).abs());
            max_dy = max_dy.max((c.center.y - start.y).abs());
            moved += (c.center != start) as usize;
            assert!(!overlaps_nothing(&c.obb(), &nothing));
            assert!(p.room_at(c.center.xy()).is_some());
        }
        assert!(max_dx <= 0.25 * 4.0 + 1e-12 && max_dy <= 0.25 * 3.0 + 1e-12);
        assert!(moved > 900);
    }

    #[test]
    fn predicted_room_carries_children() {
        let mut g = SceneGraph::new();
        let r = room(&mut g, "bedroom", 0.0, 0.0, 4.0, 3.0);
        let o = object(&mut g, "wardrobe", 2.0, 1.0, Some(r));
        let mut n = g.object(o).unwrap().clone();
        n.provenance = Provenance::Predicted;
        g.upsert(n).unwrap();
        let mut rn = g.room(r).unwrap().clone();
        rn.provenance = Provenance::Predicted;
        g.upsert(rn).unwrap();
        let cfg = PerturbConfig { object_fraction: 0.0, ..Default::default() };
        let p = perturb(&g, 3, &cfg);
        let d = p.room(r).unwrap().centroid - g.room(r).unwrap().centroid;
        assert!(d.x.abs() <= 0.5 && d.y.abs() <= 0.5);
        let od = p.object(o).unwrap().center - g.object(o).unwrap().center;
        assert!((od.x - d.x).abs() < 1e-12 && (od.y - d.y).abs() < 1e-12);
    }
}
