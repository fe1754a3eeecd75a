mod oracles;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use semx_core::eval::{ged, graph_edit_distance, object_f1, GedGraph, MatchSpec};
use semx_core::SceneGraph;

use oracles::{random_ged_graph, random_graph};

/// Rooms and objects inserted in reverse order under fresh ids.
fn reinserted(g: &SceneGraph) -> SceneGraph {
    let mut fresh = SceneGraph::new();
    for _ in 0..50 {
        fresh.alloc_id();
    }
    let mut map = std::collections::BTreeMap::new();
    let rooms: Vec<_> = g.rooms().cloned().collect();
    for mut r in rooms.into_iter().rev() {
        let id = fresh.alloc_id();
        map.insert(r.id, id);
        r.id = id;
        fresh.upsert(r).unwrap();
    }
    let objects: Vec<_> = g.objects().cloned().collect();
    for mut o in objects.into_iter().rev() {
        o.id = fresh.alloc_id();
        o.parent_room = o.parent_room.map(|p| map[&p]);
        fresh.upsert(o).unwrap();
    }
    fresh
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(60))]

    #[test]
    fn ged_matches_permutation_oracle(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (a, b) = (random_ged_graph(&mut rng, 6), random_ged_graph(&mut rng, 6));
        let spec = MatchSpec::default();
        let (ga, gb) = (GedGraph::from_scene(&a), GedGraph::from_scene(&b));
        let r = ged(&ga, &gb, &spec);
        prop_assert!(!r.approximate);
        prop_assert_eq!(r.cost, oracles::ged_by_permutation(&ga, &gb, spec.object_dist, spec.room_dist));
    }

    // Matching within a distance threshold is not transitive, so the
    // triangle inequality can fail; symmetry and the size bounds cannot.
    #[test]
    fn ged_is_symmetric_and_bounded(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (a, b) = (random_ged_graph(&mut rng, 5), random_ged_graph(&mut rng, 5));
        let spec = MatchSpec::default();
        let d = |x: &SceneGraph, y: &SceneGraph| graph_edit_distance(x, y, &spec).cost;
        let (na, nb) = (GedGraph::from_scene(&a).size(), GedGraph::from_scene(&b).size());
        prop_assert_eq!(d(&a, &a), 0);
        prop_assert_eq!(d(&a, &b), d(&b, &a));
        prop_assert!(d(&a, &b) >= na.abs_diff(nb) && d(&a, &b) <= na + nb);
        prop_assert_eq!(d(&a, &SceneGraph::new()), na);
    }

    #[test]
    fn scores_ignore_ids_and_order(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (a, b) = (random_graph(&mut rng, 3, 8), random_graph(&mut rng, 3, 8));
        let spec = MatchSpec::default();
        let (ra, rb) = (reinserted(&a), reinserted(&b));
        prop_assert_eq!(object_f1(&a, &b, &spec), object_f1(&ra, &rb, &spec));
        prop_assert_eq!(object_f1(&a, &a, &spec).f1, 1.0);
        let f = object_f1(&a, &b, &spec);
        prop_assert!((0.0..=1.0).contains(&f.f1));
        prop_assert_eq!(object_f1(&a, &b, &spec).f1, object_f1(&b, &a, &spec).f1);
    }
}

#[test]
fn identity_on_larger_graphs() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..30 {
        let g = random_graph(&mut rng, 3, 8);
        assert_eq!(graph_edit_distance(&g, &g, &MatchSpec::default()).cost, 0);
        assert_eq!(graph_edit_distance(&g, &reinserted(&g), &MatchSpec::default()).cost, 0);
    }
}
