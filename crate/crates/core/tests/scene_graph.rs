mod oracles;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use semx_core::scene_graph::{cross_section_raster, DEFAULT_BANDS};
use semx_core::SceneGraph;

use oracles::random_graph;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn yaml_round_trip(seed in any::<u64>()) {
        let g = random_graph(&mut ChaCha8Rng::seed_from_u64(seed), 4, 12);
        g.validate().unwrap();
        let text = g.to_yaml();
        let back = SceneGraph::from_yaml(&text).unwrap();
        prop_assert_eq!(&back, &g);
        prop_assert_eq!(back.to_yaml(), text);
        prop_assert_eq!(back.edges(), g.edges());
    }

    #[test]
    fn edges_are_parent_links(seed in any::<u64>()) {
        let g = random_graph(&mut ChaCha8Rng::seed_from_u64(seed), 4, 12);
        let parented = g.objects().filter(|o| o.parent_room.is_some()).count()
            + g.nothings().filter(|n| n.parent_room.is_some()).count();
        prop_assert_eq!(g.edges().len(), parented);
        for (child, room) in g.edges() {
            prop_assert!(g.room(room).is_some());
            prop_assert!(g.contains(child));
        }
    }

    #[test]
    fn removing_a_room_orphans_its_children(seed in any::<u64>()) {
        let mut g = random_graph(&mut ChaCha8Rng::seed_from_u64(seed), 4, 12);
        let Some(room) = g.rooms().next().map(|r| r.id) else { return Ok(()) };
        let before = g.revision();
        g.remove(room).unwrap();
        prop_assert!(g.revision() > before);
        prop_assert!(g.edges().iter().all(|&(_, r)| r != room));
        g.validate().unwrap();
    }

    #[test]
    fn rasters_are_deterministic(seed in any::<u64>()) {
        let g = random_graph(&mut ChaCha8Rng::seed_from_u64(seed), 3, 8);
        for (lo, hi) in DEFAULT_BANDS {
            let a = cross_section_raster(&g, lo, hi, 0.1).unwrap();
            let b = cross_section_raster(&g, lo, hi, 0.1).unwrap();
            prop_assert_eq!(a.image.to_p5(), b.image.to_p5());
        }
    }
}

#[test]
fn garbage_is_a_parse_error() {
    assert!(SceneGraph::from_yaml("objects: [").is_err());
    assert!(SceneGraph::from_yaml("- 1\n- 2\n").is_err());
}
