mod oracles;

use proptest::prelude::*;

use semx_core::mapping::{Cell, OccupancyGrid};
use semx_core::planner::{distance_field, line_of_sight, plan_grid, shortcut, PlanError};
use semx_core::{Rect, Vec2};

use oracles::grid_dijkstra;

fn grid_from(w: usize, h: usize, blocked: &[bool]) -> OccupancyGrid {
    let mut g = OccupancyGrid::new(1.0, Rect::new(Vec2::new(0.0, 0.0), Vec2::new(w as f64, h as f64)));
    assert_eq!((g.width, g.height), (w, h));
    for y in 0..h {
        for x in 0..w {
            let i = g.index(x, y);
            g.set(i, if blocked[y * w + x] { Cell::Occupied } else { Cell::Free });
        }
    }
    g
}

fn maze() -> impl Strategy<Value = (usize, usize, Vec<bool>, usize, usize)> {
    (2usize..=30, 2usize..=30).prop_flat_map(|(w, h)| {
        (Just(w), Just(h), prop::collection::vec(prop::bool::weighted(0.3), w * h), 0..w * h, 0..w * h)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn astar_cost_equals_dijkstra((w, h, mut blocked, s, t) in maze()) {
        blocked[s] = false;
        blocked[t] = false;
        let g = grid_from(w, h, &blocked);
        let open: Vec<bool> = blocked.iter().map(|b| !b).collect();
        let (si, ti) = (g.index(s % w, s / w), g.index(t % w, t / w));
        match (plan_grid(&g, si, ti), grid_dijkstra(w, h, &open, s, t)) {
            (Ok(p), Some(d)) => {
                prop_assert!((p.length - d).abs() < 1e-9, "astar {} dijkstra {}", p.length, d);
                prop_assert!((distance_field(&g, &open, si)[ti] - d).abs() < 1e-9);
                for wp in &p.waypoints {
                    prop_assert_eq!(g.get(g.index_of(wp.position).unwrap()), Cell::Free);
                }
            }
            (Err(PlanError::NoPath), None) => {}
            (a, b) => prop_assert!(false, "astar {:?} dijkstra {:?}", a.map(|p| p.length), b),
        }
    }

    #[test]
    fn shortcut_keeps_sight_lines((w, h, mut blocked, s, t) in maze()) {
        blocked[s] = false;
        blocked[t] = false;
        let g = grid_from(w, h, &blocked);
        let open: Vec<bool> = blocked.iter().map(|b| !b).collect();
        let (si, ti) = (g.index(s % w, s / w), g.index(t % w, t / w));
        let Ok(p) = plan_grid(&g, si, ti) else { return Ok(()) };
        let cells: Vec<usize> = p.waypoints.iter().map(|wp| g.index_of(wp.position).unwrap()).collect();
        let short = shortcut(&g, &open, &cells);
        prop_assert_eq!(short.first(), cells.first());
        prop_assert_eq!(short.last(), cells.last());
        let len: f64 = short.windows(2).map(|c| g.center(c[0]).distance(g.center(c[1]))).sum();
        prop_assert!(len <= p.length + 1e-9);
        for c in short.windows(2) {
            prop_assert!(line_of_sight(&g, &open, c[0], c[1]));
        }
    }
}

#[test]
fn walled_off_goal_has_no_path() {
    let mut blocked = vec![false; 25];
    for k in 0..5 {
        blocked[k * 5 + 2] = true;
    }
    let g = grid_from(5, 5, &blocked);
    assert_eq!(plan_grid(&g, 0, 4).unwrap_err(), PlanError::NoPath);
}
