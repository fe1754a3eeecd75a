//! Navigation: grid A* with a windowed local stage, room-level routing,
//! the frontier baseline and the closed exploration loop.

mod astar;
mod episode;
mod frontier;
mod rooms;

use thiserror::Error;

use crate::mapping::{Cell, OccupancyGrid};
use crate::world::Pose;
use crate::Vec2;

pub use astar::{astar_cells, distance_field, line_of_sight, nearest_passable, neighbours, passable_mask, plan_grid, plan_on_mask, shortcut, Path};
pub use episode::{run_episode, EpisodeConfig, EpisodeLog, HighLevel, Policy, StepRecord, Termination};
pub use frontier::{detect_frontiers, frontier_target, Frontier};
pub use rooms::{door_links, plan_scene_graph};

#[derive(Clone, Debug, Error, PartialEq)]
pub enum PlanError {
    #[error("no path to goal")]
    NoPath,
    #[error("start cell is not free")]
    StartOccupied,
    #[error("no door chain reaches the goal room")]
    NoRoomPath,
    #[error("no global waypoint lies in known free space")]
    NoProgress,
}

/// Local leg of `global`: the farthest waypoint of its known-Free prefix
/// that lies inside the square window of side `window` centered on `pose`,
/// reached by A* over `mask`.
///
/// A start outside `mask` is moved to the nearest passable cell.
pub fn refine_local(global: &Path, grid: &OccupancyGrid, mask: &[bool], pose: Pose, window: f64) -> Result<Path, PlanError> {
    let k = local_goal_index(global, grid, pose, window)?;
    let goal = grid.index_of(global.waypoints[k].position).ok_or(PlanError::NoProgress)?;
    let start = nearest_passable(grid, mask, pose.position).ok_or(PlanError::StartOccupied)?;
    let (cells, _) = astar_cells(grid, mask, start, goal)?;
    let cells = shortcut(grid, mask, &cells);
    let mut pts: Vec<Vec2> = cells.iter().map(|&i| grid.center(i)).collect();
    pts[0] = pose.position;
    Ok(Path::from_points(pts))
}

/// Index of the waypoint [`refine_local`] heads for.
pub fn local_goal_index(global: &Path, grid: &OccupancyGrid, pose: Pose, window: f64) -> Result<usize, PlanError> {
    let half = window / 2.0;
    let inside = |p: Vec2| (p.x - pose.position.x).abs() <= half && (p.y - pose.position.y).abs() <= half;
    global
        .waypoints
        .iter()
        .map_while(|w| grid.index_of(w.position).filter(|&i| grid.get(i) == Cell::Free).map(|_| w.position))
        .enumerate()
        .filter(|&(_, p)| inside(p))
        .last()
        .map(|(k, _)| k)
        .ok_or(PlanError::NoProgress)
}

/// Distances within this are equal for frontier ranking.
const DIST_TIE: f64 = 1e-9;

/// Choice of the frontier baseline.
#[derive(Clone, Debug, PartialEq)]
pub enum FrontierGoal {
    Goal { frontier: Frontier, cell: usize, cost: f64 },
    Done,
}

/// Nearest frontier by path cost over `dist` (a [`distance_field`] from the
/// robot), approached from within `reach` (see [`frontier_target`]); ties go
/// to the lexicographically smaller centroid. Frontiers whose approach cell
/// lies within `exclude_radius` of an `exclude` point are skipped.
pub fn frontier_policy(
    grid: &OccupancyGrid,
    dist: &[f64],
    min_cells: usize,
    reach: f64,
    exclude: &[Vec2],
    exclude_radius: f64,
) -> FrontierGoal {
    let mut best: Option<(Frontier, usize, f64)> = None;
    for f in detect_frontiers(grid, min_cells) {
        let Some((cell, cost)) = frontier_target(grid, &f, dist, reach) else { continue };
        let at = grid.center(cell);
        if exclude.iter().any(|e| e.distance(at) < exclude_radius) {
            continue;
        }
        let better = match &best {
            None => true,
            Some((bf, _, bc)) => {
                if (cost - bc).abs() <= DIST_TIE {
                    (f.centroid.x, f.centroid.y) < (bf.centroid.x, bf.centroid.y)
                } else {
                    cost < *bc
                }
            }
        };
        if better {
            best = Some((f, cell, cost));
        }
    }
    match best {
        Some((frontier, cell, cost)) => FrontierGoal::Goal { frontier, cell, cost },
        None => FrontierGoal::Done,
    }
}
