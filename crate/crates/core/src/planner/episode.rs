//! Closed exploration loop: scan, map, choose a goal, drive, repeat.

use std::fs;
use std::io;
use std::path::Path as FsPath;
use std::time::Instant;

use rand::seq::index::sample as sample_indices;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::completion::{CompletionSampler, EnsembleSpec, SampleContext};
use crate::infogain::{gain_csv, select_from, GainConfig, PreparedEnsemble, Scope};
use crate::mapping::{Cell, Mapper, MapperConfig, OccupancyGrid};
use crate::pgm::GrayImage;
use crate::rng::{stream, sub_seed};
use crate::world::{follow_path, panoramic_scan, MotionConfig, Observation, Pose, SensorConfig, World, WorldError};
use crate::{SceneGraph, Vec2};

use super::{
    astar_cells, distance_field, frontier_policy, local_goal_index, nearest_passable, passable_mask, plan_scene_graph, refine_local,
    FrontierGoal, Path, PlanError,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Policy {
    Semantic,
    Frontier,
}

/// How the route to a goal is found.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HighLevel {
    /// A* over the whole occupancy grid.
    Grid,
    /// Room sequence from the scene graph, each leg by grid A*.
    SceneGraph,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Termination {
    NoFrontiers,
    BudgetReached,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EpisodeConfig {
    pub policy: Policy,
    pub high_level: HighLevel,
    /// Path-length budget, meters.
    #[serde(alias = "L_max")]
    pub l_max: f64,
    pub motion: MotionConfig,
    pub sensor: SensorConfig,
    pub mapper: MapperConfig,
    pub gain: GainConfig,
    /// `n` here overrides `gain.n`.
    pub ensemble: EnsembleSpec,
    pub seed: u64,
    pub robot_radius: f64,
    /// Side of the square local-planning window, meters.
    pub window: f64,
    pub frontier_min_cells: usize,
    /// Semantic goals scoring at or below this fall back to the nearest
    /// frontier.
    pub min_gain: f64,
    /// Previous goals exclude new ones within this distance.
    pub revisit_radius: f64,
    /// Keep every step's completions in the log.
    pub keep_ensembles: bool,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        Self {
            policy: Policy::Semantic,
            high_level: HighLevel::Grid,
            l_max: 60.0,
            motion: MotionConfig::default(),
            sensor: SensorConfig::default(),
            mapper: MapperConfig::default(),
            gain: GainConfig { scope: Scope::Predicted, ..GainConfig::default() },
            ensemble: EnsembleSpec::default(),
            seed: 0,
            robot_radius: 0.25,
            window: 8.0,
            frontier_min_cells: 3,
            min_gain: 1e-9,
            revisit_radius: 0.5,
            keep_ensembles: true,
        }
    }
}

impl EpisodeConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.l_max > 0.0) {
            return Err(format!("l_max must be positive, got {}", self.l_max));
        }
        if !(self.motion.speed > 0.0) {
            return Err("motion.speed must be positive".into());
        }
        if self.policy == Policy::Semantic && (self.ensemble.j == 0 || self.ensemble.m == 0 || self.ensemble.n == 0) {
            return Err("ensemble j, m and n must be positive".into());
        }
        if self.policy == Policy::Semantic && self.gain.k == 0 {
            return Err("gain.k must be positive".into());
        }
        Ok(())
    }
}

/// One line of `log.jsonl`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub x: f64,
    pub y: f64,
    pub yaw: f64,
    /// Cumulative path length, meters.
    pub traveled: f64,
    /// Cumulative navigation time including scans, seconds.
    pub elapsed: f64,
    /// `start`, `semantic` or `frontier`.
    pub mode: String,
    pub goal: Option<[f64; 2]>,
    pub gain: Option<f64>,
    /// Length of the path planned for this step.
    pub planned: f64,
    /// Observations integrated during this step, final scan included.
    pub observations: usize,
    pub objects: usize,
    pub rooms: usize,
    pub nodes: usize,
    pub graph: String,
    pub ensemble: Option<String>,
    /// Set when the step ended early.
    pub note: Option<String>,
}

#[derive(Clone, Debug)]
pub struct EpisodeLog {
    pub steps: Vec<StepRecord>,
    pub termination: Termination,
    /// Mapped graph after each step.
    pub graphs: Vec<SceneGraph>,
    pub grids: Vec<OccupancyGrid>,
    /// Gain table CSV of semantic steps.
    pub gains: Vec<Option<String>>,
    /// Completions per step, one inner list per current graph.
    pub ensembles: Vec<Option<Vec<Vec<SceneGraph>>>>,
    /// Wall-clock sampling time per step; not part of `elapsed`.
    pub sampler_seconds: Vec<f64>,
    pub truth: SceneGraph,
}

impl EpisodeLog {
    pub fn traveled(&self) -> f64 {
        self.steps.last().map_or(0.0, |s| s.traveled)
    }

    pub fn elapsed(&self) -> f64 {
        self.steps.last().map_or(0.0, |s| s.elapsed)
    }

    pub fn final_graph(&self) -> &SceneGraph {
        self.graphs.last().expect("episode has a start step")
    }

    pub fn planned_total(&self) -> f64 {
        self.steps.iter().map(|s| s.planned).sum()
    }

    /// Write the log directory. Everything but `timing.jsonl` is a pure
    /// function of world and config.
    pub fn write(&self, dir: &FsPath) -> io::Result<()> {
        for sub in ["graphs", "grid", "gains", "ensemble"] {
            fs::create_dir_all(dir.join(sub))?;
        }
        let mut log = String::new();
        let mut timing = String::new();
        for (k, s) in self.steps.iter().enumerate() {
            log.push_str(&serde_json::to_string(s).map_err(io::Error::other)?);
            log.push('\n');
            timing.push_str(&format!("{{\"step\":{},\"sampler_seconds\":{:.6}}}\n", s.step, self.sampler_seconds[k]));
            fs::write(dir.join(&s.graph), self.graphs[k].to_yaml())?;
            let img: GrayImage = self.grids[k].to_image();
            fs::write(dir.join("grid").join(format!("step_{}.pgm", s.step)), img.to_p5())?;
            if let Some(csv) = &self.gains[k] {
                fs::write(dir.join("gains").join(format!("step_{}.csv", s.step)), csv)?;
            }
            if let (Some(rel), Some(ens)) = (&s.ensemble, &self.ensembles[k]) {
                let d = dir.join(rel);
                fs::create_dir_all(&d)?;
                for (j, comp) in ens.iter().enumerate() {
                    for (i, g) in comp.iter().enumerate() {
                        fs::write(d.join(format!("sample_{j}_{i}.yaml")), g.to_yaml())?;
                    }
                }
            }
        }
        fs::write(dir.join("log.jsonl"), log)?;
        fs::write(dir.join("timing.jsonl"), timing)?;
        fs::write(dir.join("truth.yaml"), self.truth.to_yaml())?;
        fs::write(dir.join("termination.txt"), format!("{:?}\n", self.termination))
    }
}

/// The full mapper plus `j` mappers fed different observation subsets.
/// Panoramic scans at goals reach every sub-mapper; en-route observations
/// are dealt out in turn.
struct Maps {
    main: Mapper,
    subs: Vec<Mapper>,
    next: usize,
}

impl Maps {
    fn feed(&mut self, obs: &Observation, shared: bool) {
        self.main.integrate(obs);
        if self.subs.is_empty() {
            return;
        }
        if shared {
            for m in &mut self.subs {
                m.integrate(obs);
            }
        } else {
            let j = self.next % self.subs.len();
            self.subs[j].integrate(obs);
            self.next += 1;
        }
    }
}

struct SemanticChoice {
    cell: usize,
    gain: f64,
    table: String,
    ensemble: Vec<Vec<SceneGraph>>,
    seconds: f64,
}

fn semantic_goal(
    maps: &Maps,
    grid: &OccupancyGrid,
    dist: &[f64],
    from: Vec2,
    exclude: &[Vec2],
    cfg: &EpisodeConfig,
    sampler: &dyn CompletionSampler,
    step_seed: u64,
) -> Option<SemanticChoice> {
    let t0 = Instant::now();
    let ensemble: Vec<Vec<SceneGraph>> = maps
        .subs
        .iter()
        .enumerate()
        .map(|(j, m)| {
            let ctx = SampleContext { grid: Some(maps.main.grid()) };
            sampler.sample_with(m.graph(), &ctx, cfg.ensemble.m, sub_seed(step_seed, 10 + j as u64))
        })
        .collect();
    let seconds = t0.elapsed().as_secs_f64();
    let gcfg = GainConfig { n: cfg.ensemble.n, ..cfg.gain.clone() };
    let prep = match PreparedEnsemble::new(&ensemble, &gcfg, sub_seed(step_seed, 1)) {
        Ok(p) => p,
        Err(e) => {
            log::warn!("gain preparation failed: {e}");
            return None;
        }
    };
    let reachable: Vec<usize> = (0..grid.len())
        .filter(|&i| dist[i].is_finite() && !exclude.iter().any(|e| e.distance(grid.center(i)) < cfg.revisit_radius))
        .collect();
    if reachable.is_empty() {
        return None;
    }
    let mut rng = stream(step_seed, 2);
    let k = gcfg.k.min(reachable.len());
    let mut picks: Vec<usize> = sample_indices(&mut rng, reachable.len(), k).into_iter().map(|i| reachable[i]).collect();
    picks.sort_unstable();
    let candidates: Vec<Pose> = picks
        .iter()
        .map(|&i| Pose { position: grid.center(i), yaw: rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI) })
        .collect();
    let sel = select_from(&prep, &candidates, from, &gcfg).ok()?;
    Some(SemanticChoice { cell: picks[sel.index], gain: sel.gain, table: gain_csv(&sel.table), ensemble, seconds })
}

/// Grid route through the door sequence of the scene graph.
fn room_route(graph: &SceneGraph, grid: &OccupancyGrid, mask: &[bool], start: usize, goal: usize) -> Result<(Vec<usize>, f64), PlanError> {
    let here = graph.room_at(grid.center(start)).ok_or(PlanError::NoRoomPath)?;
    let stops = plan_scene_graph(graph, here.id, grid.center(goal))?;
    let mut cells = vec![start];
    let mut cost = 0.0;
    for p in stops {
        let to = nearest_passable(grid, mask, p).ok_or(PlanError::NoPath)?;
        let from = *cells.last().expect("starts with one cell");
        let (leg, c) = astar_cells(grid, mask, from, to)?;
        cells.extend_from_slice(&leg[1..]);
        cost += c;
    }
    if cells.last() != Some(&goal) {
        let (leg, c) = astar_cells(grid, mask, *cells.last().expect("non-empty"), goal)?;
        cells.extend_from_slice(&leg[1..]);
        cost += c;
    }
    Ok((cells, cost))
}

/// Cut `path` after `budget` meters of arc length.
fn truncate(path: Path, budget: f64) -> Path {
    if path.length <= budget {
        return path;
    }
    let mut pts = vec![path.waypoints[0].position];
    let mut left = budget;
    for w in path.waypoints.windows(2) {
        let (a, b) = (w[0].position, w[1].position);
        let l = a.distance(b);
        if l >= left {
            if left > 0.0 {
                pts.push(a + (b - a) * (left / l));
            }
            break;
        }
        pts.push(b);
        left -= l;
    }
    Path::from_points(pts)
}

/// How far back from a frontier the robot may stop: its clearance from
/// Unknown plus a cell of slack for the diagonal.
fn frontier_reach(grid: &OccupancyGrid, cfg: &EpisodeConfig) -> f64 {
    cfg.robot_radius + 2.0 * grid.resolution
}

/// Run one exploration episode in `world`. Never fails: planning or motion
/// problems end the current step and are noted in its record.
pub fn run_episode(world: &World, cfg: &EpisodeConfig, sampler: &dyn CompletionSampler) -> EpisodeLog {
    let profiles = world.spec.room_catalog.derived_profiles();
    let j = if cfg.policy == Policy::Semantic { cfg.ensemble.j.max(1) } else { 0 };
    let mut maps = Maps {
        main: Mapper::with_profiles(cfg.mapper.clone(), profiles.clone()),
        subs: (0..j).map(|_| Mapper::with_profiles(cfg.mapper.clone(), profiles.clone())).collect(),
        next: 0,
    };
    let mut log = EpisodeLog {
        steps: vec![],
        termination: Termination::NoFrontiers,
        graphs: vec![],
        grids: vec![],
        gains: vec![],
        ensembles: vec![],
        sampler_seconds: vec![],
        truth: world.truth_graph.clone(),
    };

    let mut pose = world.start_pose(cfg.robot_radius);
    let first = panoramic_scan(world, pose, &cfg.sensor, 0.0).unwrap_or_else(|_| Observation::empty(pose, 0.0));
    maps.feed(&first, true);
    let mut traveled = 0.0;
    let mut elapsed = cfg.motion.scan_time;
    let mut visited: Vec<Vec2> = vec![];
    // Segments already driven. New surface evidence can pinch the inflated
    // mask shut around the robot; a driven segment stays passable.
    let mut trail: Vec<(Vec2, Vec2)> = vec![];

    let record = |log: &mut EpisodeLog, maps: &Maps, rec: StepRecord| {
        let g = maps.main.graph();
        log.steps.push(StepRecord { objects: g.object_count(), rooms: g.room_count(), nodes: g.node_count(), ..rec });
        log.graphs.push(g.clone());
        log.grids.push(maps.main.grid().clone());
    };
    let base = |step: usize, pose: Pose, traveled: f64, elapsed: f64, mode: &str| StepRecord {
        step,
        x: pose.position.x,
        y: pose.position.y,
        yaw: pose.yaw,
        traveled,
        elapsed,
        mode: mode.into(),
        goal: None,
        gain: None,
        planned: 0.0,
        observations: 1,
        objects: 0,
        rooms: 0,
        nodes: 0,
        graph: format!("graphs/step_{step}.yaml"),
        ensemble: None,
        note: None,
    };
    record(&mut log, &maps, base(0, pose, 0.0, elapsed, "start"));
    log.gains.push(None);
    log.ensembles.push(None);
    log.sampler_seconds.push(0.0);

    for step in 1.. {
        if traveled >= cfg.l_max - 1e-9 {
            log.termination = Termination::BudgetReached;
            break;
        }
        let grid = maps.main.grid().clone();
        let mut mask = passable_mask(&grid, cfg.robot_radius);
        for &(a, b) in &trail {
            for (k, _) in grid.traverse(a, b) {
                if let Some(i) = grid.index_of_key(k).filter(|&i| grid.get(i) == Cell::Free) {
                    mask[i] = true;
                }
            }
        }
        let Some(start) = nearest_passable(&grid, &mask, pose.position) else {
            log.termination = Termination::NoFrontiers;
            break;
        };
        let dist = distance_field(&grid, &mask, start);
        let fgoal = frontier_policy(&grid, &dist, cfg.frontier_min_cells, frontier_reach(&grid, cfg), &visited, cfg.revisit_radius);
        let FrontierGoal::Goal { cell: frontier_cell, .. } = fgoal else {
            log.termination = Termination::NoFrontiers;
            break;
        };

        let step_seed = sub_seed(cfg.seed, step as u64);
        let mut rec = base(step, pose, traveled, elapsed, "frontier");
        let mut goal = frontier_cell;
        let mut gains = None;
        let mut ensemble = None;
        let mut seconds = 0.0;
        if cfg.policy == Policy::Semantic {
            if let Some(c) = semantic_goal(&maps, &grid, &dist, pose.position, &visited, cfg, sampler, step_seed) {
                seconds = c.seconds;
                gains = Some(c.table);
                if cfg.keep_ensembles {
                    ensemble = Some(c.ensemble);
                    rec.ensemble = Some(format!("ensemble/step_{step}"));
                }
                rec.gain = Some(c.gain);
                if c.gain > cfg.min_gain {
                    goal = c.cell;
                    rec.mode = "semantic".into();
                }
            }
        }
        let gp = grid.center(goal);
        rec.goal = Some([gp.x, gp.y]);
        visited.push(gp);

        let mut observations = 0;
        let route = match cfg.high_level {
            HighLevel::Grid => astar_cells(&grid, &mask, start, goal),
            HighLevel::SceneGraph => room_route(maps.main.graph(), &grid, &mask, start, goal).or_else(|_| astar_cells(&grid, &mask, start, goal)),
        };
        match route {
            Err(e) => rec.note = Some(e.to_string()),
            Ok((cells, _)) => {
                let mut pts: Vec<Vec2> = cells.iter().map(|&i| grid.center(i)).collect();
                pts[0] = pose.position;
                let global = Path::from_points(pts);
                let last = global.waypoints.len() - 1;
                loop {
                    let k = match local_goal_index(&global, &grid, pose, cfg.window) {
                        Ok(k) => k,
                        Err(e) => {
                            rec.note = Some(e.to_string());
                            break;
                        }
                    };
                    let local = match refine_local(&global, &grid, &mask, pose, cfg.window) {
                        Ok(p) => truncate(p, cfg.l_max - traveled),
                        Err(e) => {
                            rec.note = Some(e.to_string());
                            break;
                        }
                    };
                    rec.planned += local.length;
                    let (progress, hit) = match follow_path(world, pose, &local.waypoints[1..], &cfg.motion, &cfg.sensor, elapsed) {
                        Ok(p) => (p, None),
                        Err(WorldError::SegmentInCollision { segment, progress }) => (*progress, Some(segment)),
                        Err(e) => {
                            rec.note = Some(e.to_string());
                            break;
                        }
                    };
                    let driven = hit.unwrap_or(local.waypoints.len() - 1);
                    trail.extend(local.waypoints[..=driven].windows(2).map(|w| (w[0].position, w[1].position)));
                    for o in &progress.observations {
                        maps.feed(o, false);
                    }
                    observations += progress.observations.len();
                    traveled += progress.traveled;
                    elapsed += progress.traveled / cfg.motion.speed;
                    pose = progress.pose;
                    if let Some(s) = hit {
                        rec.note = Some(format!("segment {s} in collision"));
                        break;
                    }
                    if k == last || traveled >= cfg.l_max - 1e-9 || local.length <= 0.0 {
                        break;
                    }
                }
            }
        }

        let scan = panoramic_scan(world, pose, &cfg.sensor, elapsed).unwrap_or_else(|_| Observation::empty(pose, elapsed));
        maps.feed(&scan, true);
        elapsed += cfg.motion.scan_time;
        rec.x = pose.position.x;
        rec.y = pose.position.y;
        rec.yaw = pose.yaw;
        rec.traveled = traveled;
        rec.elapsed = elapsed;
        rec.observations = observations + 1;
        record(&mut log, &maps, rec);
        log.gains.push(gains);
        log.ensembles.push(ensemble);
        log.sampler_seconds.push(seconds);
    }
    log
}
