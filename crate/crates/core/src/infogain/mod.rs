//! Ensemble mutual-information objective for choosing the next viewpoint.
//!
//! Completed graphs are perturbed and rendered at a candidate pose. The gain
//! is the entropy of all renders minus the mean entropy within each
//! component, computed once over the visible-token multisets and once over
//! the dominant room.

mod render;

use std::collections::BTreeMap;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use render::{
    canonicalize, occluded, render_observation, CanonicalObservation, Layer, RenderedObservation, Token, View,
    VisibleNode, NO_ROOM,
};

use crate::completion::{perturb, PerturbConfig};
use crate::mapping::{Cell, OccupancyGrid};
use crate::rng::{stream, sub_seed};
use crate::scene_graph::{NodeId, Provenance};
use crate::world::Pose;
use crate::{SceneGraph, Scalar, Vec2};

#[derive(Debug, Error, PartialEq)]
pub enum GainError {
    #[error("no samples")]
    EmptySamples,
    #[error("empty ensemble")]
    EmptyEnsemble,
    #[error("grid has no free cell")]
    NoFreeSpace,
}

/// What the conditional entropy conditions on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Component {
    /// Each completed graph's perturbed renders form one component.
    CompletedGraph,
    /// All renders descending from one current graph form one component.
    CurrentGraph,
}

/// Which rendered nodes make up an observation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scope {
    /// Every visible object, nothing box and structure.
    All,
    /// Predicted objects only. Observed nodes still occlude and parent, but
    /// differences between current graphs in what was already seen do not
    /// count as information.
    Predicted,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GainConfig {
    /// Weight of the room term.
    pub lambda: f64,
    /// Candidate viewpoints per step.
    pub k: usize,
    /// Perturbations per completed graph.
    pub n: usize,
    pub range: f64,
    pub panoramic: bool,
    /// Field of view when not panoramic.
    pub fov: f64,
    pub camera_height: f64,
    pub component: Component,
    /// Cell size for position-aware tokens; labels only when unset.
    pub position_quantum: Option<f64>,
    pub scope: Scope,
    pub perturb: PerturbConfig,
}

impl Default for GainConfig {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            k: 300,
            n: 4,
            range: 5.0,
            panoramic: true,
            fov: std::f64::consts::FRAC_PI_2,
            camera_height: 1.0,
            component: Component::CompletedGraph,
            position_quantum: None,
            scope: Scope::All,
            perturb: PerturbConfig::default(),
        }
    }
}

impl GainConfig {
    pub fn view(&self) -> View {
        let fov = if self.panoramic { std::f64::consts::TAU } else { self.fov };
        View { fov, range: self.range, camera_height: self.camera_height }
    }
}

/// Shannon entropy (nats) of the empirical distribution of `samples`.
pub fn empirical_entropy<T: Scalar, K: Ord>(samples: &[K]) -> Result<T, GainError> {
    if samples.is_empty() {
        return Err(GainError::EmptySamples);
    }
    let mut counts: BTreeMap<&K, usize> = BTreeMap::new();
    for s in samples {
        *counts.entry(s).or_default() += 1;
    }
    let n = T::count(samples.len());
    Ok(counts
        .values()
        .map(|&c| {
            let p = T::count(c) / n;
            -p * p.ln()
        })
        .sum())
}

/// Mixture entropy minus mean component entropy, floored at zero against
/// rounding (the exact value is never negative).
pub fn mutual_information<T: Scalar, K: Ord + Clone>(components: &[Vec<K>]) -> Result<T, GainError> {
    if components.is_empty() {
        return Err(GainError::EmptyEnsemble);
    }
    let pooled: Vec<K> = components.iter().flatten().cloned().collect();
    let marginal = empirical_entropy::<T, K>(&pooled)?;
    let mut cond = T::zero();
    for c in components {
        cond = cond + empirical_entropy::<T, K>(c)?;
    }
    let mi = marginal - cond / T::count(components.len());
    Ok(if mi > T::zero() { mi } else { T::zero() })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Gain {
    pub total: f64,
    pub object: f64,
    pub room: f64,
}

/// Perturbed copies of every completed graph: `graphs[j][k][n]`.
#[derive(Clone, Debug)]
pub struct PreparedEnsemble {
    pub graphs: Vec<Vec<Vec<SceneGraph>>>,
}

impl PreparedEnsemble {
    /// Perturb each completed graph `cfg.n` times with seeds derived from
    /// `seed` and the graph's position in the ensemble.
    pub fn new(ensemble: &[Vec<SceneGraph>], cfg: &GainConfig, seed: u64) -> Result<Self, GainError> {
        if ensemble.is_empty() || ensemble.iter().any(|e| e.is_empty()) {
            return Err(GainError::EmptyEnsemble);
        }
        let graphs = ensemble
            .par_iter()
            .enumerate()
            .map(|(j, comps)| {
                comps
                    .iter()
                    .enumerate()
                    .map(|(k, g)| {
                        let base = sub_seed(sub_seed(seed, j as u64), k as u64);
                        (0..cfg.n.max(1))
                            .map(|n| {
                                let p = perturb(g, sub_seed(base, n as u64), &cfg.perturb);
                                match cfg.scope {
                                    Scope::All => p,
                                    Scope::Predicted => strip_observed(p),
                                }
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect();
        Ok(Self { graphs })
    }

    /// Canonical renders at `pose`, grouped by component.
    fn components(&self, pose: Pose, cfg: &GainConfig) -> Vec<Vec<CanonicalObservation>> {
        let view = cfg.view();
        let render = |g: &SceneGraph| {
            let mut c = canonicalize(&render_observation(g, pose, &view), cfg.position_quantum);
            if cfg.scope == Scope::Predicted {
                c.tokens.retain(|t| t.0 == Layer::Object);
            }
            c
        };
        match cfg.component {
            Component::CompletedGraph => {
                self.graphs.iter().flatten().map(|perturbed| perturbed.iter().map(render).collect()).collect()
            }
            Component::CurrentGraph => {
                self.graphs.iter().map(|comps| comps.iter().flatten().map(render).collect()).collect()
            }
        }
    }

    pub fn gain(&self, pose: Pose, cfg: &GainConfig) -> Result<Gain, GainError> {
        let comps = self.components(pose, cfg);
        let objects: Vec<Vec<&[Token]>> = comps.iter().map(|c| c.iter().map(|o| o.tokens.as_slice()).collect()).collect();
        let rooms: Vec<Vec<&str>> = comps.iter().map(|c| c.iter().map(|o| o.dominant_room.as_str()).collect()).collect();
        let object = mutual_information::<f64, _>(&objects)?;
        let room = mutual_information::<f64, _>(&rooms)?;
        Ok(Gain { total: object + cfg.lambda * room, object, room })
    }
}

/// Drop observed objects and nothing boxes; walls and rooms stay.
fn strip_observed(mut g: SceneGraph) -> SceneGraph {
    let observed: Vec<NodeId> = g.objects().filter(|o| o.provenance == Provenance::Observed).map(|o| o.id).collect();
    let nothings: Vec<NodeId> = g.nothings().map(|n| n.id).collect();
    for id in observed.into_iter().chain(nothings) {
        g.remove(id).expect("listed node exists");
    }
    g
}

/// Gain of one pose; see [`PreparedEnsemble`] to score many poses against
/// the same perturbations.
pub fn information_gain(ensemble: &[Vec<SceneGraph>], pose: Pose, cfg: &GainConfig, seed: u64) -> Result<Gain, GainError> {
    PreparedEnsemble::new(ensemble, cfg, seed)?.gain(pose, cfg)
}

/// `k` poses drawn uniformly over the Free cells of `grid`, jittered
/// within their cell.
pub fn sample_viewpoints(grid: &OccupancyGrid, k: usize, seed: u64) -> Result<Vec<Pose>, GainError> {
    let free: Vec<usize> = (0..grid.len()).filter(|&i| grid.get(i) == Cell::Free).collect();
    if free.is_empty() {
        return Err(GainError::NoFreeSpace);
    }
    let mut rng = stream(seed, 0);
    let h = 0.4 * grid.resolution;
    Ok((0..k)
        .map(|_| {
            let c = grid.center(free[rng.gen_range(0..free.len())]);
            let p = c + Vec2::new(rng.gen_range(-h..=h), rng.gen_range(-h..=h));
            Pose { position: p, yaw: rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI) }
        })
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GainRow {
    pub idx: usize,
    pub x: f64,
    pub y: f64,
    pub object: f64,
    pub room: f64,
    pub total: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Selection {
    pub pose: Pose,
    pub index: usize,
    pub gain: f64,
    pub table: Vec<GainRow>,
}

/// Gains within this of each other are a tie.
const TIE: f64 = 1e-12;

/// Best of `candidates` by total gain; ties go to the candidate nearest
/// `from`, then to the lowest index.
pub fn select_from(prep: &PreparedEnsemble, candidates: &[Pose], from: Vec2, cfg: &GainConfig) -> Result<Selection, GainError> {
    if candidates.is_empty() {
        return Err(GainError::NoFreeSpace);
    }
    let table: Vec<GainRow> = candidates
        .par_iter()
        .enumerate()
        .map(|(idx, p)| {
            prep.gain(*p, cfg).map(|g| GainRow {
                idx,
                x: p.position.x,
                y: p.position.y,
                object: g.object,
                room: g.room,
                total: g.total,
            })
        })
        .collect::<Result<_, _>>()?;
    let best = table.iter().map(|r| r.total).fold(f64::NEG_INFINITY, f64::max);
    let winner = table
        .iter()
        .filter(|r| r.total >= best - TIE)
        .min_by(|a, b| {
            let da = candidates[a.idx].position.distance(from);
            let db = candidates[b.idx].position.distance(from);
            da.total_cmp(&db).then(a.idx.cmp(&b.idx))
        })
        .expect("non-empty table");
    Ok(Selection { pose: candidates[winner.idx], index: winner.idx, gain: winner.total, table })
}

/// Sample candidates over `grid` and pick the most informative one.
pub fn select_best_viewpoint(
    ensemble: &[Vec<SceneGraph>],
    grid: &OccupancyGrid,
    from: Vec2,
    cfg: &GainConfig,
    seed: u64,
) -> Result<Selection, GainError> {
    let prep = PreparedEnsemble::new(ensemble, cfg, sub_seed(seed, 1))?;
    let candidates = sample_viewpoints(grid, cfg.k, sub_seed(seed, 2))?;
    select_from(&prep, &candidates, from, cfg)
}

/// Gain table as CSV with a header row.
pub fn gain_csv(rows: &[GainRow]) -> String {
    let mut s = String::from("candidate_idx,x,y,I_object,I_room,I_total\n");
    for r in rows {
        s.push_str(&format!("{},{:.4},{:.4},{:.9},{:.9},{:.9}\n", r.idx, r.x, r.y, r.object, r.room, r.total));
    }
    s
}
