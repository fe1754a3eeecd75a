//! Map quality: object F1, graph edit distance, room-prediction scoring and
//! metric curves over an exploration log.

mod f1;
mod ged;

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use f1::{greedy_label_matching, object_f1, F1Score};
pub use ged::{ged, graph_edit_distance, permitted, GedGraph, GedNode, GedResult};

use crate::scene_graph::Provenance;
use crate::{SceneGraph, Vec2};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MatchSpec {
    pub object_dist: f64,
    pub room_dist: f64,
    pub room_pred_dist: f64,
    /// A predicted room is confident when strictly more than this fraction
    /// of the ensemble agrees on it.
    pub consensus: f64,
    /// Largest combined node count solved exactly.
    pub exact_limit: usize,
    pub beam_width: usize,
}

impl Default for MatchSpec {
    fn default() -> Self {
        Self { object_dist: 0.5, room_dist: 4.0, room_pred_dist: 2.5, consensus: 0.5, exact_limit: 14, beam_width: 256 }
    }
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("missing snapshot: {0}")]
    MissingSnapshot(PathBuf),
    #[error("log has no steps")]
    EmptyLog,
    #[error("bad log record: {0}")]
    BadRecord(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoomPrediction {
    pub label: String,
    pub centroid: Vec2,
    /// Fraction of ensemble members predicting this room.
    pub support: f64,
    pub confident: bool,
    pub success: bool,
}

/// Cluster the predicted rooms of an ensemble by label and proximity and
/// score each cluster against the truth rooms.
pub fn room_prediction_success(ensemble: &[SceneGraph], truth: &SceneGraph, spec: &MatchSpec) -> Vec<RoomPrediction> {
    struct Cluster {
        label: String,
        sum: Vec2,
        n: usize,
        members: Vec<usize>,
    }
    let mut clusters: Vec<Cluster> = Vec::new();
    for (gi, g) in ensemble.iter().enumerate() {
        for r in g.rooms().filter(|r| r.provenance == Provenance::Predicted) {
            let hit = clusters.iter_mut().find(|c| {
                c.label == r.label
                    && !c.members.contains(&gi)
                    && (c.sum * (1.0 / c.n as f64)).distance(r.centroid) <= spec.room_pred_dist
            });
            match hit {
                Some(c) => {
                    c.sum += r.centroid;
                    c.n += 1;
                    c.members.push(gi);
                }
                None => clusters.push(Cluster { label: r.label.clone(), sum: r.centroid, n: 1, members: vec![gi] }),
            }
        }
    }
    let total = ensemble.len().max(1) as f64;
    clusters
        .into_iter()
        .map(|c| {
            let centroid = c.sum * (1.0 / c.n as f64);
            let support = c.members.len() as f64 / total;
            let confident = support > spec.consensus;
            let success = confident
                && truth.rooms().any(|t| t.label == c.label && t.centroid.distance(centroid) <= spec.room_pred_dist);
            RoomPrediction { label: c.label, centroid, support, confident, success }
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricPoint {
    pub step: usize,
    pub traveled: f64,
    pub elapsed: f64,
    pub f1: f64,
    pub precision: f64,
    pub recall: f64,
    pub ged: u64,
    pub ged_approximate: bool,
}

/// Map state after one exploration step.
#[derive(Clone, Debug)]
pub struct Snapshot {
    pub step: usize,
    pub traveled: f64,
    pub elapsed: f64,
    pub graph: SceneGraph,
}

pub fn metric_point(s: &Snapshot, truth: &SceneGraph, spec: &MatchSpec) -> MetricPoint {
    let f = object_f1(&s.graph, truth, spec);
    let g = graph_edit_distance(&s.graph, truth, spec);
    MetricPoint {
        step: s.step,
        traveled: s.traveled,
        elapsed: s.elapsed,
        f1: f.f1,
        precision: f.precision,
        recall: f.recall,
        ged: g.cost,
        ged_approximate: g.approximate,
    }
}

pub fn metrics_curve(snapshots: &[Snapshot], truth: &SceneGraph, spec: &MatchSpec) -> Vec<MetricPoint> {
    snapshots.iter().map(|s| metric_point(s, truth, spec)).collect()
}

/// Last point whose `key` (elapsed time or distance) is within each
/// fraction of `total`; the first point when none is.
pub fn resample(points: &[MetricPoint], fractions: &[f64], total: f64, key: impl Fn(&MetricPoint) -> f64) -> Vec<(f64, MetricPoint)> {
    let Some(first) = points.first() else { return Vec::new() };
    fractions
        .iter()
        .map(|&f| {
            let limit = f * total + 1e-9;
            let p = points.iter().filter(|p| key(p) <= limit).last().unwrap_or(first);
            (f, *p)
        })
        .collect()
}

/// The fractions of the budget reported alongside full curves.
pub const BUDGET_FRACTIONS: [f64; 3] = [0.1, 0.5, 1.0];

#[derive(Deserialize)]
struct StepLine {
    step: usize,
    traveled: f64,
    elapsed: f64,
}

/// Read `log.jsonl` and the per-step graph snapshots of an episode log
/// directory.
pub fn load_snapshots(dir: &Path) -> Result<Vec<Snapshot>, EvalError> {
    let log = dir.join("log.jsonl");
    let text = fs::read_to_string(&log).map_err(|_| EvalError::MissingSnapshot(log.clone()))?;
    let mut out = Vec::new();
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        let rec: StepLine = serde_json::from_str(line).map_err(|e| EvalError::BadRecord(e.to_string()))?;
        let path = dir.join("graphs").join(format!("step_{}.yaml", rec.step));
        let yaml = fs::read_to_string(&path).map_err(|_| EvalError::MissingSnapshot(path.clone()))?;
        let graph = SceneGraph::from_yaml(&yaml).map_err(|e| EvalError::BadRecord(format!("{}: {e}", path.display())))?;
        out.push(Snapshot { step: rec.step, traveled: rec.traveled, elapsed: rec.elapsed, graph });
    }
    if out.is_empty() {
        return Err(EvalError::EmptyLog);
    }
    Ok(out)
}

/// Metric curve as CSV with a header row.
pub fn curve_csv(points: &[MetricPoint]) -> String {
    let mut s = String::from("step,traveled,elapsed,f1,precision,recall,ged,ged_approximate\n");
    for p in points {
        s.push_str(&format!(
            "{},{:.6},{:.6},{:.6},{:.6},{:.6},{},{}\n",
            p.step, p.traveled, p.elapsed, p.f1, p.precision, p.recall, p.ged, p.ged_approximate
        ));
    }
    s
}
