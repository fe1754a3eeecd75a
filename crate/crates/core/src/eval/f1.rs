use serde::{Deserialize, Serialize};

use super::MatchSpec;
use crate::SceneGraph;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct F1Score {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub matches: usize,
}

impl F1Score {
    pub fn from_counts(matches: usize, predicted: usize, truth: usize) -> Self {
        if predicted == 0 && truth == 0 {
            return Self { precision: 1.0, recall: 1.0, f1: 1.0, matches: 0 };
        }
        let precision = if predicted == 0 { 0.0 } else { matches as f64 / predicted as f64 };
        let recall = if truth == 0 { 0.0 } else { matches as f64 / truth as f64 };
        let f1 = if precision + recall == 0.0 { 0.0 } else { 2.0 * precision * recall / (precision + recall) };
        Self { precision, recall, f1, matches }
    }
}

/// One-to-one greedy matching of labeled points: same-label pairs no
/// farther apart than `max_dist`, taken by ascending distance (ties by
/// index). Returns (i, j) pairs.
pub fn greedy_label_matching(a: &[(&str, [f64; 3])], b: &[(&str, [f64; 3])], max_dist: f64) -> Vec<(usize, usize)> {
    let mut pairs = Vec::new();
    for (i, (la, pa)) in a.iter().enumerate() {
        for (j, (lb, pb)) in b.iter().enumerate() {
            if la != lb {
                continue;
            }
            let d = ((pa[0] - pb[0]).powi(2) + (pa[1] - pb[1]).powi(2) + (pa[2] - pb[2]).powi(2)).sqrt();
            if d <= max_dist {
                pairs.push((d, i, j));
            }
        }
    }
    pairs.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
    let mut used_a = vec![false; a.len()];
    let mut used_b = vec![false; b.len()];
    let mut out = Vec::new();
    for (_, i, j) in pairs {
        if !used_a[i] && !used_b[j] {
            used_a[i] = true;
            used_b[j] = true;
            out.push((i, j));
        }
    }
    out
}

/// Object-layer precision, recall and F1 of `pred` against `truth`.
pub fn object_f1(pred: &SceneGraph, truth: &SceneGraph, spec: &MatchSpec) -> F1Score {
    let p: Vec<(&str, [f64; 3])> = pred.objects().map(|o| (o.label.as_str(), [o.center.x, o.center.y, o.center.z])).collect();
    let t: Vec<(&str, [f64; 3])> = truth.objects().map(|o| (o.label.as_str(), [o.center.x, o.center.y, o.center.z])).collect();
    let m = greedy_label_matching(&p, &t, spec.object_dist);
    F1Score::from_counts(m.len(), p.len(), t.len())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene_graph::tests::object;

    #[test]
    fn identical_and_spurious() {
        let mut truth = SceneGraph::new();
        for i in 0..3 {
            object(&mut truth, "chair", i as f64, 0.0, None);
        }
        let s = object_f1(&truth, &truth, &MatchSpec::default());
        assert_eq!((s.precision, s.recall, s.f1), (1.0, 1.0, 1.0));
        let mut pred = truth.clone();
        for i in 0..3 {
            object(&mut pred, "chair", i as f64, 5.0, None);
        }
        let s = object_f1(&pred, &truth, &MatchSpec::default());
        assert_eq!(s.precision, 0.5);
        assert_eq!(s.recall, 1.0);
        assert!((s.f1 - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn threshold_is_inclusive_at_half_meter() {
        let mut a = SceneGraph::new();
        object(&mut a, "chair", 0.0, 0.0, None);
        let mut b = SceneGraph::new();
        object(&mut b, "chair", 0.51, 0.0, None);
        assert_eq!(object_f1(&a, &b, &MatchSpec::default()).matches, 0);
        let mut c = SceneGraph::new();
        object(&mut c, "chair", 0.5, 0.0, None);
        assert_eq!(object_f1(&a, &c, &MatchSpec::default()).matches, 1);
    }

    #[test]
    fn empty_both_is_perfect() {
        let g = SceneGraph::new();
        assert_eq!(object_f1(&g, &g, &MatchSpec::default()).f1, 1.0);
    }
}
