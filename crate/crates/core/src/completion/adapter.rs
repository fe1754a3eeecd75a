//! Completion by an external language-model service.
//!
//! Each sample is a generate request followed by a refine request over a
//! JSON envelope. Answers that fail to parse or violate consistency are
//! rejected and re-queried; past the rejection budget, or when the service
//! cannot be reached, the sample comes from the prior sampler instead.

use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Duration;

use base64::Engine;
use log::{debug, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{consistency_check, CompletionSampler, PriorSampler, SampleContext, Violation};
use crate::scene_graph::{cross_section_raster, Provenance, DEFAULT_BANDS};
use crate::SceneGraph;

const GENERATE_PROMPT: &str = include_str!("../../prompts/generate.txt");
const REFINE_PROMPT: &str = include_str!("../../prompts/refine.txt");

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdapterRequest {
    pub graph_yaml: String,
    /// Binary PGM (P5) cross sections, base64 encoded.
    pub rasters: Vec<String>,
    pub prompt: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdapterResponse {
    pub graph_yaml: String,
}

#[derive(Debug, Error)]
pub enum AdapterError {
    #[error("adapter unavailable: {0}")]
    Unavailable(String),
    #[error("malformed reply: {0}")]
    Malformed(String),
    #[error("inconsistent completion: {0:?}")]
    Rejected(Vec<Violation>),
    #[error("template: {0}")]
    Template(#[from] std::io::Error),
}

/// Request/response channel to the service. Implementations must allow
/// concurrent calls.
pub trait Transport: Send + Sync {
    fn send(&self, req: &AdapterRequest) -> Result<AdapterResponse, AdapterError>;
}

/// JSON over HTTP POST.
#[derive(Clone, Debug)]
pub struct HttpTransport {
    agent: ureq::Agent,
    endpoint: String,
}

impl HttpTransport {
    pub fn new(endpoint: &str, timeout: Duration) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder().timeout_global(Some(timeout)).build().into();
        Self { agent, endpoint: endpoint.to_string() }
    }
}

impl Transport for HttpTransport {
    fn send(&self, req: &AdapterRequest) -> Result<AdapterResponse, AdapterError> {
        let mut resp = self.agent.post(&self.endpoint).send_json(req).map_err(|e| AdapterError::Unavailable(e.to_string()))?;
        resp.body_mut().read_json::<AdapterResponse>().map_err(|e| AdapterError::Malformed(e.to_string()))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdapterConfig {
    pub endpoint: String,
    pub timeout_s: f64,
    /// Prompt files; the bundled prompts are used when unset.
    pub generate_template: Option<PathBuf>,
    pub refine_template: Option<PathBuf>,
    /// Rejected answers tolerated per sample before falling back.
    pub max_rejections: usize,
    pub raster_cell: f64,
    pub bands: Vec<(f64, f64)>,
}

impl Default for AdapterConfig {
    fn default() -> Self {
        Self {
            endpoint: "http://127.0.0.1:8080/complete".into(),
            timeout_s: 120.0,
            generate_template: None,
            refine_template: None,
            max_rejections: 2,
            raster_cell: 0.1,
            bands: DEFAULT_BANDS.to_vec(),
        }
    }
}

pub struct LlmAdapter<T: Transport> {
    transport: T,
    fallback: PriorSampler,
    cfg: AdapterConfig,
    generate: String,
    refine: String,
    rejections: AtomicUsize,
    fallbacks: AtomicUsize,
}

impl LlmAdapter<HttpTransport> {
    pub fn http(cfg: AdapterConfig, fallback: PriorSampler) -> Result<Self, AdapterError> {
        let t = HttpTransport::new(&cfg.endpoint, Duration::from_secs_f64(cfg.timeout_s));
        Self::new(t, cfg, fallback)
    }
}

impl<T: Transport> LlmAdapter<T> {
    pub fn new(transport: T, cfg: AdapterConfig, fallback: PriorSampler) -> Result<Self, AdapterError> {
        let load = |p: &Option<PathBuf>, default: &str| match p {
            Some(p) => std::fs::read_to_string(p),
            None => Ok(default.to_string()),
        };
        let generate = load(&cfg.generate_template, GENERATE_PROMPT)?;
        let refine = load(&cfg.refine_template, REFINE_PROMPT)?;
        Ok(Self {
            transport,
            fallback,
            cfg,
            generate,
            refine,
            rejections: AtomicUsize::new(0),
            fallbacks: AtomicUsize::new(0),
        })
    }

    /// Answers rejected so far.
    pub fn rejections(&self) -> usize {
        self.rejections.load(Ordering::Relaxed)
    }

    /// Samples taken from the prior sampler so far.
    pub fn fallbacks(&self) -> usize {
        self.fallbacks.load(Ordering::Relaxed)
    }

    fn rasters(&self, g: &SceneGraph) -> Vec<String> {
        self.cfg
            .bands
            .iter()
            .filter_map(|&(lo, hi)| cross_section_raster(g, lo, hi, self.cfg.raster_cell).ok())
            .map(|c| base64::engine::general_purpose::STANDARD.encode(c.image.to_p5()))
            .collect()
    }

    fn render(template: &str, seed: u64, index: usize) -> String {
        template.replace("{seed}", &seed.to_string()).replace("{index}", &index.to_string())
    }

    fn attempt(&self, current: &SceneGraph, rasters: &[String], seed: u64, index: usize) -> Result<SceneGraph, AdapterError> {
        let first = self.transport.send(&AdapterRequest {
            graph_yaml: current.to_yaml(),
            rasters: rasters.to_vec(),
            prompt: Self::render(&self.generate, seed, index),
        })?;
        SceneGraph::from_yaml(&first.graph_yaml).map_err(|e| AdapterError::Malformed(e.to_string()))?;
        let second = self.transport.send(&AdapterRequest {
            graph_yaml: first.graph_yaml,
            rasters: rasters.to_vec(),
            prompt: Self::render(&self.refine, seed, index),
        })?;
        let mut g = SceneGraph::from_yaml(&second.graph_yaml).map_err(|e| AdapterError::Malformed(e.to_string()))?;
        mark_new_as_predicted(current, &mut g);
        g.validate().map_err(|e| AdapterError::Malformed(e.to_string()))?;
        consistency_check(current, &g).map_err(AdapterError::Rejected)?;
        Ok(g)
    }

    pub fn sample_one(&self, current: &SceneGraph, ctx: &SampleContext, seed: u64, index: usize) -> SceneGraph {
        let rasters = self.rasters(current);
        for _ in 0..=self.cfg.max_rejections {
            match self.attempt(current, &rasters, seed, index) {
                Ok(g) => return g,
                Err(AdapterError::Unavailable(e)) => {
                    warn!("completion service unavailable ({e}); using the prior sampler");
                    break;
                }
                Err(e) => {
                    self.rejections.fetch_add(1, Ordering::Relaxed);
                    debug!("sample {index}: answer rejected: {e}");
                }
            }
        }
        self.fallbacks.fetch_add(1, Ordering::Relaxed);
        self.fallback.sample_one(current, ctx, seed, index)
    }
}

/// Anything the current graph did not observe is a prediction, whatever the
/// reply claims.
fn mark_new_as_predicted(current: &SceneGraph, g: &mut SceneGraph) {
    let objects: Vec<_> = g
        .objects()
        .filter(|o| current.object(o.id).is_none_or(|c| c.provenance != Provenance::Observed))
        .map(|o| o.id)
        .collect();
    for id in objects {
        if let Some(o) = g.object_mut(id) {
            o.provenance = Provenance::Predicted;
        }
    }
    let rooms: Vec<_> = g
        .rooms()
        .filter(|r| current.room(r.id).is_none_or(|c| c.provenance != Provenance::Observed))
        .map(|r| r.id)
        .collect();
    for id in rooms {
        if let Some(r) = g.room_mut(id) {
            r.provenance = Provenance::Predicted;
        }
    }
}

impl<T: Transport> CompletionSampler for LlmAdapter<T> {
    fn sample_with(&self, current: &SceneGraph, ctx: &SampleContext, m: usize, seed: u64) -> Vec<SceneGraph> {
        (0..m).into_par_iter().map(|i| self.sample_one(current, ctx, seed, i)).collect()
    }

    fn name(&self) -> &str {
        "adapter"
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene_graph::tests::{object, room};
    use crate::scene_graph::RoomNode;
    use std::sync::Mutex;

    fn current() -> SceneGraph {
        let mut g = SceneGraph::new();
        let r = room(&mut g, "bedroom", 0.0, 0.0, 4.0, 4.0);
        object(&mut g, "bed", 2.0, 2.0, Some(r));
        g
    }

    struct Echo;
    impl Transport for Echo {
        fn send(&self, req: &AdapterRequest) -> Result<AdapterResponse, AdapterError> {
            Ok(AdapterResponse { graph_yaml: req.graph_yaml.clone() })
        }
    }

    /// Replies from a script, then echoes.
    struct Scripted {
        replies: Mutex<Vec<String>>,
        calls: AtomicUsize,
    }
    impl Transport for Scripted {
        fn send(&self, req: &AdapterRequest) -> Result<AdapterResponse, AdapterError> {
            self.calls.fetch_add(1, Ordering::Relaxed);
            let mut r = self.replies.lock().unwrap();
            let graph_yaml = if r.is_empty() { req.graph_yaml.clone() } else { r.remove(0) };
            Ok(AdapterResponse { graph_yaml })
        }
    }

    struct Down;
    impl Transport for Down {
        fn send(&self, _: &AdapterRequest) -> Result<AdapterResponse, AdapterError> {
            Err(AdapterError::Unavailable("connection refused".into()))
        }
    }

    fn adapter<T: Transport>(t: T) -> LlmAdapter<T> {
        LlmAdapter::new(t, AdapterConfig::default(), PriorSampler::default()).unwrap()
    }

    #[test]
    fn echo_gives_copies() {
        let g = current();
        let a = adapter(Echo);
        let s = a.sample(&g, 3, 0);
        assert!(s.iter().all(|c| *c == g));
        assert_eq!((a.rejections(), a.fallbacks()), (0, 0));
    }

    #[test]
    fn malformed_thrice_falls_back() {
        let g = current();
        let bad = vec!["rooms: [".to_string(); 3];
        let a = adapter(Scripted { replies: Mutex::new(bad), calls: AtomicUsize::new(0) });
        let s = a.sample(&g, 1, 4);
        assert_eq!(a.rejections(), 3);
        assert_eq!(a.fallbacks(), 1);
        assert_eq!(a.transport.calls.load(Ordering::Relaxed), 3);
        assert_eq!(s[0], PriorSampler::default().sample(&g, 1, 4)[0]);
    }

    #[test]
    fn room_inside_bedroom_is_requeried() {
        let g = current();
        let mut bad = g.clone();
        let id = bad.alloc_id();
        bad.upsert(RoomNode {
            id,
            label: "bathroom".into(),
            centroid: crate::Vec2::new(1.0, 1.0),
            footprint: crate::scene_graph::tests::square(0.2, 0.2, 1.8, 1.8),
            feature: Default::default(),
            provenance: Provenance::Observed,
        })
        .unwrap();
        let y = bad.to_yaml();
        let a = adapter(Scripted { replies: Mutex::new(vec![y.clone(), y]), calls: AtomicUsize::new(0) });
        let s = a.sample(&g, 1, 0);
        assert_eq!(a.rejections(), 1);
        assert_eq!(a.fallbacks(), 0);
        // Generate + refine rejected, then generate + refine echoed.
        assert_eq!(a.transport.calls.load(Ordering::Relaxed), 4);
        assert_eq!(s[0], g);
    }

    #[test]
    fn unavailable_falls_back_at_once() {
        let g = current();
        let a = adapter(Down);
        let s = a.sample(&g, 2, 1);
        assert_eq!(a.fallbacks(), 2);
        assert_eq!(a.rejections(), 0);
        assert_eq!(s.len(), 2);
    }

    #[test]
    fn request_carries_rasters() {
        let a = adapter(Echo);
        let r = a.rasters(&current());
        assert_eq!(r.len(), 2);
        let bytes = base64::engine::general_purpose::STANDARD.decode(&r[0]).unwrap();
        assert!(bytes.starts_with(b"P5"));
    }
}
