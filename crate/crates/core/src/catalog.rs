//! Room catalog (what rooms exist and what they contain) and room-profile
//! labeling.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::Vec3;

const DEFAULT_CATALOG: &str = include_str!("../data/catalog.yaml");
const DEFAULT_PROFILES: &str = include_str!("../data/room_profiles.yaml");

/// Label given to rooms with no evidence.
pub const UNKNOWN_ROOM: &str = "unknown";

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse: {0}")]
    Parse(#[from] serde_yaml::Error),
    #[error("invalid catalog: {0}")]
    Invalid(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectPrior {
    pub label: String,
    pub half_extents: Vec3,
    /// Inclusive instance count range per room.
    pub count: (u32, u32),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoomPrior {
    #[serde(default = "one")]
    pub weight: f64,
    /// How many rooms with this label a typical apartment has.
    #[serde(default)]
    pub expected: u32,
    /// Side-length range of the footprint in meters.
    #[serde(default = "default_size")]
    pub size: (f64, f64),
    pub objects: Vec<ObjectPrior>,
    /// Labels this room may neighbour; empty means unrestricted.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub adjacency: Vec<String>,
}

fn one() -> f64 {
    1.0
}

fn default_size() -> (f64, f64) {
    (3.0, 4.5)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RoomCatalog {
    pub rooms: BTreeMap<String, RoomPrior>,
}

impl Default for RoomCatalog {
    fn default() -> Self {
        Self::from_yaml(DEFAULT_CATALOG).expect("bundled catalog is valid")
    }
}

impl RoomCatalog {
    pub fn from_yaml(text: &str) -> Result<Self, CatalogError> {
        let c: Self = serde_yaml::from_str(text)?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self, CatalogError> {
        Self::from_yaml(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<(), CatalogError> {
        if self.rooms.is_empty() {
            return Err(CatalogError::Invalid("no room labels".into()));
        }
        for (label, r) in &self.rooms {
            if r.objects.is_empty() {
                return Err(CatalogError::Invalid(format!("{label}: empty object list")));
            }
            if !(r.weight > 0.0) || !(r.size.0 > 0.0 && r.size.0 <= r.size.1) {
                return Err(CatalogError::Invalid(format!("{label}: bad weight or size")));
            }
            for o in &r.objects {
                let h = o.half_extents;
                if !(h.x > 0.0 && h.y > 0.0 && h.z > 0.0) || o.count.0 > o.count.1 {
                    return Err(CatalogError::Invalid(format!("{label}/{}: bad prior", o.label)));
                }
            }
        }
        Ok(())
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.rooms.keys().map(String::as_str)
    }

    pub fn get(&self, label: &str) -> Option<&RoomPrior> {
        self.rooms.get(label)
    }

    /// All object labels across rooms, sorted and deduplicated.
    pub fn object_labels(&self) -> Vec<String> {
        let mut v: Vec<String> = self.rooms.values().flat_map(|r| r.objects.iter().map(|o| o.label.clone())).collect();
        v.sort();
        v.dedup();
        v
    }

    pub fn object_prior(&self, label: &str) -> Option<&ObjectPrior> {
        self.rooms.values().flat_map(|r| r.objects.iter()).find(|o| o.label == label)
    }

    pub fn may_neighbour(&self, a: &str, b: &str) -> bool {
        let ok = |x: &str, y: &str| self.rooms.get(x).is_none_or(|r| r.adjacency.is_empty() || r.adjacency.iter().any(|l| l == y));
        ok(a, b) && ok(b, a)
    }

    /// Profiles derived from the mean object counts of each room prior.
    pub fn derived_profiles(&self) -> RoomProfiles {
        let profiles = self
            .rooms
            .iter()
            .map(|(l, r)| {
                let p = r
                    .objects
                    .iter()
                    .map(|o| (o.label.clone(), (o.count.0 + o.count.1) as f64 / 2.0))
                    .filter(|(_, w)| *w > 0.0)
                    .collect();
                (l.clone(), p)
            })
            .collect();
        RoomProfiles { profiles }
    }
}

/// Room-profile catalog: room label -> object label -> weight.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RoomProfiles {
    pub profiles: BTreeMap<String, BTreeMap<String, f64>>,
}

impl Default for RoomProfiles {
    fn default() -> Self {
        Self::from_yaml(DEFAULT_PROFILES).expect("bundled profiles are valid")
    }
}

impl RoomProfiles {
    pub fn from_yaml(text: &str) -> Result<Self, CatalogError> {
        let p: Self = serde_yaml::from_str(text)?;
        if p.profiles.is_empty() {
            return Err(CatalogError::Invalid("no profiles".into()));
        }
        Ok(p)
    }

    pub fn load(path: &Path) -> Result<Self, CatalogError> {
        Self::from_yaml(&std::fs::read_to_string(path)?)
    }

    /// Label whose profile has the highest cosine similarity with `feature`;
    /// ties go to the lexicographically smallest label. An all-zero feature
    /// is [`UNKNOWN_ROOM`].
    pub fn classify(&self, feature: &BTreeMap<String, f64>) -> String {
        let fnorm = feature.values().map(|v| v * v).sum::<f64>().sqrt();
        if fnorm <= 0.0 {
            return UNKNOWN_ROOM.to_string();
        }
        let mut best: Option<(&str, f64)> = None;
        for (label, prof) in &self.profiles {
            let pnorm = prof.values().map(|v| v * v).sum::<f64>().sqrt();
            if pnorm <= 0.0 {
                continue;
            }
            let dot: f64 = feature.iter().map(|(k, v)| v * prof.get(k).copied().unwrap_or(0.0)).sum();
            let cos = dot / (fnorm * pnorm);
            if best.is_none_or(|(_, b)| cos > b) {
                best = Some((label, cos));
            }
        }
        match best {
            Some((l, c)) if c > 0.0 => l.to_string(),
            _ => UNKNOWN_ROOM.to_string(),
        }
    }
}

/// Normalized label histogram.
pub fn label_histogram<'a>(labels: impl IntoIterator<Item = &'a str>) -> BTreeMap<String, f64> {
    let mut h: BTreeMap<String, f64> = BTreeMap::new();
    let mut n = 0.0;
    for l in labels {
        *h.entry(l.to_string()).or_default() += 1.0;
        n += 1.0;
    }
    if n > 0.0 {
        for v in h.values_mut() {
            *v /= n;
        }
    }
    h
}
