//! Run configuration: one YAML file whose fields mirror the library types,
//! with command-line flags layered on top.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use semx_core::catalog::RoomCatalog;
use semx_core::completion::AdapterConfig;
use semx_core::eval::MatchSpec;
use semx_core::planner::EpisodeConfig;
use semx_core::world::WorldSpec;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
}

pub fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum SamplerKind {
    Prior,
    Adapter,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Inline world description; `world_file` replaces it when set.
    pub world: WorldSpec,
    pub world_file: Option<PathBuf>,
    /// Room catalog for both the generator and the prior sampler.
    pub catalog: Option<PathBuf>,
    pub episode: EpisodeConfig,
    pub sampler: SamplerKind,
    pub adapter: AdapterConfig,
    pub eval: MatchSpec,
    pub out: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            world: WorldSpec::default(),
            world_file: None,
            catalog: None,
            episode: EpisodeConfig::default(),
            sampler: SamplerKind::Prior,
            adapter: AdapterConfig::default(),
            eval: MatchSpec::default(),
            out: PathBuf::from("out"),
        }
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else { return Ok(Self::default()) };
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        serde_yaml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    /// Resolve file references and check invariants.
    pub fn finish(mut self) -> Result<Self, CliError> {
        if let Some(p) = &self.world_file {
            let seed = self.world.seed;
            self.world = WorldSpec::load(p).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
            self.world.seed = seed;
        }
        if let Some(p) = &self.catalog {
            self.world.room_catalog = RoomCatalog::load(p).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
        }
        self.world.validate().map_err(|e| CliError::Config(e.to_string()))?;
        self.episode.validate().map_err(CliError::Config)?;
        let m = &self.eval;
        if !(m.object_dist > 0.0 && m.room_dist > 0.0 && m.room_pred_dist > 0.0 && m.consensus > 0.0 && m.consensus <= 1.0) {
            return Err(CliError::Config("eval distances must be positive and consensus in (0, 1]".into()));
        }
        Ok(self)
    }
}
