//! `semx`: explore synthetic worlds, score the resulting maps, sample scene
//! completions and slice graphs into rasters.
//!
//! Exit codes: 0 success, 2 configuration error, 3 runtime error.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use semx_core::planner::{HighLevel, Policy};
use semx_core::scene_graph::DEFAULT_BANDS;

use config::{CliError, RunConfig, SamplerKind};

#[derive(Parser)]
#[command(name = "semx", version, about = "Active semantic mapping over scene graphs")]
struct Cli {
    /// YAML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for world generation and the episode.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum PolicyArg {
    Semantic,
    Frontier,
}

#[derive(Subcommand)]
enum Command {
    /// Run one exploration episode and write its log.
    Explore {
        #[arg(long, value_enum)]
        policy: Option<PolicyArg>,
        /// Path-length budget in meters.
        #[arg(long)]
        budget: Option<f64>,
        #[arg(long, value_enum)]
        sampler: Option<SamplerKind>,
        /// World spec YAML; replaces the config's inline world.
        #[arg(long)]
        world: Option<PathBuf>,
        /// Perturb observed nodes too when scoring viewpoints.
        #[arg(long)]
        perturb_observed: bool,
        /// Route through the scene graph's rooms before grid planning.
        #[arg(long)]
        room_planner: bool,
    },
    /// Metric curves and room predictions for an episode log.
    Evaluate {
        log_dir: PathBuf,
        /// Ground-truth graph; defaults to the log's truth.yaml.
        #[arg(long)]
        truth: Option<PathBuf>,
    },
    /// Sample completions of a graph.
    Complete {
        graph: PathBuf,
        #[arg(long, default_value_t = 4)]
        m: usize,
        #[arg(long, value_enum, default_value = "prior")]
        sampler: SamplerKind,
    },
    /// Cross-section rasters of a graph.
    Render {
        graph: PathBuf,
        /// Height bands as `lo:hi`, comma separated.
        #[arg(long, value_parser = parse_bands)]
        bands: Option<Bands>,
        #[arg(long, default_value_t = 0.1)]
        cell: f64,
    },
}

/// One flag value holding every band; a bare `Vec` would make clap expect
/// repeated values.
#[derive(Clone)]
struct Bands(Vec<(f64, f64)>);

fn parse_bands(s: &str) -> Result<Bands, String> {
    s.split(',')
        .map(|b| {
            let (lo, hi) = b.split_once(':').ok_or_else(|| format!("band `{b}` is not lo:hi"))?;
            let lo: f64 = lo.trim().parse().map_err(|e| format!("{lo}: {e}"))?;
            let hi: f64 = hi.trim().parse().map_err(|e| format!("{hi}: {e}"))?;
            Ok((lo, hi))
        })
        .collect::<Result<_, _>>()
        .map(Bands)
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut cfg = RunConfig::load(cli.config.as_deref())?;
    if let Some(s) = cli.seed {
        cfg.world.seed = s;
        cfg.episode.seed = s;
    }
    let out_flag = cli.out.clone();
    if let Some(o) = &cli.out {
        cfg.out = o.clone();
    }
    match cli.command {
        Command::Explore { policy, budget, sampler, world, perturb_observed, room_planner } => {
            if perturb_observed {
                cfg.episode.gain.perturb.perturb_observed = true;
            }
            if room_planner {
                cfg.episode.high_level = HighLevel::SceneGraph;
            }
            if let Some(p) = policy {
                cfg.episode.policy = match p {
                    PolicyArg::Semantic => Policy::Semantic,
                    PolicyArg::Frontier => Policy::Frontier,
                };
            }
            if let Some(b) = budget {
                cfg.episode.l_max = b;
            }
            if let Some(s) = sampler {
                cfg.sampler = s;
            }
            if world.is_some() {
                cfg.world_file = world;
            }
            let cfg = cfg.finish()?;
            commands::explore(&cfg)
        }
        Command::Evaluate { log_dir, truth } => {
            let cfg = cfg.finish()?;
            commands::evaluate(&cfg, &log_dir, truth.as_deref(), out_flag.as_deref())
        }
        Command::Complete { graph, m, sampler } => {
            let cfg = cfg.finish()?;
            commands::complete(&cfg, &graph, m, cli.seed.unwrap_or(0), sampler)
        }
        Command::Render { graph, bands, cell } => {
            if !(cell > 0.0) {
                return Err(CliError::Config(format!("cell must be positive, got {cell}")));
            }
            let cfg = cfg.finish()?;
            let bands = bands.map_or_else(|| DEFAULT_BANDS.to_vec(), |b| b.0);
            commands::render(&cfg, &graph, &bands, cell)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
