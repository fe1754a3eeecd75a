//! The four subcommands.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use semx_core::completion::{consistency_check, CompletionSampler, LlmAdapter, PriorSampler, Violation};
use semx_core::eval::{
    curve_csv, graph_edit_distance, load_snapshots, metrics_curve, object_f1, resample, room_prediction_success, MetricPoint,
    RoomPrediction, BUDGET_FRACTIONS,
};
use semx_core::planner::run_episode;
use semx_core::scene_graph::cross_section_raster;
use semx_core::world::generate_world;
use semx_core::SceneGraph;

use crate::config::{runtime, CliError, RunConfig, SamplerKind};

fn sampler(cfg: &RunConfig, kind: SamplerKind) -> Result<Box<dyn CompletionSampler>, CliError> {
    let prior = PriorSampler::new(cfg.world.room_catalog.clone());
    Ok(match kind {
        SamplerKind::Prior => Box::new(prior),
        SamplerKind::Adapter => {
            Box::new(LlmAdapter::http(cfg.adapter.clone(), prior).map_err(|e| CliError::Config(format!("adapter: {e}")))?)
        }
    })
}

fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|e| runtime(format!("{}: {e}", path.display())))
}

fn mkdir(path: &Path) -> Result<(), CliError> {
    fs::create_dir_all(path).map_err(|e| runtime(format!("{}: {e}", path.display())))
}

fn read_graph(path: &Path) -> Result<SceneGraph, CliError> {
    let text = fs::read_to_string(path).map_err(|e| runtime(format!("{}: {e}", path.display())))?;
    SceneGraph::from_yaml(&text).map_err(|e| runtime(format!("parse error in {}: {e}", path.display())))
}

#[derive(Serialize)]
struct Summary<'a> {
    policy: &'a str,
    sampler: &'a str,
    steps: usize,
    traveled: f64,
    elapsed: f64,
    termination: String,
    final_f1: f64,
    final_ged: u64,
}

pub fn explore(cfg: &RunConfig) -> Result<(), CliError> {
    let world = generate_world(&cfg.world).map_err(runtime)?;
    let s = sampler(cfg, cfg.sampler)?;
    let log = run_episode(&world, &cfg.episode, s.as_ref());
    let out = &cfg.out;
    mkdir(out)?;
    log.write(out).map_err(|e| runtime(format!("{}: {e}", out.display())))?;
    write(&out.join("config.yaml"), serde_yaml::to_string(cfg).map_err(runtime)?)?;

    let snaps = load_snapshots(out).map_err(runtime)?;
    let curve = metrics_curve(&snaps, &world.truth_graph, &cfg.eval);
    write(&out.join("metrics.csv"), curve_csv(&curve))?;
    let f1 = object_f1(log.final_graph(), &world.truth_graph, &cfg.eval).f1;
    let ged = graph_edit_distance(log.final_graph(), &world.truth_graph, &cfg.eval).cost;
    let summary = Summary {
        policy: match cfg.episode.policy {
            semx_core::planner::Policy::Semantic => "semantic",
            semx_core::planner::Policy::Frontier => "frontier",
        },
        sampler: s.name(),
        steps: log.steps.len(),
        traveled: log.traveled(),
        elapsed: log.elapsed(),
        termination: format!("{:?}", log.termination),
        final_f1: f1,
        final_ged: ged,
    };
    let json = serde_json::to_string_pretty(&summary).map_err(runtime)?;
    write(&out.join("summary.json"), format!("{json}\n"))?;
    println!("{json}");
    Ok(())
}

fn budget_csv(curve: &[MetricPoint], total: f64, key: &str, f: impl Fn(&MetricPoint) -> f64) -> String {
    let mut s = String::new();
    for (frac, p) in resample(curve, &BUDGET_FRACTIONS, total, f) {
        s.push_str(&format!("{key},{frac},{},{:.6},{}\n", p.step, p.f1, p.ged));
    }
    s
}

#[derive(Serialize)]
struct StepRooms {
    step: usize,
    predictions: Vec<RoomPrediction>,
}

fn ensemble_dirs(log_dir: &Path) -> Vec<(usize, PathBuf)> {
    let mut out: Vec<(usize, PathBuf)> = fs::read_dir(log_dir.join("ensemble"))
        .into_iter()
        .flatten()
        .flatten()
        .filter_map(|e| {
            let name = e.file_name().into_string().ok()?;
            let k = name.strip_prefix("step_")?.parse().ok()?;
            Some((k, e.path()))
        })
        .collect();
    out.sort();
    out
}

pub fn evaluate(cfg: &RunConfig, log_dir: &Path, truth: Option<&Path>, out: Option<&Path>) -> Result<(), CliError> {
    let truth_path = truth.map(Path::to_path_buf).unwrap_or_else(|| log_dir.join("truth.yaml"));
    let truth = read_graph(&truth_path)?;
    let snaps = load_snapshots(log_dir).map_err(runtime)?;
    let curve = metrics_curve(&snaps, &truth, &cfg.eval);
    let out = out.unwrap_or(log_dir);
    mkdir(out)?;
    write(&out.join("metrics.csv"), curve_csv(&curve))?;

    let last = curve.last().expect("non-empty log");
    let mut budget = String::from("axis,fraction,step,f1,ged\n");
    budget.push_str(&budget_csv(&curve, last.traveled, "traveled", |p| p.traveled));
    budget.push_str(&budget_csv(&curve, last.elapsed, "elapsed", |p| p.elapsed));
    write(&out.join("budget.csv"), budget)?;

    let mut rooms = Vec::new();
    for (step, dir) in ensemble_dirs(log_dir) {
        let mut files: Vec<PathBuf> = fs::read_dir(&dir).map_err(runtime)?.flatten().map(|e| e.path()).collect();
        files.sort();
        let ensemble = files.iter().map(|p| read_graph(p)).collect::<Result<Vec<_>, _>>()?;
        rooms.push(StepRooms { step, predictions: room_prediction_success(&ensemble, &truth, &cfg.eval) });
    }
    let json = serde_json::to_string_pretty(&rooms).map_err(runtime)?;
    write(&out.join("rooms.json"), format!("{json}\n"))?;
    println!("steps {} final_f1 {:.4} final_ged {}", curve.len(), last.f1, last.ged);
    Ok(())
}

#[derive(Serialize)]
struct Report {
    sample: usize,
    consistent: bool,
    violations: Vec<Violation>,
}

pub fn complete(cfg: &RunConfig, graph: &Path, m: usize, seed: u64, kind: SamplerKind) -> Result<(), CliError> {
    let current = read_graph(graph)?;
    let s = sampler(cfg, kind)?;
    let samples = s.sample(&current, m, seed);
    mkdir(&cfg.out)?;
    let mut reports = Vec::new();
    for (i, g) in samples.iter().enumerate() {
        write(&cfg.out.join(format!("sample_{i}.yaml")), g.to_yaml())?;
        let violations = consistency_check(&current, g).err().unwrap_or_default();
        reports.push(Report { sample: i, consistent: violations.is_empty(), violations });
    }
    let json = serde_json::to_string_pretty(&reports).map_err(runtime)?;
    write(&cfg.out.join("report.json"), format!("{json}\n"))?;
    println!("{} samples, {} consistent", reports.len(), reports.iter().filter(|r| r.consistent).count());
    Ok(())
}

pub fn render(cfg: &RunConfig, graph: &Path, bands: &[(f64, f64)], cell: f64) -> Result<(), CliError> {
    let g = read_graph(graph)?;
    mkdir(&cfg.out)?;
    for &(lo, hi) in bands {
        let cs = cross_section_raster(&g, lo, hi, cell).map_err(|e| CliError::Config(e.to_string()))?;
        let path = cfg.out.join(format!("band_{lo:.2}_{hi:.2}.pgm"));
        write(&path, cs.image.to_p5())?;
        println!("{}", path.display());
    }
    Ok(())
}
