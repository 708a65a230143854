//! The `reconopt` command line.
//!
//! Exit codes: 0 on success, 2 for bad input or usage, 3 when no
//! configuration can meet the deadline. Output files go to `--out-dir`, else
//! `$RECONOPT_OUT_DIR`, else `./reconopt-out`.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::camselect::{self, build_camera_map, build_visibility, select_keypoints, solve_p2};
use crate::pgm;
use crate::pointcloud::{merge_clouds, read_ply_file, split_points, write_ply, CameraModel, ForegroundMask, PlyFormat};
use crate::quality;
use crate::segmentation::{self, cluster_mask_with, extract_mask, BackgroundModel, ClusterParams, GrayFrame};
use crate::sim::{simulate_stream, Scenario, SimError, SimOutput, TaskStream, TraceRow};

pub const DEFAULT_SEED: u64 = 42;
pub const OUT_DIR_ENV: &str = "RECONOPT_OUT_DIR";
pub const DEFAULT_OUT_DIR: &str = "reconopt-out";

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_INFEASIBLE: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "reconopt", version, about = "Latency/quality optimization for multi-view 3D reconstruction")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Precision, recall and F-score of a reconstruction against a reference.
    Eval(EvalArgs),
    /// Pick the camera subset covering the most points with two views.
    SelectCameras(SelectArgs),
    /// Run the controller on a simulated task stream.
    Simulate(SimulateArgs),
    /// Foreground masks and per-object clusters for a frame sequence.
    Segment(SegmentArgs),
    /// Split a cloud into foreground and background and merge it back.
    Pipeline(PipelineArgs),
}

#[derive(Debug, Args)]
pub struct OutDir {
    /// Output directory [default: $RECONOPT_OUT_DIR or ./reconopt-out]
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

impl OutDir {
    fn resolve(&self) -> PathBuf {
        self.out_dir
            .clone()
            .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
    }
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    pub recon: PathBuf,
    pub truth: PathBuf,
    /// Distance threshold
    #[arg(long, default_value_t = 0.01, value_parser = positive_f64)]
    pub d: f64,
}

#[derive(Debug, Args)]
pub struct SelectArgs {
    pub cloud: PathBuf,
    /// JSON array of cameras
    pub cameras: PathBuf,
    /// Share of points kept as key points (1 keeps all)
    #[arg(long, default_value_t = camselect::DEFAULT_KEYPOINT_FRACTION, value_parser = positive_f64)]
    pub fraction: f64,
    /// Camera count to select
    #[arg(long, conflicts_with = "map", required_unless_present = "map")]
    pub nprime: Option<usize>,
    /// Print the best subset for every camera count
    #[arg(long)]
    pub map: bool,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Scenario JSON
    pub scenario: PathBuf,
    /// Per-task deadline in seconds
    #[arg(long, default_value_t = 10.0, value_parser = positive_f64)]
    pub deadline: f64,
    #[arg(long, default_value_t = 100)]
    pub tasks: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Override the scenario's latency noise
    #[arg(long)]
    pub eta: Option<f64>,
    #[command(flatten)]
    pub out: OutDir,
}

#[derive(Debug, Args)]
pub struct SegmentArgs {
    /// Directory of 8-bit PGM frames, processed in file-name order
    pub frames_dir: PathBuf,
    #[arg(long, default_value_t = segmentation::DEFAULT_K_SIGMA)]
    pub ksigma: f64,
    #[arg(long, default_value_t = segmentation::DEFAULT_K_MAX)]
    pub kmax: usize,
    #[arg(long, default_value_t = segmentation::DEFAULT_LEARNING_RATE)]
    pub learning_rate: f64,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    #[command(flatten)]
    pub out: OutDir,
}

#[derive(Debug, Args)]
pub struct PipelineArgs {
    pub cloud: PathBuf,
    /// Directory holding one `cam_<id>.pgm` mask per camera
    pub masks_dir: PathBuf,
    pub cameras: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub min_views: usize,
    /// Write binary little-endian PLY instead of ASCII
    #[arg(long)]
    pub binary: bool,
    #[command(flatten)]
    pub out: OutDir,
}

fn positive_f64(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(format!("must be positive, got {v}"))
    }
}

enum Failure {
    Input(anyhow::Error),
    Infeasible,
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Input(e)
    }
}

/// Parse `args` (including the program name), run, and return the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        }
    };
    let result = match cli.command {
        Command::Eval(a) => cmd_eval(&a),
        Command::SelectCameras(a) => cmd_select(&a),
        Command::Simulate(a) => cmd_simulate(&a),
        Command::Segment(a) => cmd_segment(&a),
        Command::Pipeline(a) => cmd_pipeline(&a),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(Failure::Input(e)) => {
            eprintln!("error: {e:#}");
            EXIT_INPUT
        }
        Err(Failure::Infeasible) => EXIT_INFEASIBLE,
    }
}

fn print_json<T: Serialize>(value: &T) -> anyhow::Result<()> {
    let mut out = std::io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

fn read_cameras(path: &Path) -> anyhow::Result<Vec<CameraModel>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing cameras from {}", path.display()))
}

fn create_dir(dir: &Path) -> anyhow::Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn cmd_eval(a: &EvalArgs) -> Result<(), Failure> {
    let recon = read_ply_file(&a.recon).with_context(|| format!("reading {}", a.recon.display()))?;
    let truth = read_ply_file(&a.truth).with_context(|| format!("reading {}", a.truth.display()))?;
    let report = quality::fscore(&recon, &truth, a.d).map_err(anyhow::Error::from)?;
    print_json(&report)?;
    Ok(())
}

fn cmd_select(a: &SelectArgs) -> Result<(), Failure> {
    let cloud = read_ply_file(&a.cloud).with_context(|| format!("reading {}", a.cloud.display()))?;
    let cameras = read_cameras(&a.cameras)?;
    let full = build_visibility(&cloud, &cameras).map_err(anyhow::Error::from)?;
    let matrix = if a.fraction >= 1.0 {
        full
    } else {
        select_keypoints(&full, a.fraction, a.seed).map_err(anyhow::Error::from)?
    };
    if a.map {
        print_json(&build_camera_map(&matrix).map_err(anyhow::Error::from)?)?;
    } else {
        let n_prime = a.nprime.expect("clap requires --nprime without --map");
        print_json(&solve_p2(&matrix, n_prime).map_err(anyhow::Error::from)?)?;
    }
    Ok(())
}

/// Per-deadline summary, one field per row of the optimization report.
#[derive(Debug, Serialize)]
pub struct SimSummary {
    pub scenario: String,
    pub deadline: f64,
    pub tasks: usize,
    pub seed: u64,
    pub infeasible: bool,
    pub avg_resolution_scale: f64,
    pub cameras: usize,
    pub avg_processing_time: f64,
    pub avg_fscore: f64,
    pub bg_dense_clouds: usize,
    pub search_steps: usize,
    pub search_done: bool,
}

fn summarize(scenario: &Scenario, a: &SimulateArgs, out: &SimOutput, infeasible: bool) -> SimSummary {
    let n = out.trace.len().max(1) as f64;
    SimSummary {
        scenario: scenario.params.name.clone(),
        deadline: a.deadline,
        tasks: out.trace.len(),
        seed: a.seed,
        infeasible,
        avg_resolution_scale: out.trace.iter().map(|r| r.r).sum::<f64>() / n,
        cameras: out.trace.last().map_or(0, |r| r.n_prime),
        avg_processing_time: out.stats.avg_t,
        avg_fscore: out.stats.avg_q,
        bg_dense_clouds: out.stats.bg_completed,
        search_steps: out.search_steps,
        search_done: out.search_done,
    }
}

fn write_trace(path: &Path, trace: &[TraceRow]) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    if trace.is_empty() {
        w.write_record(["task", "r", "n_prime", "T", "Q", "phase", "bg_updates_so_far"])?;
    }
    for row in trace {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

fn cmd_simulate(a: &SimulateArgs) -> Result<(), Failure> {
    let text = fs::read_to_string(&a.scenario).with_context(|| format!("reading {}", a.scenario.display()))?;
    let mut params: crate::sim::ScenarioParams =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", a.scenario.display()))?;
    if let Some(eta) = a.eta {
        params.eta = eta;
    }
    let scenario = Scenario::from_params(params).map_err(anyhow::Error::from)?;
    if a.tasks == 0 {
        return Err(Failure::Input(anyhow!("--tasks must be at least 1")));
    }
    let stream = TaskStream { tasks: a.tasks, deadline: a.deadline, seed: a.seed };
    let (out, infeasible) = match simulate_stream(&scenario.model, &scenario.camera_map, &stream) {
        Ok(out) => (out, false),
        Err(SimError::Infeasible { partial, .. }) => (*partial, true),
        Err(e) => return Err(Failure::Input(e.into())),
    };
    let dir = a.out.resolve();
    create_dir(&dir)?;
    write_trace(&dir.join("trace.csv"), &out.trace)?;
    let summary = summarize(&scenario, a, &out, infeasible);
    let json = serde_json::to_string_pretty(&summary).map_err(anyhow::Error::from)?;
    fs::write(dir.join("summary.json"), format!("{json}\n")).context("writing summary.json")?;
    print_json(&summary)?;
    if infeasible {
        eprintln!("error: no configuration meets the {} s deadline", a.deadline);
        return Err(Failure::Infeasible);
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct FrameReport {
    frame: String,
    mask: String,
    foreground_pixels: usize,
    clusters: Vec<String>,
}

fn cmd_segment(a: &SegmentArgs) -> Result<(), Failure> {
    if !(a.ksigma >= 0.0) {
        return Err(Failure::Input(anyhow!("--ksigma must be non-negative")));
    }
    let mut paths: Vec<PathBuf> = fs::read_dir(&a.frames_dir)
        .with_context(|| format!("listing {}", a.frames_dir.display()))?
        .map(|e| e.map(|e| e.path()))
        .collect::<Result<_, _>>()
        .context("listing frames")?;
    paths.retain(|p| p.extension().is_some_and(|e| e.eq_ignore_ascii_case("pgm")));
    paths.sort();
    if paths.len() < 2 {
        return Err(anyhow!("need at least 2 PGM frames in {}, found {}", a.frames_dir.display(), paths.len()).into());
    }
    let frames = paths
        .iter()
        .map(|p| {
            let img = pgm::read(p).with_context(|| format!("reading {}", p.display()))?;
            Ok(GrayFrame::new(img.width, img.height, img.data)?)
        })
        .collect::<anyhow::Result<Vec<_>>>()?;
    let (w, h) = (frames[0].width(), frames[0].height());
    if let Some((p, f)) = paths.iter().zip(&frames).find(|(_, f)| (f.width(), f.height()) != (w, h)) {
        return Err(anyhow!("{} is {}x{}, first frame is {w}x{h}", p.display(), f.width(), f.height()).into());
    }

    let dir = a.out.resolve();
    create_dir(&dir)?;
    let params = ClusterParams { k_max: a.kmax, seed: a.seed, ..ClusterParams::default() };
    let mut model = BackgroundModel::empty();
    model.update(&frames[0], a.learning_rate).map_err(anyhow::Error::from)?;
    let mut reports = Vec::with_capacity(frames.len());
    for (i, (path, frame)) in paths.iter().zip(&frames).enumerate() {
        let mask = if i == 0 {
            ForegroundMask::empty(0, w, h)
        } else {
            let m = extract_mask(&model, frame, a.ksigma).map_err(anyhow::Error::from)?;
            model.update(frame, a.learning_rate).map_err(anyhow::Error::from)?;
            m
        };
        let name = format!("mask_{i:04}.pgm");
        pgm::write(dir.join(&name), w, h, &mask.to_bytes()).map_err(anyhow::Error::from)?;
        let mut clusters = Vec::new();
        if mask.count() > 0 {
            for (c, cm) in cluster_mask_with(&mask, &params).map_err(anyhow::Error::from)?.iter().enumerate() {
                let cname = format!("mask_{i:04}_c{c}.pgm");
                pgm::write(dir.join(&cname), w, h, &cm.to_bytes()).map_err(anyhow::Error::from)?;
                clusters.push(cname);
            }
        }
        reports.push(FrameReport {
            frame: path.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default(),
            mask: name,
            foreground_pixels: mask.count(),
            clusters,
        });
    }
    print_json(&reports)?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct PipelineReport {
    input_points: usize,
    foreground_points: usize,
    background_points: usize,
    merged_points: usize,
}

fn cmd_pipeline(a: &PipelineArgs) -> Result<(), Failure> {
    let cloud = read_ply_file(&a.cloud).with_context(|| format!("reading {}", a.cloud.display()))?;
    let cameras = read_cameras(&a.cameras)?;
    let masks = cameras
        .iter()
        .map(|cam| {
            let path = a.masks_dir.join(format!("cam_{}.pgm", cam.id));
            let img = pgm::read(&path).with_context(|| format!("reading {}", path.display()))?;
            Ok(ForegroundMask::from_bytes(cam.id, img.width, img.height, &img.data))
        })
        .collect::<anyhow::Result<Vec<_>>>()?;
    let (fg, bg) = split_points(&cloud, &masks, &cameras, a.min_views).map_err(anyhow::Error::from)?;
    let merged = merge_clouds(&fg, &bg);
    let format = if a.binary { PlyFormat::BinaryLittleEndian } else { PlyFormat::Ascii };
    let dir = a.out.resolve();
    create_dir(&dir)?;
    for (name, c) in [("fg.ply", &fg), ("bg.ply", &bg), ("merged.ply", &merged)] {
        fs::write(dir.join(name), write_ply(c, format)).with_context(|| format!("writing {name}"))?;
    }
    print_json(&PipelineReport {
        input_points: cloud.len(),
        foreground_points: fg.len(),
        background_points: bg.len(),
        merged_points: merged.len(),
    })?;
    Ok(())
}
