//! The `dynrecon` command line.
//!
//! ```text
//! dynrecon run    --input CUES --output OUT [--config run.toml] [overrides...]
//! dynrecon eval   --est OUT --gt DATASET --output DIR [--align scale|scale_shift]
//! dynrecon synth  --spec synth.json --output DATASET [--corruption c.json] [noise flags...]
//! dynrecon export --input OUT --format ply|ply-ascii|xyz|json --output DIR
//! ```
//!
//! Exit codes:
//!
//! | code | meaning |
//! |------|---------|
//! | 0 | success |
//! | 1 | runtime error not listed below |
//! | 2 | usage error (bad flags, invalid configuration) |
//! | 3 | missing input file or directory |
//! | 4 | malformed input (header, dimensions, parse errors) |
//! | 5 | too few static tracklets to initialize the cameras |
//! | 6 | an optimization produced a non-finite loss |

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::RunConfig;
use crate::cues::{classify_tracklets, load_bundle, load_bundle_with_report};
use crate::error::{Error, Result};
use crate::evalkit::{self, AlignMode};
use crate::geometry::{tum, Intrinsics, Trajectory};
use crate::pipeline::{self, Diagnostics, Mode, NewFrameInit};
use crate::ply::{self, Encoding, PointCloud};
use crate::synth::{self, CorruptionSpec, SceneSpec};

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_MISSING_FILE: i32 = 3;
pub const EXIT_BAD_INPUT: i32 = 4;
pub const EXIT_INSUFFICIENT_TRACKS: i32 = 5;
pub const EXIT_NON_FINITE: i32 = 6;

#[derive(Debug, Parser)]
#[command(name = "dynrecon", version, about = "Camera, static and dynamic geometry from depth, masks and tracklets")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Reconstruct a scene from a cue directory.
    Run(RunArgs),
    /// Score a solution against ground truth and write metrics.json.
    Eval(EvalArgs),
    /// Generate a synthetic cue directory with ground truth.
    Synth(SynthArgs),
    /// Convert the point clouds of a solution to another format.
    Export(ExportArgs),
}

/// Each flag overrides the config-file key named in its help.
#[derive(Debug, Args)]
pub struct RunArgs {
    /// Cue directory [input]
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Output directory [output]
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// TOML run configuration
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Known intrinsics as fx,fy,cx,cy; freezes the focal lengths [known_intrinsics]
    #[arg(long, value_parser = parse_intrinsics)]
    pub intrinsics: Option<[f64; 4]>,
    /// [pipeline.mode]
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    /// Worker threads; 1 gives bit-reproducible output [threads]
    #[arg(long)]
    pub threads: Option<usize>,
    /// [seed]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Keep the tracklet labels of the input instead of relabeling from masks [classify = false]
    #[arg(long)]
    pub no_classify: bool,
    /// Mask dilation used when relabeling tracklets [dilation_px]
    #[arg(long)]
    pub dilation: Option<usize>,
    /// Write per-stage loss CSVs under OUTPUT/logs [loss_logs]
    #[arg(long)]
    pub loss_logs: bool,
    /// [pipeline.freeze_focal]
    #[arg(long)]
    pub freeze_focal: bool,
    /// [pipeline.window]
    #[arg(long)]
    pub window: Option<usize>,
    /// [pipeline.new_frame_init]
    #[arg(long, value_enum)]
    pub new_frame_init: Option<InitArg>,
    /// [pipeline.min_static_tracks]
    #[arg(long)]
    pub min_static_tracks: Option<usize>,
    /// [pipeline.knn_k]
    #[arg(long)]
    pub knn_k: Option<usize>,
    /// [pipeline.grad_threshold]
    #[arg(long)]
    pub grad_threshold: Option<f64>,
    /// [pipeline.densify_neighbors]
    #[arg(long)]
    pub densify_neighbors: Option<usize>,
    /// [pipeline.stage2_outlier_percentile]
    #[arg(long)]
    pub stage2_percentile: Option<f64>,
    /// [pipeline.stage3_mad_factor]
    #[arg(long)]
    pub stage3_mad_factor: Option<f64>,
    /// [pipeline.stage1.max_iters]
    #[arg(long)]
    pub stage1_iters: Option<usize>,
    /// [pipeline.stage1.lr_init]
    #[arg(long)]
    pub stage1_lr: Option<f64>,
    /// [pipeline.stage2.max_iters]
    #[arg(long)]
    pub stage2_iters: Option<usize>,
    /// [pipeline.stage2.lr_init]
    #[arg(long)]
    pub stage2_lr: Option<f64>,
    /// [pipeline.stage3.max_iters]
    #[arg(long)]
    pub stage3_iters: Option<usize>,
    /// [pipeline.stage3.lr_init]
    #[arg(long)]
    pub stage3_lr: Option<f64>,
    /// [pipeline.weights.w_smooth]
    #[arg(long)]
    pub w_smooth: Option<f64>,
    /// [pipeline.weights.w_arap]
    #[arg(long)]
    pub w_arap: Option<f64>,
    /// [pipeline.weights.w_cam]
    #[arg(long)]
    pub w_cam: Option<f64>,
    /// Huber threshold in pixels for reprojection terms [pipeline.weights.huber_px]
    #[arg(long)]
    pub huber: Option<f64>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Solution directory written by `run`
    #[arg(long)]
    pub est: PathBuf,
    /// Dataset directory with masks/ and gt/
    #[arg(long)]
    pub gt: PathBuf,
    /// Directory for metrics.json
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long, value_enum, default_value = "scale_shift")]
    pub align: AlignArg,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Scene description (synth.json)
    #[arg(long)]
    pub spec: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    /// Corruption seed; defaults to the seed in the scene file
    #[arg(long)]
    pub seed: Option<u64>,
    /// JSON corruption spec; the flags below override its fields
    #[arg(long)]
    pub corruption: Option<PathBuf>,
    #[arg(long)]
    pub depth_scale_jitter: Option<f64>,
    #[arg(long)]
    pub depth_shift_jitter: Option<f64>,
    #[arg(long)]
    pub depth_noise: Option<f64>,
    #[arg(long)]
    pub track_noise: Option<f64>,
    #[arg(long)]
    pub track_dropout: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub mask_erode_dilate: Option<i32>,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    /// Solution directory written by `run`
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum)]
    pub format: Format,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    #[value(name = "full")]
    Full,
    #[value(name = "stage1_only", alias = "stage1-only")]
    Stage1Only,
    #[value(name = "stage2_only", alias = "stage2-only")]
    Stage2Only,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Full => Mode::Full,
            ModeArg::Stage1Only => Mode::Stage1Only,
            ModeArg::Stage2Only => Mode::Stage2Only,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InitArg {
    #[value(name = "predecessor")]
    Predecessor,
    #[value(name = "constant_velocity", alias = "constant-velocity")]
    ConstantVelocity,
}

impl From<InitArg> for NewFrameInit {
    fn from(m: InitArg) -> Self {
        match m {
            InitArg::Predecessor => NewFrameInit::Predecessor,
            InitArg::ConstantVelocity => NewFrameInit::ConstantVelocity,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AlignArg {
    #[value(name = "scale")]
    Scale,
    #[value(name = "scale_shift", alias = "scale-shift")]
    ScaleShift,
}

impl From<AlignArg> for AlignMode {
    fn from(m: AlignArg) -> Self {
        match m {
            AlignArg::Scale => AlignMode::Scale,
            AlignArg::ScaleShift => AlignMode::ScaleShift,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    /// Binary little-endian PLY
    Ply,
    /// ASCII PLY
    PlyAscii,
    /// One `x y z r g b` line per point
    Xyz,
    /// `{"points": [[x,y,z],..], "colors": [[r,g,b],..]}`
    Json,
}

fn parse_intrinsics(s: &str) -> std::result::Result<[f64; 4], String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("`{p}`: {e}")))
        .collect::<std::result::Result<_, _>>()?;
    v.try_into().map_err(|v: Vec<f64>| format!("expected fx,fy,cx,cy, got {} values", v.len()))
}

/// Exit code for a failed command.
pub fn exit_code(err: &Error) -> i32 {
    match err.root() {
        Error::MissingFile { .. } => EXIT_MISSING_FILE,
        Error::CorruptHeader { .. }
        | Error::InconsistentDimensions { .. }
        | Error::Parse { .. }
        | Error::DimensionMismatch(_)
        | Error::LengthMismatch { .. } => EXIT_BAD_INPUT,
        Error::InsufficientStaticTracks { .. } => EXIT_INSUFFICIENT_TRACKS,
        Error::NonFiniteLoss { .. } => EXIT_NON_FINITE,
        Error::InvalidConfig(_) => EXIT_USAGE,
        _ => EXIT_RUNTIME,
    }
}

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit code; messages go to stdout and stderr.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn main() -> i32 {
    main_with(std::env::args_os())
}

pub fn execute(command: Command) -> Result<()> {
    match command {
        Command::Run(a) => cmd_run(&a),
        Command::Eval(a) => cmd_eval(&a).map(|_| ()),
        Command::Synth(a) => cmd_synth(&a),
        Command::Export(a) => cmd_export(&a),
    }
}

/// Config file (if any) with the flags of `a` applied on top.
pub fn run_config(a: &RunArgs) -> Result<RunConfig> {
    let mut c = match &a.config {
        Some(path) => RunConfig::read(path)?,
        None => RunConfig::default(),
    };
    fn set<T: Clone>(dst: &mut T, v: &Option<T>) {
        if let Some(v) = v {
            *dst = v.clone();
        }
    }
    if a.input.is_some() {
        c.input = a.input.clone();
    }
    if a.output.is_some() {
        c.output = a.output.clone();
    }
    if a.intrinsics.is_some() {
        c.known_intrinsics = a.intrinsics;
    }
    if a.threads.is_some() {
        c.threads = a.threads;
    }
    set(&mut c.seed, &a.seed);
    set(&mut c.dilation_px, &a.dilation);
    c.classify &= !a.no_classify;
    c.loss_logs |= a.loss_logs;
    let p = &mut c.pipeline;
    set(&mut p.mode, &a.mode.map(Mode::from));
    set(&mut p.new_frame_init, &a.new_frame_init.map(NewFrameInit::from));
    p.freeze_focal |= a.freeze_focal;
    set(&mut p.window, &a.window);
    set(&mut p.min_static_tracks, &a.min_static_tracks);
    set(&mut p.knn_k, &a.knn_k);
    set(&mut p.grad_threshold, &a.grad_threshold);
    set(&mut p.densify_neighbors, &a.densify_neighbors);
    set(&mut p.stage2_outlier_percentile, &a.stage2_percentile);
    set(&mut p.stage3_mad_factor, &a.stage3_mad_factor);
    set(&mut p.stage1.max_iters, &a.stage1_iters);
    set(&mut p.stage1.lr_init, &a.stage1_lr);
    set(&mut p.stage2.max_iters, &a.stage2_iters);
    set(&mut p.stage2.lr_init, &a.stage2_lr);
    set(&mut p.stage3.max_iters, &a.stage3_iters);
    set(&mut p.stage3.lr_init, &a.stage3_lr);
    set(&mut p.weights.w_smooth, &a.w_smooth);
    set(&mut p.weights.w_arap, &a.w_arap);
    set(&mut p.weights.w_cam, &a.w_cam);
    if a.huber.is_some() {
        p.weights.huber_px = a.huber;
    }
    Ok(c)
}

pub fn cmd_run(a: &RunArgs) -> Result<()> {
    let cfg = run_config(a)?;
    cfg.validate()?;
    run_with_config(&cfg)
}

/// Loads the cues, runs the pipeline and writes the solution. On failure
/// `diagnostics.json` is still written, naming the failed stage.
pub fn run_with_config(cfg: &RunConfig) -> Result<()> {
    cfg.validate()?;
    let (input, output) = (cfg.input.as_deref().unwrap(), cfg.output.as_deref().unwrap());
    let (mut bundle, report) = load_bundle_with_report(input)?;
    if report.out_of_bounds_samples > 0 || report.dropped_tracklets > 0 {
        log::warn!(
            "{}: {} track samples outside the image, {} tracklets dropped",
            input.display(),
            report.out_of_bounds_samples,
            report.dropped_tracklets
        );
    }
    bundle.intrinsics = cfg.intrinsics(&bundle.intrinsics);
    if cfg.classify {
        bundle.tracklets = classify_tracklets(&bundle.tracklets, &bundle.masks, cfg.dilation_px)?;
    }
    let pcfg = cfg.effective_pipeline();
    if let Some(dir) = &pcfg.loss_log_dir {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut diag = Diagnostics { config: Some(serde_json::to_value(cfg).expect("config serializes")), ..Default::default() };

    let result = match cfg.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?
            .install(|| pipeline::run_pipeline_with(&bundle, &pcfg, &mut diag)),
        None => pipeline::run_pipeline_with(&bundle, &pcfg, &mut diag),
    };
    match result {
        Ok(solution) => {
            pipeline::write_solution(output, &solution)?;
            log::info!(
                "{} frames, {} static points, {} dynamic tracks, mean residual {:.3e} px, {:.1} s",
                solution.trajectory.len(),
                solution.static_points.len(),
                solution.dynamic.len(),
                solution.diagnostics.final_mean_residual_px,
                solution.diagnostics.wall_seconds
            );
            Ok(())
        }
        Err(e) => {
            pipeline::write_diagnostics(output, &diag)?;
            Err(e)
        }
    }
}

/// Reads the trajectory, intrinsics and fused depth written by `run`.
pub fn read_solution(dir: &Path) -> Result<(Trajectory, Vec<crate::cues::DepthFrame>)> {
    let poses = tum::read(&dir.join("trajectory.tum"))?;
    let kpath = dir.join("intrinsics.json");
    let text = std::fs::read_to_string(&kpath).map_err(|e| Error::io(&kpath, e))?;
    let k: Intrinsics = serde_json::from_str(&text).map_err(|e| Error::Parse { path: kpath.clone(), reason: e.to_string() })?;
    let (depth, _) = crate::cues::read_depth_dir(&dir.join("fused_depth"))?;
    Ok((Trajectory::new(poses, k), depth))
}

pub fn cmd_eval(a: &EvalArgs) -> Result<evalkit::MetricsReport> {
    let (est, est_depth) = read_solution(&a.est)?;
    let gt = synth::read_ground_truth(&a.gt)?;
    let masks = load_bundle(&a.gt)?.masks;
    let report = evalkit::evaluate(&est, &est_depth, &gt.trajectory, &gt.depth, &masks, a.align.into())?;
    std::fs::create_dir_all(&a.output).map_err(|e| Error::io(&a.output, e))?;
    let path = a.output.join("metrics.json");
    let text = serde_json::to_string_pretty(&report).expect("metrics serialize");
    std::fs::write(&path, &text).map_err(|e| Error::io(&path, e))?;
    println!("{text}");
    Ok(report)
}

pub fn cmd_synth(a: &SynthArgs) -> Result<()> {
    let spec = SceneSpec::read(&a.spec)?;
    let mut c = match &a.corruption {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            serde_json::from_str::<CorruptionSpec>(&text).map_err(|e| Error::Parse { path: path.clone(), reason: e.to_string() })?
        }
        None => CorruptionSpec::default(),
    };
    for (dst, v) in [
        (&mut c.depth_scale_jitter_sigma, a.depth_scale_jitter),
        (&mut c.depth_shift_jitter_sigma, a.depth_shift_jitter),
        (&mut c.depth_pixel_noise_sigma, a.depth_noise),
        (&mut c.track_noise_sigma_px, a.track_noise),
        (&mut c.track_dropout_rate, a.track_dropout),
    ] {
        if let Some(v) = v {
            *dst = v;
        }
    }
    if let Some(v) = a.mask_erode_dilate {
        c.mask_erode_dilate_px = v;
    }
    c.validate()?;
    let (clean, gt) = synth::generate(&spec)?;
    let seed = a.seed.unwrap_or(spec.seed);
    let (bundle, record) = synth::corrupt(&clean, &c, seed)?;
    synth::write_synth(&a.output, Some(&spec), &bundle, &gt)?;
    if c != CorruptionSpec::default() {
        let path = a.output.join("corruption.json");
        let value = serde_json::json!({ "seed": seed, "spec": c, "record": record });
        let text = serde_json::to_string_pretty(&value).expect("corruption serializes");
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    }
    log::info!("{} frames, {} tracklets written to {}", bundle.frame_count(), bundle.tracklets.len(), a.output.display());
    Ok(())
}

/// `static.ply` followed by `dynamic_*.ply` in frame order.
fn solution_clouds(dir: &Path) -> Result<Vec<PathBuf>> {
    let stat = dir.join("static.ply");
    if !stat.is_file() {
        return Err(Error::MissingFile { path: stat });
    }
    let mut dynamic: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with("dynamic_") && n.ends_with(".ply"))
        })
        .collect();
    dynamic.sort();
    Ok(std::iter::once(stat).chain(dynamic).collect())
}

pub fn encode_cloud(cloud: &PointCloud, format: Format) -> Vec<u8> {
    match format {
        Format::Ply => ply::encode(cloud, Encoding::BinaryLittleEndian),
        Format::PlyAscii => ply::encode(cloud, Encoding::Ascii),
        Format::Xyz => {
            let mut s = String::new();
            for (p, c) in cloud.points.iter().zip(&cloud.colors) {
                s.push_str(&format!("{} {} {} {} {} {}\n", p[0], p[1], p[2], c[0], c[1], c[2]));
            }
            s.into_bytes()
        }
        Format::Json => {
            let v = serde_json::json!({ "points": cloud.points, "colors": cloud.colors });
            serde_json::to_vec(&v).expect("cloud serializes")
        }
    }
}

fn extension(format: Format) -> &'static str {
    match format {
        Format::Ply | Format::PlyAscii => "ply",
        Format::Xyz => "xyz",
        Format::Json => "json",
    }
}

pub fn cmd_export(a: &ExportArgs) -> Result<()> {
    let clouds = solution_clouds(&a.input)?;
    std::fs::create_dir_all(&a.output).map_err(|e| Error::io(&a.output, e))?;
    for src in &clouds {
        let cloud = ply::read(src)?;
        let stem = src.file_stem().expect("cloud file has a name");
        let dst = a.output.join(stem).with_extension(extension(a.format));
        std::fs::write(&dst, encode_cloud(&cloud, a.format)).map_err(|e| Error::io(&dst, e))?;
    }
    let traj = a.input.join("trajectory.tum");
    if traj.is_file() {
        let dst = a.output.join("trajectory.tum");
        std::fs::copy(&traj, &dst).map_err(|e| Error::io(&dst, e))?;
    }
    log::info!("exported {} clouds to {}", clouds.len(), a.output.display());
    Ok(())
}
