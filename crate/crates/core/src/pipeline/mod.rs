//! The three optimization stages, densification and fusion, and the
//! driver that chains them.

mod densify;
mod fuse;
mod output;
mod params;
mod stage1;
mod stage2;
mod stage3;

pub use densify::{densify, densify_frame, frame_anchors, scale_at, Anchor, Densified, EXACT_HIT};
pub use fuse::{edge_mask, fuse, Fused};
pub use output::{dynamic_cloud, static_cloud, write_diagnostics, write_solution};
pub use stage1::stage1_init;
pub use stage2::{init_static_points, mean_residuals, stage2_ba, Stage2Output};
pub use stage3::{build_knn, init_dynamic, stage3_nrba, Stage3Output};

use std::path::PathBuf;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::cues::{CueBundle, DepthFrame};
use crate::energy::{DynamicTrajectorySet, EnergyWeights, StaticPointSet};
use crate::error::Result;
use crate::geometry::Trajectory;
use crate::optimizer::{History, OptimSchedule, StopReason};

/// Which stages run. The reduced modes exist for ablations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    Full,
    /// Stage 1 poses are final; static points are lifted but not refined.
    Stage1Only,
    /// Stage 1 is skipped and bundle adjustment starts from identity poses.
    Stage2Only,
}

/// Starting pose of the frame a stage-1 window adds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NewFrameInit {
    /// Copy of the previous frame.
    Predecessor,
    /// The previous frame moved by the motion between the two frames
    /// before it.
    #[default]
    ConstantVelocity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub mode: Mode,
    pub stage1: OptimSchedule,
    pub stage2: OptimSchedule,
    pub stage3: OptimSchedule,
    pub weights: EnergyWeights,
    /// Sliding window length of stage 1, in frames.
    pub window: usize,
    pub new_frame_init: NewFrameInit,
    pub min_static_tracks: usize,
    pub knn_k: usize,
    pub stage2_outlier_percentile: f64,
    /// Points with mean residual at or below this are never dropped.
    pub stage2_outlier_floor_px: f64,
    pub stage3_mad_factor: f64,
    /// Samples with residual at or below this are never invalidated.
    pub stage3_outlier_floor_px: f64,
    pub densify_neighbors: usize,
    /// Relative depth-gradient threshold of the fusion edge mask.
    pub grad_threshold: f64,
    /// Keep the focal lengths fixed (known intrinsics).
    pub freeze_focal: bool,
    /// Directory for per-stage loss CSV files.
    #[serde(skip)]
    pub loss_log_dir: Option<PathBuf>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Full,
            stage1: OptimSchedule::with_budget(600, 1e-3),
            stage2: OptimSchedule::with_budget(2000, 1e-2),
            stage3: OptimSchedule::with_budget(1000, 1e-2),
            weights: EnergyWeights::default(),
            window: 5,
            new_frame_init: NewFrameInit::ConstantVelocity,
            min_static_tracks: 8,
            knn_k: 8,
            stage2_outlier_percentile: 0.9,
            stage2_outlier_floor_px: 1.0,
            stage3_mad_factor: 3.0,
            stage3_outlier_floor_px: 1.0,
            densify_neighbors: 3,
            grad_threshold: 0.05,
            freeze_focal: false,
            loss_log_dir: None,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        for s in [&self.stage1, &self.stage2, &self.stage3] {
            s.validate()?;
        }
        let w = &self.weights;
        let ok = self.window >= 2
            && self.densify_neighbors >= 1
            && (0.0..=1.0).contains(&self.stage2_outlier_percentile)
            && self.stage3_mad_factor >= 0.0
            && self.grad_threshold >= 0.0
            && [w.w_smooth, w.w_arap, w.w_cam, w.epsilon_cam].iter().all(|v| *v >= 0.0);
        if ok {
            Ok(())
        } else {
            Err(crate::Error::InvalidConfig("pipeline parameters out of range".into()))
        }
    }
}

pub(crate) fn loss_log(cfg: &PipelineConfig, name: &str) -> Option<PathBuf> {
    cfg.loss_log_dir.as_ref().map(|d| d.join(name))
}

/// Summary of one optimization stage. Stage 1 accumulates over windows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageReport {
    pub name: String,
    pub runs: usize,
    pub iterations: usize,
    pub initial_loss: f64,
    pub final_loss: f64,
    pub stops: Vec<StopReason>,
    pub wall_seconds: f64,
}

impl StageReport {
    pub fn new(name: &str) -> Self {
        Self {
            name: name.into(),
            runs: 0,
            iterations: 0,
            initial_loss: 0.0,
            final_loss: 0.0,
            stops: Vec::new(),
            wall_seconds: 0.0,
        }
    }

    pub(crate) fn record(&mut self, h: &History) {
        self.runs += 1;
        self.iterations += h.iterations();
        self.initial_loss += h.losses.first().copied().unwrap_or(0.0);
        self.final_loss += h.best_loss;
        self.stops.push(h.stop);
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub stages: Vec<StageReport>,
    pub static_points_initialized: usize,
    pub static_points_filtered: usize,
    pub dynamic_tracks: usize,
    pub dynamic_samples_filtered: usize,
    pub final_mean_residual_px: f64,
    pub supported_pixels: usize,
    pub edge_pixels: usize,
    pub fused_static_points: usize,
    pub wall_seconds: f64,
    /// Stage that failed, if any.
    pub failed_stage: Option<String>,
    /// Effective configuration of the run.
    pub config: Option<serde_json::Value>,
}

/// Everything the pipeline produces.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneSolution {
    pub trajectory: Trajectory,
    pub static_points: StaticPointSet,
    pub dynamic: DynamicTrajectorySet,
    pub fused_depth: Vec<DepthFrame>,
    pub supported: Vec<Vec<bool>>,
    pub edge_masks: Vec<Vec<bool>>,
    pub static_cloud: Vec<nalgebra::Vector3<f64>>,
    pub diagnostics: Diagnostics,
}

/// Runs all stages with fresh diagnostics.
pub fn run_pipeline(bundle: &CueBundle, cfg: &PipelineConfig) -> Result<SceneSolution> {
    run_pipeline_with(bundle, cfg, &mut Diagnostics::default())
}

/// Runs all stages, filling `diag` as they complete so that it is
/// meaningful even when a stage fails. Errors carry the stage name.
pub fn run_pipeline_with(bundle: &CueBundle, cfg: &PipelineConfig, diag: &mut Diagnostics) -> Result<SceneSolution> {
    let start = Instant::now();
    cfg.validate()?;
    if let Err(reason) = bundle.check() {
        return Err(crate::Error::DegenerateConfiguration(reason));
    }

    let trajectory = match cfg.mode {
        Mode::Stage2Only => Trajectory::identity(bundle.frame_count(), bundle.intrinsics),
        _ => {
            let (t, report) = staged(diag, "stage1", stage1_init(bundle, cfg))?;
            diag.stages.push(report);
            t
        }
    };

    let (trajectory, static_points) = match cfg.mode {
        Mode::Stage1Only => {
            let pts = init_static_points(bundle, &trajectory);
            diag.static_points_initialized = pts.len();
            (trajectory, pts)
        }
        _ => {
            let out = staged(diag, "stage2", stage2_ba(bundle, &trajectory, cfg))?;
            diag.static_points_initialized = out.static_points.len() + out.filtered;
            diag.static_points_filtered = out.filtered;
            diag.stages.push(out.report);
            (out.trajectory, out.static_points)
        }
    };
    diag.final_mean_residual_px = crate::energy::e_ba(&trajectory, &static_points, &bundle.tracklets, None).mean_residual();

    let s3 = staged(diag, "stage3", stage3_nrba(bundle, &trajectory, cfg))?;
    diag.dynamic_tracks = s3.dynamic.len();
    diag.dynamic_samples_filtered = s3.filtered;
    diag.stages.push(s3.report);

    let dense = densify(bundle, &trajectory, &static_points, &s3.dynamic, cfg.densify_neighbors);
    diag.supported_pixels = dense.supported_count();
    let fused = fuse(bundle, &trajectory, &dense.depth, cfg.grad_threshold);
    diag.edge_pixels = fused.edge_masks.iter().flatten().filter(|e| **e).count();
    diag.fused_static_points = fused.static_cloud.len();
    diag.wall_seconds = start.elapsed().as_secs_f64();

    Ok(SceneSolution {
        trajectory,
        static_points,
        dynamic: s3.dynamic,
        fused_depth: dense.depth,
        supported: dense.supported,
        edge_masks: fused.edge_masks,
        static_cloud: fused.static_cloud,
        diagnostics: diag.clone(),
    })
}

fn staged<T>(diag: &mut Diagnostics, stage: &'static str, r: Result<T>) -> Result<T> {
    r.map_err(|e| {
        diag.failed_stage = Some(stage.into());
        e.in_stage(stage)
    })
}
