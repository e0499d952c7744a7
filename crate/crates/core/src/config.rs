//! Run configuration, read from TOML.
//!
//! ```toml
//! input = "cues"
//! output = "out"
//! seed = 0
//! threads = 1                       # omit to use every core
//! classify = true                   # relabel tracklets from the masks
//! dilation_px = 2
//! known_intrinsics = [70.0, 70.0, 40.0, 30.0]   # fx, fy, cx, cy; freezes focal
//! loss_logs = false                 # per-stage loss CSVs under output/logs
//!
//! [pipeline]
//! mode = "full"                     # full | stage1_only | stage2_only
//! window = 5
//! new_frame_init = "constant_velocity"   # or "predecessor"
//! min_static_tracks = 8
//! knn_k = 8
//! stage2_outlier_percentile = 0.9
//! stage2_outlier_floor_px = 1.0
//! stage3_mad_factor = 3.0
//! stage3_outlier_floor_px = 1.0
//! densify_neighbors = 3
//! grad_threshold = 0.05
//! freeze_focal = false
//!
//! [pipeline.stage1]                 # likewise stage2 (2000, 1e-2), stage3 (1000, 1e-2)
//! max_iters = 600
//! lr_init = 1e-3
//! lr_min = 1e-4
//! plateau_patience = 50
//! plateau_factor = 0.5
//! early_stop_patience = 150
//! early_stop_min_delta = 1e-6
//!
//! [pipeline.weights]
//! w_smooth = 10.0
//! w_arap = 100.0
//! w_cam = 1.0
//! epsilon_cam = 1e-6
//! # huber_px = 2.0                  # robust reprojection loss; off by default
//! ```
//!
//! Every key is optional; missing keys take the defaults shown.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Intrinsics;
use crate::pipeline::PipelineConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub input: Option<PathBuf>,
    pub output: Option<PathBuf>,
    /// Recorded with the outputs. The solver itself draws no random numbers.
    pub seed: u64,
    pub threads: Option<usize>,
    pub classify: bool,
    pub dilation_px: usize,
    /// `[fx, fy, cx, cy]`, replacing the bundle's intrinsics.
    pub known_intrinsics: Option<[f64; 4]>,
    pub loss_logs: bool,
    pub pipeline: PipelineConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            input: None,
            output: None,
            seed: 0,
            threads: None,
            classify: true,
            dilation_px: 2,
            known_intrinsics: None,
            loss_logs: false,
            pipeline: PipelineConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str, origin: &Path) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse { path: origin.to_path_buf(), reason: e.to_string() })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text, path)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let input = self.input.as_ref().ok_or_else(|| Error::InvalidConfig("no input directory".into()))?;
        let output = self.output.as_ref().ok_or_else(|| Error::InvalidConfig("no output directory".into()))?;
        if input == output {
            return Err(Error::InvalidConfig(format!("input and output are both {}", input.display())));
        }
        if self.threads == Some(0) {
            return Err(Error::InvalidConfig("threads must be at least 1".into()));
        }
        if let Some(k) = self.known_intrinsics {
            if !k.iter().all(|v| v.is_finite()) || k[0] <= 0.0 || k[1] <= 0.0 {
                return Err(Error::InvalidConfig(format!("invalid intrinsics {k:?}")));
            }
        }
        self.pipeline.validate()
    }

    /// The pipeline configuration with run-level switches folded in.
    pub fn effective_pipeline(&self) -> PipelineConfig {
        let mut p = self.pipeline.clone();
        if self.known_intrinsics.is_some() {
            p.freeze_focal = true;
        }
        if self.loss_logs {
            p.loss_log_dir = self.output.as_ref().map(|o| o.join("logs"));
        }
        p
    }

    /// Bundle intrinsics overridden by `known_intrinsics`.
    pub fn intrinsics(&self, bundle: &Intrinsics) -> Intrinsics {
        match self.known_intrinsics {
            Some([fx, fy, cx, cy]) => Intrinsics { fx, fy, cx, cy, ..*bundle },
            None => *bundle,
        }
    }
}
