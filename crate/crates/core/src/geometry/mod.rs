//! Rigid transforms, rotation vectors and the pinhole camera model.

mod camera;
mod pose;
pub mod so3;
pub mod tum;

pub use camera::{project, unproject, Intrinsics, DEPTH_EPSILON};
pub use pose::Pose;
pub use so3::{matrix_to_rotvec, rotvec_to_matrix};

use serde::{Deserialize, Serialize};

/// Per-frame camera poses plus the intrinsics shared by all frames.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub poses: Vec<Pose>,
    pub intrinsics: Intrinsics,
}

impl Trajectory {
    pub fn new(poses: Vec<Pose>, intrinsics: Intrinsics) -> Self {
        Self { poses, intrinsics }
    }

    pub fn identity(frames: usize, intrinsics: Intrinsics) -> Self {
        Self::new(vec![Pose::identity(); frames], intrinsics)
    }

    pub fn len(&self) -> usize {
        self.poses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poses.is_empty()
    }

    pub fn centers(&self) -> Vec<nalgebra::Vector3<f64>> {
        self.poses.iter().map(Pose::center).collect()
    }
}
