use nalgebra::{Matrix2x3, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use super::Pose;
use crate::error::{Error, Result};

/// Camera-space depth below which a point counts as behind the camera.
pub const DEPTH_EPSILON: f64 = 1e-6;

/// Pinhole intrinsics shared by every frame of a sequence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
}

impl Intrinsics {
    /// Intrinsics with the principal point at the image center.
    pub fn centered(fx: f64, fy: f64, width: usize, height: usize) -> Self {
        Self {
            fx,
            fy,
            cx: width as f64 / 2.0,
            cy: height as f64 / 2.0,
            width,
            height,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.fx.is_finite()
            && self.fy.is_finite()
            && self.fx > 0.0
            && self.fy > 0.0
            && self.cx >= 0.0
            && self.cy >= 0.0
            && self.cx < self.width as f64
            && self.cy < self.height as f64;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("invalid intrinsics {self:?}")))
        }
    }

    pub fn with_focal(&self, fx: f64, fy: f64) -> Self {
        Self { fx, fy, ..*self }
    }

    pub fn contains(&self, px: &Vector2<f64>) -> bool {
        px.x >= 0.0 && px.y >= 0.0 && px.x <= (self.width - 1) as f64 && px.y <= (self.height - 1) as f64
    }

    /// Projects a camera-space point.
    pub fn project_camera(&self, pc: &Vector3<f64>) -> Result<Vector2<f64>> {
        if !(pc.z > DEPTH_EPSILON) {
            return Err(Error::BehindCamera { z: pc.z });
        }
        Ok(Vector2::new(self.fx * pc.x / pc.z + self.cx, self.fy * pc.y / pc.z + self.cy))
    }

    /// Derivative of the pixel with respect to the camera-space point.
    pub fn project_jacobian(&self, pc: &Vector3<f64>) -> Matrix2x3<f64> {
        let iz = 1.0 / pc.z;
        Matrix2x3::new(
            self.fx * iz,
            0.0,
            -self.fx * pc.x * iz * iz,
            0.0,
            self.fy * iz,
            -self.fy * pc.y * iz * iz,
        )
    }

    /// Camera-space point at `depth` along the ray through `px`.
    pub fn backproject(&self, px: &Vector2<f64>, depth: f64) -> Vector3<f64> {
        Vector3::new(
            depth * (px.x - self.cx) / self.fx,
            depth * (px.y - self.cy) / self.fy,
            depth,
        )
    }
}

/// World point to pixel.
pub fn project(point: &Vector3<f64>, pose: &Pose, k: &Intrinsics) -> Result<Vector2<f64>> {
    k.project_camera(&pose.transform(point))
}

/// Pixel and camera-space depth to world point.
pub fn unproject(px: &Vector2<f64>, depth: f64, pose: &Pose, k: &Intrinsics) -> Result<Vector3<f64>> {
    if !(depth > 0.0) || !depth.is_finite() {
        return Err(Error::NonPositiveDepth { depth });
    }
    let pc = k.backproject(px, depth);
    Ok(pose.rotation().transpose() * (pc - pose.trans))
}
