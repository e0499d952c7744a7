//! The `synth.json` scene description.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Intrinsics, Pose};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub frame_count: usize,
    pub intrinsics: Intrinsics,
    pub camera_path: CameraPath,
    #[serde(default)]
    pub static_geometry: Vec<Primitive>,
    #[serde(default)]
    pub dynamic_objects: Vec<DynamicObject>,
    /// Tracking grid resolution and seeding interval in frames.
    #[serde(default = "default_grid_n")]
    pub grid_n: usize,
    #[serde(default = "default_track_every")]
    pub track_every: usize,
    /// Default seed for [`super::corrupt`] when none is given.
    #[serde(default)]
    pub seed: u64,
}

fn default_grid_n() -> usize {
    50
}

fn default_track_every() -> usize {
    10
}

/// Camera motion over the sequence, parameterized by `s = t / (T - 1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum CameraPath {
    /// Circle of `radius` around `target` in the plane `y = target.y +
    /// height`, starting behind the target (towards `-z`) and sweeping
    /// `sweep_deg` degrees, always looking at `target`.
    Orbit {
        target: [f64; 3],
        radius: f64,
        #[serde(default)]
        height: f64,
        #[serde(default)]
        start_deg: f64,
        sweep_deg: f64,
    },
    /// Straight segment; looks at `target` when given, else along `+z`.
    Line {
        start: [f64; 3],
        end: [f64; 3],
        #[serde(default)]
        target: Option<[f64; 3]>,
    },
    /// Constant-velocity screw motion: pose `t` is `step^t * start`.
    Screw {
        #[serde(default)]
        start_rotvec: [f64; 3],
        #[serde(default)]
        start_trans: [f64; 3],
        step_rotvec: [f64; 3],
        step_trans: [f64; 3],
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Primitive {
    /// Rectangle in its local `xy` plane.
    Plane {
        center: [f64; 3],
        #[serde(default)]
        rotvec: [f64; 3],
        half_size: [f64; 2],
    },
    Box {
        center: [f64; 3],
        #[serde(default)]
        rotvec: [f64; 3],
        half_extents: [f64; 3],
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DynamicObject {
    /// Mask label, `>= 1`.
    pub instance: u16,
    pub primitive: Primitive,
    pub motion: Motion,
}

/// Motion of a dynamic object about its primitive's center, as a function
/// of the frame index `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Motion {
    /// Translation `velocity * t` and rotation `angular_velocity * t`
    /// (rotation vector per frame).
    Rigid {
        velocity: [f64; 3],
        #[serde(default)]
        angular_velocity: [f64; 3],
    },
    /// Stretch along local `axis` by `1 + amplitude * sin(2 pi frequency t)`
    /// plus translation `velocity * t`.
    Sinusoidal {
        amplitude: f64,
        frequency: f64,
        #[serde(default)]
        axis: usize,
        #[serde(default)]
        velocity: [f64; 3],
    },
}

impl Primitive {
    pub fn center(&self) -> Vector3<f64> {
        match self {
            Primitive::Plane { center, .. } | Primitive::Box { center, .. } => Vector3::from(*center),
        }
    }

    pub fn rotvec(&self) -> Vector3<f64> {
        match self {
            Primitive::Plane { rotvec, .. } | Primitive::Box { rotvec, .. } => Vector3::from(*rotvec),
        }
    }
}

impl CameraPath {
    pub fn poses(&self, frame_count: usize) -> Vec<Pose> {
        let denom = (frame_count.max(2) - 1) as f64;
        (0..frame_count)
            .map(|t| {
                let s = t as f64 / denom;
                match self {
                    CameraPath::Orbit { target, radius, height, start_deg, sweep_deg } => {
                        let th = (start_deg + s * sweep_deg).to_radians();
                        let target = Vector3::from(*target);
                        let c = target + Vector3::new(radius * th.sin(), *height, -radius * th.cos());
                        Pose::look_at(c, target, -Vector3::y())
                    }
                    CameraPath::Line { start, end, target } => {
                        let c = Vector3::from(*start).lerp(&Vector3::from(*end), s);
                        match target {
                            Some(tg) => Pose::look_at(c, Vector3::from(*tg), -Vector3::y()),
                            None => Pose::new(Vector3::zeros(), -c),
                        }
                    }
                    CameraPath::Screw { start_rotvec, start_trans, step_rotvec, step_trans } => {
                        let step = Pose::new(Vector3::from(*step_rotvec), Vector3::from(*step_trans));
                        let mut p = Pose::new(Vector3::from(*start_rotvec), Vector3::from(*start_trans));
                        for _ in 0..t {
                            p = step.compose(&p);
                        }
                        p
                    }
                }
            })
            .collect()
    }
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        if self.frame_count < 2 {
            return Err(Error::InvalidConfig(format!("frame_count must be at least 2, got {}", self.frame_count)));
        }
        self.intrinsics.validate()?;
        if self.grid_n < 2 || self.track_every < 1 {
            return Err(Error::InvalidConfig("grid_n must be >= 2 and track_every >= 1".into()));
        }
        if self.static_geometry.is_empty() && self.dynamic_objects.is_empty() {
            return Err(Error::EmptyScene);
        }
        if self.dynamic_objects.iter().any(|d| d.instance == 0) {
            return Err(Error::InvalidConfig("dynamic instance labels must be >= 1".into()));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse { path: "synth.json".into(), reason: e.to_string() })
    }

    pub fn read(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Parse { path: path.to_path_buf(), reason: e.to_string() })
    }

    /// 20 frames orbiting a floor, a back wall and a static box, with one
    /// rigidly moving cube.
    pub fn standard() -> Self {
        Self::from_json(include_str!("../../scenes/standard.json")).expect("bundled scene parses")
    }
}
