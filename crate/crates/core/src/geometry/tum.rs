//! TUM RGB-D trajectory text format.
//!
//! One line per frame: `timestamp tx ty tz qx qy qz qw`, where the pose is
//! camera-to-world (the inverse of [`Pose`]'s convention) and the timestamp
//! is the frame index.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{Quaternion, UnitQuaternion, Vector3};

use super::Pose;
use crate::error::{Error, Result};

pub const HEADER: &str = "# timestamp tx ty tz qx qy qz qw (camera-to-world; timestamp = frame index)";

pub fn to_string(poses: &[Pose]) -> String {
    let mut out = String::new();
    out.push_str(HEADER);
    out.push('\n');
    for (i, pose) in poses.iter().enumerate() {
        let c = pose.center();
        let q = UnitQuaternion::from_matrix(&pose.rotation().transpose());
        let q = q.quaternion();
        writeln!(out, "{} {} {} {} {} {} {} {}", i as f64, c.x, c.y, c.z, q.i, q.j, q.k, q.w).unwrap();
    }
    out
}

pub fn from_str(text: &str, origin: &Path) -> Result<Vec<Pose>> {
    let mut poses = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let values: Vec<f64> = line
            .split_whitespace()
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Parse {
                path: origin.to_path_buf(),
                reason: format!("line {}: {e}", lineno + 1),
            })?;
        if values.len() != 8 {
            return Err(Error::Parse {
                path: origin.to_path_buf(),
                reason: format!("line {}: expected 8 values, found {}", lineno + 1, values.len()),
            });
        }
        let center = Vector3::new(values[1], values[2], values[3]);
        let q = UnitQuaternion::from_quaternion(Quaternion::new(values[7], values[4], values[5], values[6]));
        let rotation = q.to_rotation_matrix().into_inner().transpose();
        poses.push(Pose::from_rotation(&rotation, -(rotation * center)));
    }
    Ok(poses)
}

pub fn write(path: &Path, poses: &[Pose]) -> Result<()> {
    std::fs::write(path, to_string(poses)).map_err(|e| Error::io(path, e))
}

pub fn read(path: &Path) -> Result<Vec<Pose>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    from_str(&text, path)
}
