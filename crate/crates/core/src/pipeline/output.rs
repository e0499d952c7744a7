//! Writing a solution to an output directory.

use std::path::Path;

use super::SceneSolution;
use crate::error::{Error, Result};
use crate::geometry::tum;
use crate::ply::{self, label_color, Encoding, PointCloud};

/// The fused static cloud.
pub fn static_cloud(solution: &SceneSolution) -> PointCloud {
    let mut cloud = PointCloud::default();
    for p in &solution.static_cloud {
        cloud.push([p.x as f32, p.y as f32, p.z as f32], label_color(0));
    }
    cloud
}

/// Dynamic points valid at frame `t`, colored by instance.
pub fn dynamic_cloud(solution: &SceneSolution, t: usize) -> PointCloud {
    let mut cloud = PointCloud::default();
    for (id, track) in &solution.dynamic.tracks {
        if let Some(p) = track.at(t) {
            let inst = solution.dynamic.instance_of.get(id).copied().unwrap_or(1);
            cloud.push([p.x as f32, p.y as f32, p.z as f32], label_color(inst));
        }
    }
    cloud
}

/// Writes `trajectory.tum`, `intrinsics.json`, `static.ply`,
/// `dynamic_%06d.ply`, `fused_depth/%06d.pfm` and `diagnostics.json` under
/// `dir`.
pub fn write_solution(dir: &Path, solution: &SceneSolution) -> Result<()> {
    let depth_dir = dir.join("fused_depth");
    std::fs::create_dir_all(&depth_dir).map_err(|e| Error::io(&depth_dir, e))?;
    tum::write(&dir.join("trajectory.tum"), &solution.trajectory.poses)?;
    let k = dir.join("intrinsics.json");
    let text = serde_json::to_string_pretty(&solution.trajectory.intrinsics).expect("intrinsics serialize");
    std::fs::write(&k, text).map_err(|e| Error::io(&k, e))?;
    ply::write(&dir.join("static.ply"), &static_cloud(solution), Encoding::BinaryLittleEndian)?;
    for t in 0..solution.trajectory.len() {
        ply::write(&dir.join(format!("dynamic_{t:06}.ply")), &dynamic_cloud(solution, t), Encoding::BinaryLittleEndian)?;
    }
    crate::cues::write_depth_dir(&depth_dir, &solution.fused_depth)?;
    write_diagnostics(dir, &solution.diagnostics)
}

pub fn write_diagnostics(dir: &Path, diagnostics: &super::Diagnostics) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join("diagnostics.json");
    let text = serde_json::to_string_pretty(diagnostics).expect("diagnostics serialize");
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))
}
