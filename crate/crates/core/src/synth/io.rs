//! On-disk layout of a synthetic dataset: the cue directory plus `gt/`.

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::{GroundTruth, GtTrack, SceneSpec};
use crate::cues::{read_depth_dir, save_bundle, write_depth_dir, CueBundle};
use crate::energy::StaticPointSet;
use crate::error::{Error, Result};
use crate::geometry::{tum, Intrinsics, Trajectory};

pub const GT_DIR: &str = "gt";

#[derive(Serialize, Deserialize)]
struct GtTrackLine {
    id: u32,
    instance: u32,
    points: Vec<Option<[f64; 3]>>,
}

/// Writes the cues under `dir`, ground truth under `dir/gt` and, when
/// given, the scene spec as `dir/synth.json`.
pub fn write_synth(dir: &Path, spec: Option<&SceneSpec>, bundle: &CueBundle, gt: &GroundTruth) -> Result<()> {
    save_bundle(bundle, dir)?;
    let gt_dir = dir.join(GT_DIR);
    std::fs::create_dir_all(&gt_dir).map_err(|e| Error::io(&gt_dir, e))?;
    tum::write(&gt_dir.join("trajectory.tum"), &gt.trajectory.poses)?;
    write_json(&gt_dir.join("intrinsics.json"), &gt.trajectory.intrinsics)?;
    write_depth_dir(&gt_dir.join("depth"), &gt.depth)?;
    let mut lines = String::new();
    for (&id, tr) in &gt.dynamic {
        let line = GtTrackLine { id, instance: tr.instance, points: tr.points.iter().map(|p| p.map(|p| [p.x, p.y, p.z])).collect() };
        lines.push_str(&serde_json::to_string(&line).expect("serializable"));
        lines.push('\n');
    }
    let path = gt_dir.join("dynamic_tracks.jsonl");
    std::fs::write(&path, lines).map_err(|e| Error::io(&path, e))?;
    if let Some(spec) = spec {
        write_json(&dir.join("synth.json"), spec)?;
    }
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("serializable");
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Reads `dir/gt`. Static points are not stored and come back empty.
pub fn read_ground_truth(dir: &Path) -> Result<GroundTruth> {
    let gt_dir = dir.join(GT_DIR);
    let poses = tum::read(&gt_dir.join("trajectory.tum"))?;
    let kpath = gt_dir.join("intrinsics.json");
    let text = std::fs::read_to_string(&kpath).map_err(|e| Error::io(&kpath, e))?;
    let intrinsics: Intrinsics = serde_json::from_str(&text).map_err(|e| Error::Parse { path: kpath.clone(), reason: e.to_string() })?;
    let (depth, _) = read_depth_dir(&gt_dir.join("depth"))?;
    let tpath = gt_dir.join("dynamic_tracks.jsonl");
    let text = std::fs::read_to_string(&tpath).map_err(|e| Error::io(&tpath, e))?;
    let mut dynamic = BTreeMap::new();
    for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let parsed: GtTrackLine = serde_json::from_str(line)
            .map_err(|e| Error::Parse { path: tpath.clone(), reason: format!("line {}: {e}", i + 1) })?;
        let points = parsed.points.into_iter().map(|p| p.map(Vector3::from)).collect();
        dynamic.insert(parsed.id, GtTrack { instance: parsed.instance, points });
    }
    Ok(GroundTruth { trajectory: Trajectory::new(poses, intrinsics), depth, dynamic, static_points: StaticPointSet::default() })
}
