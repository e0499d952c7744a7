//! Per-pixel scale correction of raw depth from the optimized points.

use nalgebra::{Vector2, Vector3};
use rayon::prelude::*;

use crate::cues::{bilinear_footprint, CueBundle, DepthFrame, MaskFrame};
use crate::energy::{DynamicTrajectorySet, StaticPointSet};
use crate::geometry::{Intrinsics, Pose, Trajectory, DEPTH_EPSILON};

/// Distance under which a pixel's lifted point counts as coinciding with a
/// trajectory point.
pub const EXACT_HIT: f64 = 1e-9;

/// Aligned depth and, per frame, which pixels had enough support to be
/// rescaled. Unsupported pixels keep their raw depth.
#[derive(Debug, Clone, PartialEq)]
pub struct Densified {
    pub depth: Vec<DepthFrame>,
    pub supported: Vec<Vec<bool>>,
}

impl Densified {
    pub fn supported_count(&self) -> usize {
        self.supported.iter().flatten().filter(|s| **s).count()
    }
}

/// A point with known depth ratio in one frame, in camera coordinates.
#[derive(Debug, Clone, Copy)]
pub struct Anchor {
    pub label: u16,
    pub point: Vector3<f64>,
    /// Optimized camera depth over raw depth at the projection.
    pub ratio: f64,
}

/// Rescales every frame with the `neighbors` nearest same-label anchors
/// (inverse-distance weights normalized to sum 1).
pub fn densify(
    bundle: &CueBundle,
    trajectory: &Trajectory,
    static_points: &StaticPointSet,
    dynamic: &DynamicTrajectorySet,
    neighbors: usize,
) -> Densified {
    let (depth, supported) = (0..bundle.frame_count())
        .into_par_iter()
        .map(|t| {
            let anchors = frame_anchors(bundle, trajectory, static_points, dynamic, t);
            densify_frame(&bundle.depth[t], &bundle.masks[t], &trajectory.intrinsics, &anchors, neighbors)
        })
        .unzip();
    Densified { depth, supported }
}

/// Anchors of frame `t`: static points whose tracklet is visible at `t` and
/// dynamic samples valid at `t`, kept when they project in front of the
/// camera onto a footprint that is entirely their own label and has valid
/// depth.
pub fn frame_anchors(
    bundle: &CueBundle,
    trajectory: &Trajectory,
    static_points: &StaticPointSet,
    dynamic: &DynamicTrajectorySet,
    t: usize,
) -> Vec<Anchor> {
    let pose = &trajectory.poses[t];
    let k = &trajectory.intrinsics;
    let mut out = Vec::new();
    for tr in &bundle.tracklets {
        if tr.visible(t).is_none() {
            continue;
        }
        let (world, label) = match tr.label.instance() {
            None => match static_points.points.get(&tr.id) {
                Some(p) => (*p, 0),
                None => continue,
            },
            Some(inst) => match dynamic.tracks.get(&tr.id).and_then(|d| d.at(t)) {
                Some(p) => (*p, inst as u16),
                None => continue,
            },
        };
        if let Some(a) = anchor(&world, label, pose, k, &bundle.depth[t], &bundle.masks[t]) {
            out.push(a);
        }
    }
    out
}

fn anchor(world: &Vector3<f64>, label: u16, pose: &Pose, k: &Intrinsics, depth: &DepthFrame, mask: &MaskFrame) -> Option<Anchor> {
    let pc = pose.transform(world);
    if pc.z <= DEPTH_EPSILON {
        return None;
    }
    let px = k.project_camera(&pc).ok()?;
    let fp = bilinear_footprint(depth.width, depth.height, &px)?;
    if fp.iter().any(|&(x, y, _)| mask.label(x, y) != label) {
        return None;
    }
    let d = depth.sample(&px)?;
    Some(Anchor { label, point: pc, ratio: pc.z / d })
}

/// Rescales one frame; returns the aligned raster and the support mask.
pub fn densify_frame(depth: &DepthFrame, mask: &MaskFrame, k: &Intrinsics, anchors: &[Anchor], neighbors: usize) -> (DepthFrame, Vec<bool>) {
    let mut out = depth.clone();
    let mut supported = vec![false; depth.values.len()];
    let needed = neighbors.max(1);
    for y in 0..depth.height {
        for x in 0..depth.width {
            let Some(d) = depth.get(x, y) else { continue };
            let label = mask.label(x, y);
            let p = k.backproject(&Vector2::new(x as f64, y as f64), d);
            if let Some(s) = scale_at(&p, label, anchors, needed) {
                let i = y * depth.width + x;
                out.values[i] = s * d;
                supported[i] = true;
            }
        }
    }
    (out, supported)
}

/// Scale at a lifted pixel from its nearest anchors, `None` with fewer
/// than `needed` same-label anchors.
pub fn scale_at(p: &Vector3<f64>, label: u16, anchors: &[Anchor], needed: usize) -> Option<f64> {
    let mut best: Vec<(f64, f64)> = Vec::with_capacity(needed + 1);
    for a in anchors.iter().filter(|a| a.label == label) {
        let d = (a.point - p).norm();
        if best.len() < needed || d < best[best.len() - 1].0 {
            let pos = best.partition_point(|b| b.0 <= d);
            best.insert(pos, (d, a.ratio));
            best.truncate(needed);
        }
    }
    if best.len() < needed {
        return None;
    }
    if best[0].0 < EXACT_HIT {
        return Some(best[0].1);
    }
    let wsum: f64 = best.iter().map(|b| 1.0 / b.0).sum();
    Some(best.iter().map(|b| b.1 / b.0).sum::<f64>() / wsum)
}
