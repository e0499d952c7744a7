//! Edge filtering and back-projection of aligned depth into world space.

use nalgebra::{Vector2, Vector3};
use rayon::prelude::*;

use crate::cues::{CueBundle, DepthFrame};
use crate::geometry::Trajectory;

#[derive(Debug, Clone, PartialEq)]
pub struct Fused {
    pub edge_masks: Vec<Vec<bool>>,
    /// World points of static, non-edge pixels over all frames.
    pub static_cloud: Vec<Vector3<f64>>,
}

/// Depth gradient along one axis at a pixel: central difference when both
/// neighbors are valid, one-sided with a single valid neighbor, else 0.
fn axis_gradient(depth: &DepthFrame, x: usize, y: usize, dx: isize, dy: isize) -> f64 {
    let at = |s: isize| {
        let (xx, yy) = (x as isize + s * dx, y as isize + s * dy);
        if xx < 0 || yy < 0 || xx >= depth.width as isize || yy >= depth.height as isize {
            None
        } else {
            depth.get(xx as usize, yy as usize)
        }
    };
    let c = depth.values[y * depth.width + x];
    match (at(-1), at(1)) {
        (Some(a), Some(b)) => 0.5 * (b - a),
        (None, Some(b)) => b - c,
        (Some(a), None) => c - a,
        (None, None) => 0.0,
    }
}

/// Valid pixels where `max(|dD/du|, |dD/dv|) > threshold * D`.
pub fn edge_mask(depth: &DepthFrame, threshold: f64) -> Vec<bool> {
    let mut out = vec![false; depth.values.len()];
    for y in 0..depth.height {
        for x in 0..depth.width {
            let Some(d) = depth.get(x, y) else { continue };
            let g = axis_gradient(depth, x, y, 1, 0).abs().max(axis_gradient(depth, x, y, 0, 1).abs());
            out[y * depth.width + x] = g > threshold * d;
        }
    }
    out
}

/// Edge masks for every frame and the static world cloud.
pub fn fuse(bundle: &CueBundle, trajectory: &Trajectory, aligned: &[DepthFrame], grad_threshold: f64) -> Fused {
    let k = &trajectory.intrinsics;
    let per_frame: Vec<(Vec<bool>, Vec<Vector3<f64>>)> = aligned
        .par_iter()
        .enumerate()
        .map(|(t, depth)| {
            let edges = edge_mask(depth, grad_threshold);
            let inv = trajectory.poses[t].inverse();
            let mut cloud = Vec::new();
            for y in 0..depth.height {
                for x in 0..depth.width {
                    let i = y * depth.width + x;
                    let Some(d) = depth.get(x, y) else { continue };
                    if edges[i] || !bundle.masks[t].is_static(x, y) {
                        continue;
                    }
                    cloud.push(inv.transform(&k.backproject(&Vector2::new(x as f64, y as f64), d)));
                }
            }
            (edges, cloud)
        })
        .collect();
    let mut fused = Fused { edge_masks: Vec::with_capacity(per_frame.len()), static_cloud: Vec::new() };
    for (edges, cloud) in per_frame {
        fused.edge_masks.push(edges);
        fused.static_cloud.extend(cloud);
    }
    fused
}
