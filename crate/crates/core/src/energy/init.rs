//! Windowed initialization energy: each static sample is lifted to 3D with
//! its frame's depth and pose, then reprojected into every other frame of
//! the window; squared pixel errors are summed.

use std::ops::Range;

use nalgebra::{Vector2, Vector3};

use super::{FrameCache, TrajectoryGradient};
use crate::cues::{DepthFrame, Tracklet};
use crate::geometry::{so3, Trajectory, DEPTH_EPSILON};

/// One lifted-and-reprojected correspondence.
#[derive(Debug, Clone, Copy)]
pub struct InitPair {
    pub source: usize,
    pub target: usize,
    pub source_px: Vector2<f64>,
    pub depth: f64,
    pub target_px: Vector2<f64>,
}

/// The data side of the initialization energy, fixed for a set of frames.
#[derive(Debug, Clone, Default)]
pub struct InitTerms {
    pub pairs: Vec<InitPair>,
    /// Samples skipped because depth was unavailable at the track location.
    pub missing_depth: usize,
}

impl InitTerms {
    /// Ordered frame pairs `(source, target)` inside `frames` with
    /// `0 < |source - target| < window`, over static tracklets visible in
    /// both frames.
    pub fn build(depth: &[DepthFrame], tracklets: &[Tracklet], window: usize, frames: Range<usize>) -> Self {
        let mut out = InitTerms::default();
        for tr in tracklets.iter().filter(|t| t.label.is_static()) {
            for s in frames.clone() {
                let Some(zs) = tr.visible(s) else { continue };
                let d = depth[s].sample(zs);
                for t in frames.clone() {
                    if t == s || t.abs_diff(s) >= window {
                        continue;
                    }
                    let Some(zt) = tr.visible(t) else { continue };
                    match d {
                        Some(depth) => out.pairs.push(InitPair {
                            source: s,
                            target: t,
                            source_px: *zs,
                            depth,
                            target_px: *zt,
                        }),
                        None => out.missing_depth += 1,
                    }
                }
            }
        }
        out
    }

    /// Static tracklets contributing at least one pair.
    pub fn tracklet_count(&self, tracklets: &[Tracklet], window: usize, frames: Range<usize>) -> usize {
        tracklets
            .iter()
            .filter(|t| t.label.is_static())
            .filter(|tr| {
                frames.clone().any(|s| {
                    tr.visible(s).is_some()
                        && frames.clone().any(|t| t != s && t.abs_diff(s) < window && tr.visible(t).is_some())
                })
            })
            .count()
    }

    pub fn energy(&self, trajectory: &Trajectory) -> f64 {
        let cache = FrameCache::build(trajectory);
        self.pairs.iter().map(|p| eval(p, trajectory, &cache, None)).sum()
    }

    pub fn gradient(&self, trajectory: &Trajectory) -> (f64, TrajectoryGradient) {
        let cache = FrameCache::build(trajectory);
        let mut g = TrajectoryGradient::zeros(trajectory.len());
        let e = self.pairs.iter().map(|p| eval(p, trajectory, &cache, Some(&mut g))).sum();
        (e, g)
    }
}

fn eval(p: &InitPair, trajectory: &Trajectory, cache: &[FrameCache], grad: Option<&mut TrajectoryGradient>) -> f64 {
    let k = &trajectory.intrinsics;
    let (src, dst) = (&cache[p.source], &cache[p.target]);
    let xc = k.backproject(&p.source_px, p.depth);
    let xw = src.rotation.transpose() * (xc - src.trans);
    let rxw = dst.rotation * xw;
    let xt = rxw + dst.trans;
    if !(xt.z > DEPTH_EPSILON) {
        return 0.0;
    }
    let pix = Vector2::new(k.fx * xt.x / xt.z + k.cx, k.fy * xt.y / xt.z + k.cy);
    let r = p.target_px - pix;
    let Some(g) = grad else { return r.norm_squared() };

    let g_pix = -2.0 * r;
    let g_xt = k.project_jacobian(&xt).transpose() * g_pix;
    g.add_rot(p.target, &((-so3::hat(&rxw) * dst.jl).transpose() * g_xt));
    g.add_trans(p.target, &g_xt);
    let g_xw = dst.rotation.transpose() * g_xt;
    g.add_trans(p.source, &(-(src.rotation * g_xw)));
    // J_l(-w) = J_l(w)^T
    g.add_rot(p.source, &((so3::hat(&xw) * src.jl.transpose()).transpose() * g_xw));
    let g_xc: Vector3<f64> = src.rotation * g_xw;
    g.focal.x += g_pix.x * xt.x / xt.z - g_xc.x * xc.x / k.fx;
    g.focal.y += g_pix.y * xt.y / xt.z - g_xc.y * xc.y / k.fy;
    r.norm_squared()
}

/// Initialization energy over the whole sequence.
pub fn e_init(trajectory: &Trajectory, depth: &[DepthFrame], tracklets: &[Tracklet], window: usize) -> f64 {
    e_init_in_frames(trajectory, depth, tracklets, window, 0..trajectory.len())
}

pub fn e_init_in_frames(trajectory: &Trajectory, depth: &[DepthFrame], tracklets: &[Tracklet], window: usize, frames: Range<usize>) -> f64 {
    InitTerms::build(depth, tracklets, window, frames).energy(trajectory)
}

pub fn e_init_gradient(
    trajectory: &Trajectory,
    depth: &[DepthFrame],
    tracklets: &[Tracklet],
    window: usize,
    frames: Range<usize>,
) -> (f64, TrajectoryGradient) {
    InitTerms::build(depth, tracklets, window, frames).gradient(trajectory)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cues::TrackLabel;
    use crate::geometry::{project, Intrinsics, Pose};

    /// One point on a fronto-parallel plane at depth 2, seen by two cameras.
    #[test]
    fn hand_built_two_frame_case() {
        let k = Intrinsics::centered(100.0, 100.0, 101, 101);
        let truth = [Pose::identity(), Pose::new(Vector3::zeros(), Vector3::new(-0.1, 0.0, 0.0))];
        let depth: Vec<_> = (0..2).map(|t| DepthFrame::from_values(t, 101, 101, vec![2.0; 101 * 101])).collect();
        let x = Vector3::new(0.0, 0.0, 2.0);
        let tr = Tracklet {
            id: 0,
            points: truth.iter().map(|p| Some(project(&x, p, &k).unwrap())).collect(),
            label: TrackLabel::Static,
        };
        // frame 1 sees the point at u = 50.5 + 100 * (-0.1) / 2 = 45.5
        assert!((tr.points[1].unwrap().x - 45.5).abs() < 1e-12);
        let exact = Trajectory::new(truth.to_vec(), k);
        assert!(e_init(&exact, &depth, std::slice::from_ref(&tr), 5) < 1e-20);
        // identity poses: both directions miss by 5 px
        let wrong = Trajectory::identity(2, k);
        let e = e_init(&wrong, &depth, &[tr], 5);
        assert!((e - 50.0).abs() < 1e-9, "{e}");
    }

    #[test]
    fn window_limits_pairs() {
        let k = Intrinsics::centered(50.0, 50.0, 20, 20);
        let depth: Vec<_> = (0..6).map(|t| DepthFrame::from_values(t, 20, 20, vec![1.0; 400])).collect();
        let tr = Tracklet { id: 0, points: vec![Some(Vector2::new(5.0, 5.0)); 6], label: TrackLabel::Static };
        let terms = InitTerms::build(&depth, std::slice::from_ref(&tr), 2, 0..6);
        assert_eq!(terms.pairs.len(), 10);
        let terms = InitTerms::build(&depth, std::slice::from_ref(&tr), 5, 1..4);
        assert_eq!(terms.pairs.len(), 6);
        assert_eq!(terms.tracklet_count(&[tr], 5, 1..4), 1);
        let _ = k;
    }
}
