use std::collections::BTreeMap;

use nalgebra::{Vector2, Vector3};

use super::{DynamicTrajectorySet, FrameCache, StaticPointSet, TrajectoryGradient};
use crate::cues::{TrackId, Tracklet};
use crate::geometry::{so3, Intrinsics, Trajectory, DEPTH_EPSILON};

/// Residual charged for an observation whose point is behind the camera.
pub const BEHIND_CAMERA_PENALTY: f64 = 1e4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Residual {
    pub track: TrackId,
    pub frame: usize,
    /// Pixel distance between observation and projection.
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reprojection {
    pub energy: f64,
    pub residuals: Vec<Residual>,
    pub behind_camera: usize,
}

impl Reprojection {
    pub fn mean_residual(&self) -> f64 {
        if self.residuals.is_empty() {
            0.0
        } else {
            self.residuals.iter().map(|r| r.value).sum::<f64>() / self.residuals.len() as f64
        }
    }
}

fn robust(n: f64, huber: Option<f64>) -> (f64, f64) {
    match huber {
        Some(d) if n <= d => (0.5 * n * n / d, n / d),
        Some(d) => (n - 0.5 * d, 1.0),
        None => (n, 1.0),
    }
}

/// One reprojection residual. Returns the energy contribution and
/// optionally the gradient with respect to the camera-space point and to
/// `(fx, fy)`.
struct Term {
    energy: f64,
    value: f64,
    behind: bool,
    grad_pc: Vector3<f64>,
    grad_focal: Vector2<f64>,
}

fn residual(obs: &Vector2<f64>, pc: &Vector3<f64>, k: &Intrinsics, huber: Option<f64>) -> Term {
    if !(pc.z > DEPTH_EPSILON) {
        return Term {
            energy: BEHIND_CAMERA_PENALTY,
            value: BEHIND_CAMERA_PENALTY,
            behind: true,
            grad_pc: Vector3::zeros(),
            grad_focal: Vector2::zeros(),
        };
    }
    let (u, v) = (pc.x / pc.z, pc.y / pc.z);
    let r = obs - Vector2::new(k.fx * u + k.cx, k.fy * v + k.cy);
    let n = r.norm();
    let (energy, dn) = robust(n, huber);
    let g_pix = if n > super::SUBGRADIENT_ZERO { -dn * r / n } else { Vector2::zeros() };
    Term {
        energy,
        value: n,
        behind: false,
        grad_pc: k.project_jacobian(pc).transpose() * g_pix,
        grad_focal: Vector2::new(g_pix.x * u, g_pix.y * v),
    }
}

/// Static bundle-adjustment energy over visible samples of static
/// tracklets that have a point in `points`.
pub fn e_ba(trajectory: &Trajectory, points: &StaticPointSet, tracklets: &[Tracklet], huber: Option<f64>) -> Reprojection {
    let cache = FrameCache::build(trajectory);
    let k = &trajectory.intrinsics;
    let mut out = Reprojection {
        energy: 0.0,
        residuals: Vec::new(),
        behind_camera: 0,
    };
    for tr in tracklets.iter().filter(|t| t.label.is_static()) {
        let Some(p) = points.points.get(&tr.id) else { continue };
        for (t, z) in tr.observations() {
            let pc = cache[t].rotation * p + cache[t].trans;
            let term = residual(z, &pc, k, huber);
            out.energy += term.energy;
            out.behind_camera += term.behind as usize;
            out.residuals.push(Residual {
                track: tr.id,
                frame: t,
                value: term.value,
            });
        }
    }
    out
}

/// [`e_ba`] with its gradient with respect to camera variables and the
/// static points.
pub fn e_ba_gradient(
    trajectory: &Trajectory,
    points: &StaticPointSet,
    tracklets: &[Tracklet],
    huber: Option<f64>,
) -> (f64, TrajectoryGradient, BTreeMap<TrackId, Vector3<f64>>) {
    let cache = FrameCache::build(trajectory);
    let k = &trajectory.intrinsics;
    let mut energy = 0.0;
    let mut g_cam = TrajectoryGradient::zeros(trajectory.len());
    let mut g_pts = BTreeMap::new();
    for tr in tracklets.iter().filter(|t| t.label.is_static()) {
        let Some(p) = points.points.get(&tr.id) else { continue };
        let mut g_p = Vector3::zeros();
        for (t, z) in tr.observations() {
            let c = &cache[t];
            let rp = c.rotation * p;
            let term = residual(z, &(rp + c.trans), k, huber);
            energy += term.energy;
            if term.behind {
                continue;
            }
            g_p += c.rotation.transpose() * term.grad_pc;
            g_cam.add_rot(t, &((-so3::hat(&rp) * c.jl).transpose() * term.grad_pc));
            g_cam.add_trans(t, &term.grad_pc);
            g_cam.focal += term.grad_focal;
        }
        g_pts.insert(tr.id, g_p);
    }
    (energy, g_cam, g_pts)
}

/// Non-rigid reprojection energy of dynamic tracklets against their
/// per-frame points. Samples where the point is invalid are skipped.
pub fn e_nr(trajectory: &Trajectory, dynamic: &DynamicTrajectorySet, tracklets: &[Tracklet], huber: Option<f64>) -> Reprojection {
    let cache = FrameCache::build(trajectory);
    let k = &trajectory.intrinsics;
    let mut out = Reprojection {
        energy: 0.0,
        residuals: Vec::new(),
        behind_camera: 0,
    };
    for tr in tracklets.iter().filter(|t| !t.label.is_static()) {
        let Some(track) = dynamic.tracks.get(&tr.id) else { continue };
        for (t, z) in tr.observations() {
            let Some(p) = track.at(t) else { continue };
            let term = residual(z, &(cache[t].rotation * p + cache[t].trans), k, huber);
            out.energy += term.energy;
            out.behind_camera += term.behind as usize;
            out.residuals.push(Residual {
                track: tr.id,
                frame: t,
                value: term.value,
            });
        }
    }
    out
}

/// [`e_nr`] and its gradient with respect to the dynamic points only.
pub fn e_nr_gradient(
    trajectory: &Trajectory,
    dynamic: &DynamicTrajectorySet,
    tracklets: &[Tracklet],
    huber: Option<f64>,
) -> (f64, BTreeMap<TrackId, Vec<Vector3<f64>>>) {
    let cache = FrameCache::build(trajectory);
    let k = &trajectory.intrinsics;
    let mut energy = 0.0;
    let mut grads = BTreeMap::new();
    for tr in tracklets.iter().filter(|t| !t.label.is_static()) {
        let Some(track) = dynamic.tracks.get(&tr.id) else { continue };
        let mut g = vec![Vector3::zeros(); track.points.len()];
        for (t, z) in tr.observations() {
            let Some(p) = track.at(t) else { continue };
            let c = &cache[t];
            let term = residual(z, &(c.rotation * p + c.trans), k, huber);
            energy += term.energy;
            if !term.behind {
                g[t] = c.rotation.transpose() * term.grad_pc;
            }
        }
        grads.insert(tr.id, g);
    }
    (energy, grads)
}
