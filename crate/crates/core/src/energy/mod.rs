//! Energy terms of the joint objective and their analytic gradients.
//!
//! Reprojection terms (static and non-rigid) and the motion priors use
//! unsquared L2 norms; the windowed initialization term uses squared L2.
//! Where a norm is exactly zero the subgradient 0 is used.

mod camera_prior;
mod init;
mod motion;
mod reprojection;

pub use camera_prior::{e_cam, e_cam_gradient};
pub use init::{e_init, e_init_gradient, e_init_in_frames, InitPair, InitTerms};
pub use motion::{e_arap, e_arap_gradient, e_smooth, e_smooth_gradient};
pub use reprojection::{
    e_ba, e_ba_gradient, e_nr, e_nr_gradient, Reprojection, Residual, BEHIND_CAMERA_PENALTY,
};

use std::collections::BTreeMap;

use nalgebra::{Vector2, Vector3, Vector6};
use serde::{Deserialize, Serialize};

use crate::cues::{DepthFrame, TrackId, Tracklet};
use crate::geometry::{Pose, Trajectory};

/// One world point per static tracklet.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StaticPointSet {
    pub points: BTreeMap<TrackId, Vector3<f64>>,
}

impl StaticPointSet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Time-varying 3D positions of one dynamic tracklet.
#[derive(Debug, Clone, PartialEq)]
pub struct DynamicTrack {
    pub points: Vec<Vector3<f64>>,
    pub valid: Vec<bool>,
}

impl DynamicTrack {
    pub fn at(&self, t: usize) -> Option<&Vector3<f64>> {
        self.valid[t].then(|| &self.points[t])
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DynamicTrajectorySet {
    pub tracks: BTreeMap<TrackId, DynamicTrack>,
    pub instance_of: BTreeMap<TrackId, u32>,
    /// Directed KNN graph; neighbors share the track's instance.
    pub neighbors: BTreeMap<TrackId, Vec<TrackId>>,
}

impl DynamicTrajectorySet {
    pub fn len(&self) -> usize {
        self.tracks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tracks.is_empty()
    }

    pub fn frame_count(&self) -> usize {
        self.tracks.values().next().map_or(0, |t| t.points.len())
    }
}

/// Scaling of the individual terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnergyWeights {
    pub w_smooth: f64,
    pub w_arap: f64,
    pub w_cam: f64,
    pub epsilon_cam: f64,
    /// Huber threshold in pixels for the reprojection terms; off when `None`.
    pub huber_px: Option<f64>,
}

impl Default for EnergyWeights {
    fn default() -> Self {
        Self {
            w_smooth: 10.0,
            w_arap: 100.0,
            w_cam: 1.0,
            epsilon_cam: 1e-6,
            huber_px: None,
        }
    }
}

/// Gradient with respect to camera variables: per-frame `(rotvec, trans)`
/// and the focal lengths `(fx, fy)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryGradient {
    pub poses: Vec<Vector6<f64>>,
    pub focal: Vector2<f64>,
}

impl TrajectoryGradient {
    pub fn zeros(frames: usize) -> Self {
        Self {
            poses: vec![Vector6::zeros(); frames],
            focal: Vector2::zeros(),
        }
    }

    pub(crate) fn add_rot(&mut self, t: usize, g: &Vector3<f64>) {
        self.poses[t].fixed_rows_mut::<3>(0).add_assign(g);
    }

    pub(crate) fn add_trans(&mut self, t: usize, g: &Vector3<f64>) {
        self.poses[t].fixed_rows_mut::<3>(3).add_assign(g);
    }
}

use std::ops::AddAssign;

/// Per-frame rotation data reused across residuals.
pub(crate) struct FrameCache {
    pub rotation: nalgebra::Matrix3<f64>,
    pub jl: nalgebra::Matrix3<f64>,
    pub trans: Vector3<f64>,
}

impl FrameCache {
    pub fn new(pose: &Pose) -> Self {
        Self {
            rotation: pose.rotation(),
            jl: crate::geometry::so3::left_jacobian(&pose.rotvec),
            trans: pose.trans,
        }
    }

    pub fn build(trajectory: &Trajectory) -> Vec<Self> {
        trajectory.poses.iter().map(Self::new).collect()
    }
}

/// The energy terms, for generic evaluation through [`energy`] and
/// [`gradient`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Term {
    Ba,
    Nr,
    Cam,
    Arap,
    Smooth,
    /// Windowed depth-backed reprojection with the given window length.
    Init(usize),
}

/// Which variable blocks a flat gradient covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ActiveSet {
    pub poses: bool,
    pub focal: bool,
    pub static_points: bool,
    pub dyn_points: bool,
}

impl ActiveSet {
    pub const ALL: ActiveSet = ActiveSet {
        poses: true,
        focal: true,
        static_points: true,
        dyn_points: true,
    };
}

/// All unknowns of the joint problem.
#[derive(Debug, Clone, PartialEq)]
pub struct Variables {
    pub trajectory: Trajectory,
    pub static_points: StaticPointSet,
    pub dynamic: DynamicTrajectorySet,
}

/// Observations the energies are conditioned on.
#[derive(Debug, Clone, Copy)]
pub struct Observations<'a> {
    pub tracklets: &'a [Tracklet],
    pub depth: &'a [DepthFrame],
    pub epsilon_cam: f64,
    pub huber_px: Option<f64>,
}

impl Variables {
    /// Flattens the active blocks: poses as `(rotvec, trans)` per frame,
    /// then `(fx, fy)`, then static points and dynamic samples in id order.
    pub fn pack(&self, active: ActiveSet) -> Vec<f64> {
        let mut out = Vec::new();
        if active.poses {
            for p in &self.trajectory.poses {
                out.extend(p.rotvec.iter().chain(p.trans.iter()));
            }
        }
        if active.focal {
            out.extend([self.trajectory.intrinsics.fx, self.trajectory.intrinsics.fy]);
        }
        if active.static_points {
            for p in self.static_points.points.values() {
                out.extend(p.iter());
            }
        }
        if active.dyn_points {
            for tr in self.dynamic.tracks.values() {
                for p in &tr.points {
                    out.extend(p.iter());
                }
            }
        }
        out
    }

    pub fn unpack(&mut self, active: ActiveSet, flat: &[f64]) {
        let mut it = flat.iter().copied();
        let v3 = |it: &mut dyn Iterator<Item = f64>| Vector3::new(it.next().unwrap(), it.next().unwrap(), it.next().unwrap());
        if active.poses {
            for p in &mut self.trajectory.poses {
                p.rotvec = v3(&mut it);
                p.trans = v3(&mut it);
            }
        }
        if active.focal {
            self.trajectory.intrinsics.fx = it.next().unwrap();
            self.trajectory.intrinsics.fy = it.next().unwrap();
        }
        if active.static_points {
            for p in self.static_points.points.values_mut() {
                *p = v3(&mut it);
            }
        }
        if active.dyn_points {
            for tr in self.dynamic.tracks.values_mut() {
                for p in &mut tr.points {
                    *p = v3(&mut it);
                }
            }
        }
        assert!(it.next().is_none(), "flat vector longer than the active blocks");
    }
}

/// Value of one term.
pub fn energy(term: Term, vars: &Variables, obs: &Observations) -> f64 {
    match term {
        Term::Ba => e_ba(&vars.trajectory, &vars.static_points, obs.tracklets, obs.huber_px).energy,
        Term::Nr => e_nr(&vars.trajectory, &vars.dynamic, obs.tracklets, obs.huber_px).energy,
        Term::Cam => e_cam(&vars.trajectory, obs.epsilon_cam),
        Term::Arap => e_arap(&vars.dynamic),
        Term::Smooth => e_smooth(&vars.dynamic),
        Term::Init(window) => e_init(&vars.trajectory, obs.depth, obs.tracklets, window),
    }
}

/// Flat analytic gradient of one term over the active blocks, laid out as
/// in [`Variables::pack`].
pub fn gradient(term: Term, vars: &Variables, obs: &Observations, active: ActiveSet) -> Vec<f64> {
    let frames = vars.trajectory.len();
    let mut cam = TrajectoryGradient::zeros(frames);
    let mut stat: BTreeMap<TrackId, Vector3<f64>> = BTreeMap::new();
    let mut dynamic: BTreeMap<TrackId, Vec<Vector3<f64>>> = BTreeMap::new();
    match term {
        Term::Ba => {
            let (_, c, s) = e_ba_gradient(&vars.trajectory, &vars.static_points, obs.tracklets, obs.huber_px);
            cam = c;
            stat = s;
        }
        Term::Nr => dynamic = e_nr_gradient(&vars.trajectory, &vars.dynamic, obs.tracklets, obs.huber_px).1,
        Term::Cam => cam = e_cam_gradient(&vars.trajectory, obs.epsilon_cam).1,
        Term::Arap => dynamic = e_arap_gradient(&vars.dynamic).1,
        Term::Smooth => dynamic = e_smooth_gradient(&vars.dynamic).1,
        Term::Init(window) => cam = e_init_gradient(&vars.trajectory, obs.depth, obs.tracklets, window, 0..frames).1,
    }
    let mut out = Vec::new();
    if active.poses {
        for g in &cam.poses {
            out.extend(g.iter());
        }
    }
    if active.focal {
        out.extend(cam.focal.iter());
    }
    if active.static_points {
        for id in vars.static_points.points.keys() {
            out.extend(stat.get(id).copied().unwrap_or_else(Vector3::zeros).iter());
        }
    }
    if active.dyn_points {
        for (id, tr) in &vars.dynamic.tracks {
            match dynamic.get(id) {
                Some(g) => g.iter().for_each(|v| out.extend(v.iter())),
                None => out.extend(std::iter::repeat_n(0.0, 3 * tr.points.len())),
            }
        }
    }
    out
}

/// Norms at or below this are treated as exactly zero when choosing a
/// subgradient.
pub const SUBGRADIENT_ZERO: f64 = 1e-12;

/// Norm and unit direction, with direction 0 at (numerically) the origin.
pub(crate) fn norm_and_dir3(v: &Vector3<f64>) -> (f64, Vector3<f64>) {
    let n = v.norm();
    if n > SUBGRADIENT_ZERO {
        (n, v / n)
    } else {
        (0.0, Vector3::zeros())
    }
}
