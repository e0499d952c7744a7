//! Mapping between solver variables and optimizer parameter blocks.

use crate::energy::TrajectoryGradient;
use crate::geometry::{Pose, Trajectory};
use crate::optimizer::ParamBlock;

/// Camera variables exposed to the optimizer: the poses of `free` frames
/// as `(rotvec, trans)` and the focal lengths as log-ratios to their value
/// when the layout was created.
#[derive(Debug, Clone)]
pub(crate) struct CameraLayout {
    pub free: Vec<usize>,
    pub f0: (f64, f64),
    pub focal_frozen: bool,
}

impl CameraLayout {
    pub fn new(trajectory: &Trajectory, free: Vec<usize>, focal_frozen: bool) -> Self {
        let k = &trajectory.intrinsics;
        Self { free, f0: (k.fx, k.fy), focal_frozen }
    }

    pub fn blocks(&self, trajectory: &Trajectory) -> [ParamBlock; 2] {
        let mut poses = Vec::with_capacity(6 * self.free.len());
        for &t in &self.free {
            let p = &trajectory.poses[t];
            poses.extend(p.rotvec.iter().chain(p.trans.iter()));
        }
        let k = &trajectory.intrinsics;
        let focal = vec![(k.fx / self.f0.0).ln(), (k.fy / self.f0.1).ln()];
        let focal = if self.focal_frozen { ParamBlock::frozen("focal", focal) } else { ParamBlock::new("focal", focal) };
        [ParamBlock::new("poses", poses), focal]
    }

    pub fn apply(&self, trajectory: &mut Trajectory, poses: &ParamBlock, focal: &ParamBlock) {
        for (i, &t) in self.free.iter().enumerate() {
            let v = &poses.values[6 * i..6 * i + 6];
            let p = &mut trajectory.poses[t];
            p.rotvec = nalgebra::Vector3::new(v[0], v[1], v[2]);
            p.trans = nalgebra::Vector3::new(v[3], v[4], v[5]);
        }
        if !self.focal_frozen {
            trajectory.intrinsics.fx = self.f0.0 * focal.values[0].exp();
            trajectory.intrinsics.fy = self.f0.1 * focal.values[1].exp();
        }
    }

    /// Gradients of the two blocks from a gradient in natural variables.
    pub fn gradients(&self, trajectory: &Trajectory, g: &TrajectoryGradient) -> [Vec<f64>; 2] {
        let mut poses = Vec::with_capacity(6 * self.free.len());
        for &t in &self.free {
            poses.extend(g.poses[t].iter());
        }
        let k = &trajectory.intrinsics;
        [poses, vec![g.focal.x * k.fx, g.focal.y * k.fy]]
    }
}

/// Re-wraps every pose so rotation vectors are canonical again.
pub(crate) fn canonicalize(trajectory: &mut Trajectory) {
    for p in &mut trajectory.poses {
        *p = Pose::new(p.rotvec, p.trans);
    }
}
