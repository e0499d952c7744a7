use nalgebra::{Matrix3, Matrix4, Vector3};
use serde::{Deserialize, Serialize};

use super::so3;

/// Rigid world-to-camera transform: `x_cam = R(rotvec) x_world + trans`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub rotvec: Vector3<f64>,
    pub trans: Vector3<f64>,
}

impl Default for Pose {
    fn default() -> Self {
        Self::identity()
    }
}

impl Pose {
    pub fn new(rotvec: Vector3<f64>, trans: Vector3<f64>) -> Self {
        Self {
            rotvec: so3::canonicalize(&rotvec),
            trans,
        }
    }

    pub fn identity() -> Self {
        Self {
            rotvec: Vector3::zeros(),
            trans: Vector3::zeros(),
        }
    }

    /// Builds a pose from a rotation matrix assumed orthonormal.
    pub fn from_rotation(rotation: &Matrix3<f64>, trans: Vector3<f64>) -> Self {
        Self {
            rotvec: so3::log_unchecked(rotation),
            trans,
        }
    }

    /// Pose of a camera placed at `center` looking at `target`, with image
    /// `y` pointing roughly along `-up`.
    pub fn look_at(center: Vector3<f64>, target: Vector3<f64>, up: Vector3<f64>) -> Self {
        let z = (target - center).normalize();
        let x = (-up).cross(&z).normalize();
        let y = z.cross(&x);
        let rotation = Matrix3::from_rows(&[x.transpose(), y.transpose(), z.transpose()]);
        Self::from_rotation(&rotation, -(rotation * center))
    }

    pub fn rotation(&self) -> Matrix3<f64> {
        so3::rotvec_to_matrix(&self.rotvec)
    }

    pub fn transform(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation() * p + self.trans
    }

    /// Camera center in world coordinates.
    pub fn center(&self) -> Vector3<f64> {
        -(self.rotation().transpose() * self.trans)
    }

    pub fn to_matrix(&self) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.rotation());
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.trans);
        m
    }

    pub fn from_matrix(m: &Matrix4<f64>) -> Self {
        let r: Matrix3<f64> = m.fixed_view::<3, 3>(0, 0).into_owned();
        Self::from_rotation(&r, m.fixed_view::<3, 1>(0, 3).into_owned())
    }

    /// `self * other`: applies `other` first.
    pub fn compose(&self, other: &Pose) -> Pose {
        let r = self.rotation();
        Pose::from_rotation(&(r * other.rotation()), r * other.trans + self.trans)
    }

    pub fn inverse(&self) -> Pose {
        let rt = self.rotation().transpose();
        Pose {
            rotvec: -self.rotvec,
            trans: -(rt * self.trans),
        }
    }

    /// `b^-1 * a`.
    pub fn relative(a: &Pose, b: &Pose) -> Pose {
        b.inverse().compose(a)
    }

    /// Camera motion from frame `from` to frame `to`: maps coordinates in
    /// camera `from` to coordinates in camera `to`, i.e. `to * from^-1`.
    pub fn motion_between(from: &Pose, to: &Pose) -> Pose {
        to.compose(&from.inverse())
    }

    /// Sim(3) action on a world-to-camera pose: returns the pose observing
    /// the world transformed by `x -> s R x + t` identically.
    pub fn transform_world(&self, scale: f64, rotation: &Matrix3<f64>, translation: &Vector3<f64>) -> Pose {
        let r = self.rotation() * rotation.transpose();
        let t = scale * self.trans - r * translation;
        Pose::from_rotation(&r, t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pose_strategy() -> impl Strategy<Value = Pose> {
        (prop::array::uniform3(-2.0f64..2.0), prop::array::uniform3(-5.0f64..5.0))
            .prop_map(|(r, t)| Pose::new(Vector3::from(r), Vector3::from(t)))
    }

    fn close(a: &Pose, b: &Pose, tol: f64) -> bool {
        (a.to_matrix() - b.to_matrix()).abs().max() < tol
    }

    #[test]
    fn inverse_and_relative_identities() {
        let p = Pose::new(Vector3::new(0.3, -0.2, 1.1), Vector3::new(1.0, 2.0, -3.0));
        assert!(close(&p.compose(&p.inverse()), &Pose::identity(), 1e-12));
        assert!(close(&Pose::relative(&p, &p), &Pose::identity(), 1e-12));
    }

    #[test]
    fn look_at_points_optical_axis_at_target() {
        let pose = Pose::look_at(Vector3::new(3.0, 1.0, -2.0), Vector3::new(0.0, 0.5, 1.0), Vector3::new(0.0, -1.0, 0.0));
        let t = pose.transform(&Vector3::new(0.0, 0.5, 1.0));
        assert!(t.x.abs() < 1e-12 && t.y.abs() < 1e-12 && t.z > 0.0);
        assert!((pose.center() - Vector3::new(3.0, 1.0, -2.0)).norm() < 1e-12);
        let ahead = Pose::look_at(Vector3::zeros(), Vector3::z(), -Vector3::y());
        assert!(ahead.rotation().relative_eq(&Matrix3::identity(), 1e-15, 1e-15));
    }

    proptest! {
        #[test]
        fn matches_homogeneous_matrices(a in pose_strategy(), b in pose_strategy()) {
            let composed = a.compose(&b).to_matrix();
            prop_assert!((composed - a.to_matrix() * b.to_matrix()).abs().max() < 1e-12);
            let inv = a.inverse().to_matrix();
            prop_assert!((inv - a.to_matrix().try_inverse().unwrap()).abs().max() < 1e-12);
            let rel = Pose::relative(&a, &b).to_matrix();
            let oracle = b.to_matrix().try_inverse().unwrap() * a.to_matrix();
            prop_assert!((rel - oracle).abs().max() < 1e-11);
        }

        #[test]
        fn compose_is_associative(a in pose_strategy(), b in pose_strategy(), c in pose_strategy()) {
            prop_assert!(close(&a.compose(&b).compose(&c), &a.compose(&b.compose(&c)), 1e-11));
        }

        #[test]
        fn motion_maps_camera_frames(a in pose_strategy(), b in pose_strategy(), x in prop::array::uniform3(-3.0f64..3.0)) {
            let x = Vector3::from(x);
            let m = Pose::motion_between(&a, &b);
            prop_assert!((m.transform(&a.transform(&x)) - b.transform(&x)).norm() < 1e-10);
        }

        #[test]
        fn world_similarity_preserves_observations(a in pose_strategy(), x in prop::array::uniform3(-3.0f64..3.0), s in 0.2f64..4.0, g in pose_strategy()) {
            let x = Vector3::from(x);
            let r = g.rotation();
            let moved = a.transform_world(s, &r, &g.trans);
            let cam = a.transform(&x) * s;
            prop_assert!((moved.transform(&(s * r * x + g.trans)) - cam).norm() < 1e-9);
        }
    }
}
