//! Rotation vectors (axis-angle) and the SO(3) exponential / logarithm.

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};

/// Below this angle Rodrigues' formula switches to its first-order expansion.
pub const SMALL_ANGLE: f64 = 1e-8;

/// Below this angle the Jacobian coefficients use their Taylor series.
const SERIES_ANGLE: f64 = 1e-2;

/// Orthonormality tolerance accepted by [`matrix_to_rotvec`].
pub const ROTATION_TOLERANCE: f64 = 1e-6;

pub fn hat(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

pub fn vee(m: &Matrix3<f64>) -> Vector3<f64> {
    Vector3::new(m[(2, 1)], m[(0, 2)], m[(1, 0)])
}

/// Rodrigues' formula.
pub fn rotvec_to_matrix(rotvec: &Vector3<f64>) -> Matrix3<f64> {
    let theta = rotvec.norm();
    let w = hat(rotvec);
    if theta < SMALL_ANGLE {
        return Matrix3::identity() + w + 0.5 * w * w;
    }
    let half = 0.5 * theta;
    let a = theta.sin() / theta;
    // 1 - cos(theta) written without cancellation
    let s = half.sin() / theta;
    let b = 2.0 * s * s;
    Matrix3::identity() + a * w + b * w * w
}

/// Inverse of [`rotvec_to_matrix`]; the result has norm in `[0, pi]`.
///
/// At exactly `pi` the axis sign is fixed so that its first nonzero
/// component is positive.
pub fn matrix_to_rotvec(r: &Matrix3<f64>) -> Result<Vector3<f64>> {
    let ortho = (r.transpose() * r - Matrix3::identity()).abs().max();
    let det = r.determinant();
    if !ortho.is_finite() || ortho > ROTATION_TOLERANCE || (det - 1.0).abs() > ROTATION_TOLERANCE
    {
        return Err(Error::NotARotation {
            error: ortho.max((det - 1.0).abs()),
        });
    }
    Ok(log_unchecked(r))
}

pub(crate) fn log_unchecked(r: &Matrix3<f64>) -> Vector3<f64> {
    let cos = ((r.trace() - 1.0) * 0.5).clamp(-1.0, 1.0);
    let skew = vee(&(r - r.transpose())) * 0.5; // sin(theta) * axis
    let sin = skew.norm();
    let theta = sin.atan2(cos);
    if theta < SMALL_ANGLE {
        return skew;
    }
    if theta < std::f64::consts::PI - 1e-3 {
        return skew * (theta / sin);
    }
    // Near pi: recover the axis from the symmetric part, a a^T = (S - cos I) / (1 - cos).
    let sym = (r + r.transpose()) * 0.5;
    let outer = (sym - Matrix3::identity() * cos) / (1.0 - cos);
    let mut best = 0;
    for i in 1..3 {
        if outer[(i, i)] > outer[(best, best)] {
            best = i;
        }
    }
    let mut axis = outer.column(best).into_owned() / outer[(best, best)].max(0.0).sqrt();
    axis /= axis.norm();
    if sin > 1e-12 {
        if axis.dot(&skew) < 0.0 {
            axis = -axis;
        }
    } else {
        axis = canonical_sign(axis);
    }
    axis * theta
}

fn canonical_sign(axis: Vector3<f64>) -> Vector3<f64> {
    for i in 0..3 {
        if axis[i].abs() > 1e-12 {
            return if axis[i] < 0.0 { -axis } else { axis };
        }
    }
    axis
}

/// Wraps a rotation vector to the equivalent one with norm in `[0, pi]`.
pub fn canonicalize(rotvec: &Vector3<f64>) -> Vector3<f64> {
    if rotvec.norm() < std::f64::consts::PI {
        *rotvec
    } else {
        log_unchecked(&rotvec_to_matrix(rotvec))
    }
}

/// Left Jacobian of SO(3): `exp(w + d) ~ exp(J_l(w) d) exp(w)`.
pub fn left_jacobian(rotvec: &Vector3<f64>) -> Matrix3<f64> {
    let theta = rotvec.norm();
    let w = hat(rotvec);
    let t2 = theta * theta;
    let (a, b) = if theta < SERIES_ANGLE {
        (
            0.5 - t2 / 24.0 + t2 * t2 / 720.0,
            1.0 / 6.0 - t2 / 120.0 + t2 * t2 / 5040.0,
        )
    } else {
        let s = (0.5 * theta).sin() / theta;
        (2.0 * s * s, (theta - theta.sin()) / (t2 * theta))
    };
    Matrix3::identity() + a * w + b * w * w
}

/// Right Jacobian, `J_r(w) = J_l(-w)`.
pub fn right_jacobian(rotvec: &Vector3<f64>) -> Matrix3<f64> {
    left_jacobian(&-rotvec)
}

pub fn left_jacobian_inverse(rotvec: &Vector3<f64>) -> Matrix3<f64> {
    let theta = rotvec.norm();
    let w = hat(rotvec);
    let t2 = theta * theta;
    let c = if theta < SERIES_ANGLE {
        1.0 / 12.0 + t2 / 720.0 + t2 * t2 / 30240.0
    } else {
        1.0 / t2 - (1.0 + theta.cos()) / (2.0 * theta * theta.sin())
    };
    Matrix3::identity() - 0.5 * w + c * w * w
}

pub fn right_jacobian_inverse(rotvec: &Vector3<f64>) -> Matrix3<f64> {
    left_jacobian_inverse(&-rotvec)
}

/// Jacobian of `R(w) v` with respect to `w`.
pub fn rotate_jacobian(rotation: &Matrix3<f64>, rotvec: &Vector3<f64>, v: &Vector3<f64>) -> Matrix3<f64> {
    -hat(&(rotation * v)) * left_jacobian(rotvec)
}

/// Rotation angle of a matrix in radians.
pub fn angle_of(r: &Matrix3<f64>) -> f64 {
    log_unchecked(r).norm()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    /// Matrix exponential by direct power series, independent of Rodrigues.
    fn series_exp(w: &Matrix3<f64>) -> Matrix3<f64> {
        let mut sum = Matrix3::identity();
        let mut term = Matrix3::identity();
        for k in 1..60 {
            term = term * w / k as f64;
            sum += term;
        }
        sum
    }

    #[test]
    fn zero_is_identity() {
        assert_eq!(rotvec_to_matrix(&Vector3::zeros()), Matrix3::identity());
        assert_eq!(matrix_to_rotvec(&Matrix3::identity()).unwrap(), Vector3::zeros());
    }

    #[test]
    fn quarter_turn_about_x() {
        let r = rotvec_to_matrix(&Vector3::new(PI / 2.0, 0.0, 0.0));
        let y = r * Vector3::y();
        assert!((y - Vector3::z()).norm() < 1e-15);
    }

    #[test]
    fn half_turn_sign_convention() {
        let r = rotvec_to_matrix(&Vector3::new(0.0, 0.0, PI));
        let w = matrix_to_rotvec(&r).unwrap();
        assert!((w.norm() - PI).abs() < 1e-12);
        assert!((w - Vector3::new(0.0, 0.0, PI)).norm() < 1e-12);
        let r = rotvec_to_matrix(&Vector3::new(0.0, 0.0, -PI));
        assert!((matrix_to_rotvec(&r).unwrap() - Vector3::new(0.0, 0.0, PI)).norm() < 1e-12);
    }

    #[test]
    fn rejects_non_rotation() {
        let mut m = Matrix3::identity();
        m[(0, 1)] = 0.1;
        assert!(matches!(matrix_to_rotvec(&m), Err(Error::NotARotation { .. })));
        let reflection = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, -1.0));
        assert!(matrix_to_rotvec(&reflection).is_err());
    }

    #[test]
    fn tiny_angles_are_accurate() {
        for &t in &[1e-12, 1e-9, 1e-7, 1e-5, 1e-3] {
            let w = Vector3::new(0.3, -0.5, 0.8).normalize() * t;
            let r = rotvec_to_matrix(&w);
            assert!((r - series_exp(&hat(&w))).abs().max() < 1e-15);
            let back = matrix_to_rotvec(&r).unwrap();
            assert!((back - w).norm() < 1e-14 * (1.0 + t / 1e-3), "angle {t}");
        }
    }

    #[test]
    fn jacobians_match_finite_differences() {
        let w = Vector3::new(0.4, -1.1, 0.7);
        let r = rotvec_to_matrix(&w);
        let v = Vector3::new(0.2, 1.5, -0.9);
        let analytic = rotate_jacobian(&r, &w, &v);
        let h = 1e-6;
        for j in 0..3 {
            let mut d = Vector3::zeros();
            d[j] = h;
            let fd = (rotvec_to_matrix(&(w + d)) * v - rotvec_to_matrix(&(w - d)) * v) / (2.0 * h);
            assert!((fd - analytic.column(j)).norm() < 1e-8);
        }
        let inv = left_jacobian_inverse(&w) * left_jacobian(&w);
        assert!((inv - Matrix3::identity()).abs().max() < 1e-12);
        let small = Vector3::new(1e-4, 2e-3, -5e-3);
        let inv = right_jacobian_inverse(&small) * right_jacobian(&small);
        assert!((inv - Matrix3::identity()).abs().max() < 1e-14);
    }

    proptest! {
        #[test]
        fn rodrigues_matches_series(x in -3.0f64..3.0, y in -3.0f64..3.0, z in -3.0f64..3.0) {
            let w = Vector3::new(x, y, z);
            let r = rotvec_to_matrix(&w);
            prop_assert!((r - series_exp(&hat(&w))).abs().max() < 1e-10);
            prop_assert!((r.determinant() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn log_round_trip(x in -3.0f64..3.0, y in -3.0f64..3.0, z in -3.0f64..3.0) {
            let w = Vector3::new(x, y, z);
            let r = rotvec_to_matrix(&w);
            let back = matrix_to_rotvec(&r).unwrap();
            prop_assert!(back.norm() <= PI + 1e-12);
            prop_assert!((rotvec_to_matrix(&back) - r).abs().max() < 1e-10);
            let probes = [Vector3::new(1.0, 0.0, 0.0), Vector3::new(0.3, -2.0, 0.5), Vector3::new(-1.0, 1.0, 4.0)];
            for p in probes {
                prop_assert!((rotvec_to_matrix(&back) * p - r * p).norm() < 1e-10);
            }
        }
    }
}
