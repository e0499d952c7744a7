//! Camera motion prior: penalizes changes of the frame-to-frame motion,
//! normalized by the motion magnitude.
//!
//! With `M_t` the motion from camera `t` to camera `t+1` and `r_t` its
//! rotation vector, each interior frame contributes
//! `2|r_t - r_{t-1}| / (|r_{t-1}| + |r_t| + eps)` plus the same expression
//! on the translations of `M_t`.

use nalgebra::{Matrix3, Vector3};

use super::{norm_and_dir3, FrameCache, TrajectoryGradient};
use crate::geometry::{so3, Trajectory};

struct Motion {
    rotvec: Vector3<f64>,
    trans: Vector3<f64>,
    rotation: Matrix3<f64>,
}

fn motions(cache: &[FrameCache]) -> Vec<Motion> {
    cache
        .windows(2)
        .map(|w| {
            let rotation = w[1].rotation * w[0].rotation.transpose();
            Motion {
                rotvec: so3::log_unchecked(&rotation),
                trans: w[1].trans - rotation * w[0].trans,
                rotation,
            }
        })
        .collect()
}

/// `2|b - a| / (|a| + |b| + eps)` and its gradients with respect to `a`, `b`.
fn change_ratio(a: &Vector3<f64>, b: &Vector3<f64>, eps: f64) -> (f64, Vector3<f64>, Vector3<f64>) {
    let (num, u) = norm_and_dir3(&(b - a));
    let (na, da) = norm_and_dir3(a);
    let (nb, db) = norm_and_dir3(b);
    let den = na + nb + eps;
    let e = 2.0 * num / den;
    let ga = 2.0 * (-u * den - num * da) / (den * den);
    let gb = 2.0 * (u * den - num * db) / (den * den);
    (e, ga, gb)
}

pub fn e_cam(trajectory: &Trajectory, epsilon: f64) -> f64 {
    let m = motions(&FrameCache::build(trajectory));
    m.windows(2)
        .map(|w| change_ratio(&w[0].rotvec, &w[1].rotvec, epsilon).0 + change_ratio(&w[0].trans, &w[1].trans, epsilon).0)
        .sum()
}

pub fn e_cam_gradient(trajectory: &Trajectory, epsilon: f64) -> (f64, TrajectoryGradient) {
    let cache = FrameCache::build(trajectory);
    let m = motions(&cache);
    let mut grad = TrajectoryGradient::zeros(trajectory.len());
    // gradients with respect to each motion's rotation vector and translation
    let mut g_rot = vec![Vector3::zeros(); m.len()];
    let mut g_tr = vec![Vector3::zeros(); m.len()];
    let mut energy = 0.0;
    for i in 1..m.len() {
        let (e, ga, gb) = change_ratio(&m[i - 1].rotvec, &m[i].rotvec, epsilon);
        energy += e;
        g_rot[i - 1] += ga;
        g_rot[i] += gb;
        let (e, ga, gb) = change_ratio(&m[i - 1].trans, &m[i].trans, epsilon);
        energy += e;
        g_tr[i - 1] += ga;
        g_tr[i] += gb;
    }
    // chain through M_t = T_{t+1} T_t^-1
    for (t, mo) in m.iter().enumerate() {
        let (from, to) = (&cache[t], &cache[t + 1]);
        let d_r_to = so3::left_jacobian_inverse(&mo.rotvec) * to.jl;
        let d_r_from = -so3::right_jacobian_inverse(&mo.rotvec) * from.jl;
        let rt = mo.rotation * from.trans;
        let d_t_to_rot = so3::hat(&rt) * to.jl;
        let d_t_from_rot = -mo.rotation * so3::hat(&from.trans) * from.jl;

        grad.add_rot(t + 1, &(d_r_to.transpose() * g_rot[t] + d_t_to_rot.transpose() * g_tr[t]));
        grad.add_rot(t, &(d_r_from.transpose() * g_rot[t] + d_t_from_rot.transpose() * g_tr[t]));
        grad.add_trans(t + 1, &g_tr[t]);
        grad.add_trans(t, &(-mo.rotation.transpose() * g_tr[t]));
    }
    (energy, grad)
}
