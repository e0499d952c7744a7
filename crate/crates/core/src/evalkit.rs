//! Trajectory and depth metrics: Sim(3) alignment, ATE, RPE, depth
//! accuracy after global alignment, and multi-view self-consistency.

use nalgebra::{Matrix2, Matrix3, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::cues::{bilinear_footprint, DepthFrame, MaskFrame};
use crate::energy::DynamicTrajectorySet;
use crate::error::{Error, Result};
use crate::geometry::{so3, Pose, Trajectory, DEPTH_EPSILON};

/// `x -> scale * rotation * x + translation`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlignmentResult {
    pub scale: f64,
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
    pub residual_rms: f64,
}

impl AlignmentResult {
    pub fn identity() -> Self {
        Self { scale: 1.0, rotation: Matrix3::identity(), translation: Vector3::zeros(), residual_rms: 0.0 }
    }

    pub fn apply(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.scale * self.rotation * p + self.translation
    }

    /// Root mean square of `target - apply(source)`.
    pub fn rms(&self, source: &[Vector3<f64>], target: &[Vector3<f64>]) -> f64 {
        let n = source.len().max(1) as f64;
        (source.iter().zip(target).map(|(s, t)| (t - self.apply(s)).norm_squared()).sum::<f64>() / n).sqrt()
    }
}

const RANK_TOLERANCE: f64 = 1e-12;

/// Least-squares similarity (or rigid, without scale) transform taking
/// `source` onto `target`, in closed form from the cross-covariance SVD.
pub fn umeyama(source: &[Vector3<f64>], target: &[Vector3<f64>], with_scale: bool) -> Result<AlignmentResult> {
    if source.len() != target.len() {
        return Err(Error::LengthMismatch { left: source.len(), right: target.len() });
    }
    if source.len() < 3 {
        return Err(Error::DegenerateConfiguration(format!("need at least 3 point pairs, got {}", source.len())));
    }
    let (result, singular) = umeyama_inner(source, target, with_scale);
    if !(singular[1] > RANK_TOLERANCE * singular[0].max(f64::MIN_POSITIVE)) {
        return Err(Error::DegenerateConfiguration("points are collinear or coincident".into()));
    }
    Ok(result)
}

/// [`umeyama`] that tolerates collinear input (the rotation about the line
/// is then arbitrary) and coincident input (identity rotation and scale).
pub fn umeyama_relaxed(source: &[Vector3<f64>], target: &[Vector3<f64>], with_scale: bool) -> AlignmentResult {
    umeyama_inner(source, target, with_scale).0
}

fn umeyama_inner(source: &[Vector3<f64>], target: &[Vector3<f64>], with_scale: bool) -> (AlignmentResult, Vector3<f64>) {
    let n = source.len() as f64;
    let mu_s = source.iter().sum::<Vector3<f64>>() / n;
    let mu_t = target.iter().sum::<Vector3<f64>>() / n;
    let var_s = source.iter().map(|s| (s - mu_s).norm_squared()).sum::<f64>() / n;
    let mut cov = Matrix3::zeros();
    for (s, t) in source.iter().zip(target) {
        cov += (t - mu_t) * (s - mu_s).transpose();
    }
    cov /= n;
    let svd = cov.svd(true, true);
    let (u, v_t) = (svd.u.unwrap(), svd.v_t.unwrap());
    let mut d = Matrix3::identity();
    if (u.determinant() * v_t.determinant()) < 0.0 {
        d[(2, 2)] = -1.0;
    }
    let mut sv = svd.singular_values;
    // nalgebra does not promise an order; sort descending for the rank test.
    let mut order = [0, 1, 2];
    order.sort_by(|&a, &b| sv[b].total_cmp(&sv[a]));
    let sorted = Vector3::new(sv[order[0]], sv[order[1]], sv[order[2]]);
    // The reflection guard flips the smallest singular direction.
    let smallest = order[2];
    let mut dd = Matrix3::identity();
    dd[(smallest, smallest)] = d[(2, 2)];
    let rotation = if var_s > 0.0 { u * dd * v_t } else { Matrix3::identity() };
    sv[smallest] *= dd[(smallest, smallest)];
    let scale = if with_scale && var_s > 0.0 { sv.sum() / var_s } else { 1.0 };
    let translation = mu_t - scale * rotation * mu_s;
    let mut r = AlignmentResult { scale, rotation, translation, residual_rms: 0.0 };
    r.residual_rms = r.rms(source, target);
    (r, sorted)
}

fn check_lengths(a: usize, b: usize) -> Result<()> {
    if a == b {
        Ok(())
    } else {
        Err(Error::LengthMismatch { left: a, right: b })
    }
}

/// Sim(3) alignment of estimated camera centers onto the reference ones.
pub fn align_trajectories(estimated: &Trajectory, reference: &Trajectory) -> Result<AlignmentResult> {
    check_lengths(estimated.len(), reference.len())?;
    Ok(umeyama_relaxed(&estimated.centers(), &reference.centers(), true))
}

/// Absolute trajectory error: RMSE of camera centers after Sim(3)
/// alignment.
pub fn ate(estimated: &Trajectory, reference: &Trajectory) -> Result<f64> {
    Ok(align_trajectories(estimated, reference)?.residual_rms)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rpe {
    pub trans: f64,
    /// Degrees.
    pub rot: f64,
}

/// Relative pose error over frame offset `delta`, using camera-to-world
/// poses `P` and relative motions `P_t^-1 P_{t+delta}`. Estimated relative
/// translations are multiplied by the scale of the ATE alignment.
pub fn rpe(estimated: &Trajectory, reference: &Trajectory, delta: usize) -> Result<Rpe> {
    check_lengths(estimated.len(), reference.len())?;
    if delta == 0 || estimated.len() <= delta {
        return Err(Error::DegenerateConfiguration(format!("delta {delta} with {} frames", estimated.len())));
    }
    let scale = align_trajectories(estimated, reference)?.scale;
    let rel = |poses: &[Pose], t: usize| poses[t].compose(&poses[t + delta].inverse());
    let (mut st, mut sr) = (0.0, 0.0);
    let m = estimated.len() - delta;
    for t in 0..m {
        let mut re = rel(&estimated.poses, t);
        re.trans *= scale;
        let e = rel(&reference.poses, t).inverse().compose(&re);
        st += e.trans.norm_squared();
        sr += so3::angle_of(&e.rotation()).to_degrees().powi(2);
    }
    Ok(Rpe { trans: (st / m as f64).sqrt(), rot: (sr / m as f64).sqrt() })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlignMode {
    /// Scale and shift in disparity space.
    #[default]
    ScaleShift,
    /// Scale in depth space.
    Scale,
}

/// Global alignment parameters: `a` and `b` of `a / d + b` in scale-shift
/// mode, or the depth scale `a` (with `b = 0`) in scale mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DepthAlignment {
    pub mode: AlignMode,
    pub a: f64,
    pub b: f64,
}

impl DepthAlignment {
    pub fn apply(&self, d: f64) -> Option<f64> {
        let out = match self.mode {
            AlignMode::Scale => self.a * d,
            AlignMode::ScaleShift => 1.0 / (self.a / d + self.b),
        };
        (out.is_finite() && out > 0.0).then_some(out)
    }
}

fn pairs<'a>(pred: &'a [DepthFrame], gt: &'a [DepthFrame]) -> impl Iterator<Item = (f64, f64)> + 'a {
    pred.iter().zip(gt).flat_map(|(p, g)| {
        p.values.iter().zip(&p.valid).zip(g.values.iter().zip(&g.valid)).filter(|((_, pv), (_, gv))| **pv && **gv).map(|((p, _), (g, _))| (*p, *g))
    })
}

/// One alignment for the whole sequence, fitted by least squares.
pub fn fit_depth_alignment(pred: &[DepthFrame], gt: &[DepthFrame], mode: AlignMode) -> Result<DepthAlignment> {
    check_lengths(pred.len(), gt.len())?;
    let count = pairs(pred, gt).count();
    if count < 2 {
        return Err(Error::InsufficientOverlap { found: count, required: 2 });
    }
    match mode {
        AlignMode::Scale => {
            let (num, den) = pairs(pred, gt).fold((0.0, 0.0), |(n, d), (p, g)| (n + p * g, d + p * p));
            Ok(DepthAlignment { mode, a: num / den, b: 0.0 })
        }
        AlignMode::ScaleShift => {
            let mut ata = Matrix2::zeros();
            let mut atb = Vector2::zeros();
            for (p, g) in pairs(pred, gt) {
                let row = Vector2::new(1.0 / p, 1.0);
                ata += row * row.transpose();
                atb += row / g;
            }
            let x = ata
                .cholesky()
                .map(|c| c.solve(&atb))
                .ok_or_else(|| Error::DegenerateConfiguration("predicted disparity is constant".into()))?;
            Ok(DepthAlignment { mode, a: x[0], b: x[1] })
        }
    }
}

/// Applies an alignment to every valid pixel; pixels whose aligned
/// disparity is not positive become invalid.
pub fn apply_depth_alignment(pred: &[DepthFrame], alignment: &DepthAlignment) -> Vec<DepthFrame> {
    pred.iter()
        .map(|d| {
            let values = d.values.iter().zip(&d.valid).map(|(v, ok)| if *ok { alignment.apply(*v).unwrap_or(0.0) } else { 0.0 }).collect();
            DepthFrame::from_values(d.frame_index, d.width, d.height, values)
        })
        .collect()
}

pub fn align_depth(pred: &[DepthFrame], gt: &[DepthFrame], mode: AlignMode) -> Result<(Vec<DepthFrame>, DepthAlignment)> {
    let a = fit_depth_alignment(pred, gt, mode)?;
    Ok((apply_depth_alignment(pred, &a), a))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DepthMetrics {
    pub abs_rel: f64,
    /// Percent of pixels with `max(p/g, g/p) < 1.25`.
    pub delta_125: f64,
    pub pixels: usize,
}

/// Accuracy over pixels valid in both sequences.
pub fn depth_metrics(pred: &[DepthFrame], gt: &[DepthFrame]) -> DepthMetrics {
    let (mut rel, mut inl, mut n) = (0.0, 0usize, 0usize);
    for (p, g) in pairs(pred, gt) {
        rel += (p - g).abs() / g;
        inl += ((p / g).max(g / p) < 1.25) as usize;
        n += 1;
    }
    if n == 0 {
        return DepthMetrics { abs_rel: 0.0, delta_125: 0.0, pixels: 0 };
    }
    DepthMetrics { abs_rel: rel / n as f64, delta_125: 100.0 * inl as f64 / n as f64, pixels: n }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelfConsistency {
    pub sc: f64,
    /// Percent of comparisons under each threshold, in the given order.
    pub inliers: Vec<f64>,
    pub comparisons: usize,
}

/// Warps static pixels of each frame into the next one and compares the
/// warped depth with the next frame's depth sampled bilinearly at the
/// landing location. Landing locations outside the image, or whose
/// footprint is not entirely static and valid, are skipped.
pub fn self_consistency(depth: &[DepthFrame], trajectory: &Trajectory, masks: &[MaskFrame], thresholds: &[f64]) -> SelfConsistency {
    let k = &trajectory.intrinsics;
    let mut errors = Vec::new();
    for t in 0..depth.len().saturating_sub(1) {
        let (src, dst) = (&depth[t], &depth[t + 1]);
        let motion = Pose::motion_between(&trajectory.poses[t], &trajectory.poses[t + 1]);
        for y in 0..src.height {
            for x in 0..src.width {
                let Some(d) = src.get(x, y) else { continue };
                if !masks[t].is_static(x, y) {
                    continue;
                }
                let pc = motion.transform(&k.backproject(&Vector2::new(x as f64, y as f64), d));
                if pc.z <= DEPTH_EPSILON {
                    continue;
                }
                let Ok(px) = k.project_camera(&pc) else { continue };
                let Some(fp) = bilinear_footprint(dst.width, dst.height, &px) else { continue };
                if fp.iter().any(|&(xx, yy, _)| !masks[t + 1].is_static(xx, yy)) {
                    continue;
                }
                let Some(target) = dst.sample(&px) else { continue };
                errors.push((pc.z - target).abs() / target);
            }
        }
    }
    let n = errors.len();
    if n == 0 {
        return SelfConsistency { sc: 0.0, inliers: vec![0.0; thresholds.len()], comparisons: 0 };
    }
    SelfConsistency {
        sc: errors.iter().sum::<f64>() / n as f64,
        inliers: thresholds.iter().map(|&tau| 100.0 * errors.iter().filter(|e| **e < tau).count() as f64 / n as f64).collect(),
        comparisons: n,
    }
}

/// RMS distance between estimated and reference dynamic points over
/// samples valid in both, after mapping the estimate with `alignment`.
pub fn dynamic_rms(estimated: &DynamicTrajectorySet, reference: &DynamicTrajectorySet, alignment: &AlignmentResult) -> Option<f64> {
    let (mut s, mut n) = (0.0, 0usize);
    for (id, est) in &estimated.tracks {
        let Some(r) = reference.tracks.get(id) else { continue };
        for t in 0..est.points.len().min(r.points.len()) {
            if let (Some(e), Some(g)) = (est.at(t), r.at(t)) {
                s += (alignment.apply(e) - g).norm_squared();
                n += 1;
            }
        }
    }
    (n > 0).then(|| (s / n as f64).sqrt())
}

/// The full report written as `metrics.json`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub ate: f64,
    pub rpe_trans: f64,
    pub rpe_rot: f64,
    pub abs_rel: f64,
    pub delta_125: f64,
    pub sc: f64,
    pub delta_sc_001: f64,
    pub delta_sc_005: f64,
}

/// Trajectory metrics against the reference, depth metrics after global
/// alignment, and self-consistency of the estimated depth under the
/// estimated poses.
pub fn evaluate(
    est_trajectory: &Trajectory,
    est_depth: &[DepthFrame],
    ref_trajectory: &Trajectory,
    ref_depth: &[DepthFrame],
    masks: &[MaskFrame],
    mode: AlignMode,
) -> Result<MetricsReport> {
    let ate = ate(est_trajectory, ref_trajectory)?;
    let rpe = rpe(est_trajectory, ref_trajectory, 1)?;
    let (aligned, _) = align_depth(est_depth, ref_depth, mode)?;
    let dm = depth_metrics(&aligned, ref_depth);
    let sc = self_consistency(est_depth, est_trajectory, masks, &[0.01, 0.05]);
    Ok(MetricsReport {
        ate,
        rpe_trans: rpe.trans,
        rpe_rot: rpe.rot,
        abs_rel: dm.abs_rel,
        delta_125: dm.delta_125,
        sc: sc.sc,
        delta_sc_001: sc.inliers[0],
        delta_sc_005: sc.inliers[1],
    })
}
