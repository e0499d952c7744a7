//! Static bundle adjustment with the camera-motion prior.

use std::collections::BTreeMap;
use std::time::Instant;

use super::params::{canonicalize, CameraLayout};
use super::{loss_log, PipelineConfig, StageReport};
use crate::cues::{CueBundle, TrackId};
use crate::energy::{e_ba, e_ba_gradient, e_cam_gradient, StaticPointSet};
use crate::error::Result;
use crate::geometry::{unproject, Trajectory};
use crate::optimizer::{minimize, MinimizeOptions, ParamBlock};

#[derive(Debug, Clone)]
pub struct Stage2Output {
    pub trajectory: Trajectory,
    pub static_points: StaticPointSet,
    pub report: StageReport,
    /// Points removed by the outlier filter.
    pub filtered: usize,
}

/// Lifts each static tracklet at the first visible frame with valid depth.
pub fn init_static_points(bundle: &CueBundle, trajectory: &Trajectory) -> StaticPointSet {
    let mut set = StaticPointSet::default();
    for tr in bundle.static_tracklets() {
        let lifted = tr.observations().find_map(|(t, z)| {
            let d = bundle.depth[t].sample(z)?;
            unproject(z, d, &trajectory.poses[t], &trajectory.intrinsics).ok()
        });
        if let Some(p) = lifted {
            set.points.insert(tr.id, p);
        }
    }
    set
}

/// Jointly refines poses, focal lengths and static points, then drops
/// points whose mean residual is above both the configured percentile of
/// all point means and `cfg.stage2_outlier_floor_px`.
pub fn stage2_ba(bundle: &CueBundle, trajectory: &Trajectory, cfg: &PipelineConfig) -> Result<Stage2Output> {
    let start = Instant::now();
    let mut trajectory = trajectory.clone();
    let mut points = init_static_points(bundle, &trajectory);
    let layout = CameraLayout::new(&trajectory, (1..trajectory.len()).collect(), cfg.freeze_focal);
    let ids: Vec<TrackId> = points.points.keys().copied().collect();
    let mut report = StageReport::new("stage2");

    let mut scratch_traj = trajectory.clone();
    let mut scratch_pts = points.clone();
    let w_cam = cfg.weights.w_cam;
    let objective = |blocks: &[ParamBlock]| {
        layout.apply(&mut scratch_traj, &blocks[0], &blocks[1]);
        for (p, v) in scratch_pts.points.values_mut().zip(blocks[2].values.chunks_exact(3)) {
            *p = nalgebra::Vector3::new(v[0], v[1], v[2]);
        }
        let (e_ba, mut g_cam, g_pts) = e_ba_gradient(&scratch_traj, &scratch_pts, &bundle.tracklets, cfg.weights.huber_px);
        let (e_cam, g_prior) = e_cam_gradient(&scratch_traj, cfg.weights.epsilon_cam);
        for (a, b) in g_cam.poses.iter_mut().zip(&g_prior.poses) {
            *a += w_cam * b;
        }
        let [gp, gf] = layout.gradients(&scratch_traj, &g_cam);
        let mut gx = Vec::with_capacity(3 * ids.len());
        for id in &ids {
            gx.extend(g_pts.get(id).map_or([0.0; 3], |g| [g.x, g.y, g.z]));
        }
        (e_ba + w_cam * e_cam, vec![gp, gf, gx])
    };
    let [bp, bf] = layout.blocks(&trajectory);
    let point_values: Vec<f64> = points.points.values().flat_map(|p| [p.x, p.y, p.z]).collect();
    let blocks = vec![bp, bf, ParamBlock::new("static_points", point_values)];
    let options = MinimizeOptions { csv: loss_log(cfg, "stage2.csv"), label: "stage2" };
    let (best, history) = minimize(objective, blocks, &cfg.stage2, &options)?;
    report.record(&history);

    layout.apply(&mut trajectory, &best[0], &best[1]);
    canonicalize(&mut trajectory);
    for (p, v) in points.points.values_mut().zip(best[2].values.chunks_exact(3)) {
        *p = nalgebra::Vector3::new(v[0], v[1], v[2]);
    }
    let before = points.len();
    let points = filter_static_points(&trajectory, points, bundle, cfg);
    report.wall_seconds = start.elapsed().as_secs_f64();
    Ok(Stage2Output { trajectory, filtered: before - points.len(), static_points: points, report })
}

/// Mean reprojection residual of each static point.
pub fn mean_residuals(trajectory: &Trajectory, points: &StaticPointSet, bundle: &CueBundle) -> BTreeMap<TrackId, f64> {
    let rep = e_ba(trajectory, points, &bundle.tracklets, None);
    let mut acc: BTreeMap<TrackId, (f64, usize)> = BTreeMap::new();
    for r in &rep.residuals {
        let e = acc.entry(r.track).or_default();
        e.0 += r.value;
        e.1 += 1;
    }
    acc.into_iter().map(|(id, (s, n))| (id, s / n as f64)).collect()
}

fn filter_static_points(trajectory: &Trajectory, mut points: StaticPointSet, bundle: &CueBundle, cfg: &PipelineConfig) -> StaticPointSet {
    let means = mean_residuals(trajectory, &points, bundle);
    let mut sorted: Vec<f64> = means.values().copied().collect();
    if sorted.is_empty() {
        return points;
    }
    sorted.sort_by(f64::total_cmp);
    let threshold = percentile(&sorted, cfg.stage2_outlier_percentile).max(cfg.stage2_outlier_floor_px);
    points.points.retain(|id, _| means.get(id).is_none_or(|m| *m <= threshold));
    points
}

/// Nearest-rank percentile of sorted values, `q` in `[0, 1]`.
pub(crate) fn percentile(sorted: &[f64], q: f64) -> f64 {
    let rank = (q * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}
