//! Non-rigid bundle adjustment of dynamic points with the cameras frozen.

use std::collections::BTreeMap;
use std::time::Instant;

use nalgebra::Vector3;

use super::params::CameraLayout;
use super::{loss_log, PipelineConfig, StageReport};
use crate::cues::{CueBundle, TrackId};
use crate::energy::{e_arap_gradient, e_nr, e_nr_gradient, e_smooth_gradient, DynamicTrack, DynamicTrajectorySet};
use crate::error::Result;
use crate::geometry::{unproject, Trajectory};
use crate::optimizer::{minimize, MinimizeOptions, ParamBlock};

#[derive(Debug, Clone)]
pub struct Stage3Output {
    pub dynamic: DynamicTrajectorySet,
    pub report: StageReport,
    /// Samples invalidated by the outlier filter.
    pub filtered: usize,
}

/// Lifts every visible dynamic sample with its depth and the frame pose.
/// Samples without valid depth stay invalid; tracks with no valid sample
/// are left out.
pub fn init_dynamic(bundle: &CueBundle, trajectory: &Trajectory) -> DynamicTrajectorySet {
    let n = bundle.frame_count();
    let mut set = DynamicTrajectorySet::default();
    for tr in bundle.dynamic_tracklets() {
        let mut points = vec![None; n];
        for (t, z) in tr.observations() {
            points[t] = bundle.depth[t]
                .sample(z)
                .and_then(|d| unproject(z, d, &trajectory.poses[t], &trajectory.intrinsics).ok());
        }
        let Some(fill) = points.iter().flatten().next().copied() else { continue };
        let valid = points.iter().map(Option::is_some).collect();
        let points = points.into_iter().map(|p| p.unwrap_or(fill)).collect();
        set.tracks.insert(tr.id, DynamicTrack { points, valid });
        set.instance_of.insert(tr.id, tr.label.instance().unwrap_or(0));
    }
    set
}

/// For every track, the `k` nearest tracks of the same instance, measured
/// at the earliest frame where both are valid. Ties break by id.
pub fn build_knn(dynamic: &DynamicTrajectorySet, k: usize) -> BTreeMap<TrackId, Vec<TrackId>> {
    let mut graph = BTreeMap::new();
    for (&id, track) in &dynamic.tracks {
        let inst = dynamic.instance_of.get(&id);
        let mut cands: Vec<(f64, TrackId)> = dynamic
            .tracks
            .iter()
            .filter(|(&m, _)| m != id && dynamic.instance_of.get(&m) == inst)
            .filter_map(|(&m, other)| {
                let t = (0..track.points.len()).find(|&t| track.valid[t] && other.valid[t])?;
                Some(((track.points[t] - other.points[t]).norm(), m))
            })
            .collect();
        cands.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        graph.insert(id, cands.into_iter().take(k).map(|(_, m)| m).collect());
    }
    graph
}

/// Optimizes the dynamic points under reprojection, smoothness and
/// as-rigid-as-possible terms, then invalidates samples whose residual is
/// above `median + cfg.stage3_mad_factor * MAD` (and the pixel floor).
pub fn stage3_nrba(bundle: &CueBundle, trajectory: &Trajectory, cfg: &PipelineConfig) -> Result<Stage3Output> {
    let start = Instant::now();
    let mut report = StageReport::new("stage3");
    let mut dynamic = init_dynamic(bundle, trajectory);
    if dynamic.is_empty() {
        return Ok(Stage3Output { dynamic, report, filtered: 0 });
    }
    dynamic.neighbors = build_knn(&dynamic, cfg.knn_k);

    let w = cfg.weights;
    let mut scratch = dynamic.clone();
    let objective = |blocks: &[ParamBlock]| {
        unpack(&mut scratch, &blocks[2].values);
        let (e_nr, g_nr) = e_nr_gradient(trajectory, &scratch, &bundle.tracklets, w.huber_px);
        let (e_sm, g_sm) = e_smooth_gradient(&scratch);
        let (e_ar, g_ar) = e_arap_gradient(&scratch);
        let mut g = Vec::with_capacity(blocks[2].values.len());
        for (id, tr) in &scratch.tracks {
            for t in 0..tr.points.len() {
                let mut v = Vector3::zeros();
                if let Some(x) = g_nr.get(id) {
                    v += x[t];
                }
                if let Some(x) = g_sm.get(id) {
                    v += w.w_smooth * x[t];
                }
                if let Some(x) = g_ar.get(id) {
                    v += w.w_arap * x[t];
                }
                g.extend(v.iter());
            }
        }
        (e_nr + w.w_smooth * e_sm + w.w_arap * e_ar, vec![Vec::new(), Vec::new(), g])
    };
    let layout = CameraLayout::new(trajectory, (1..trajectory.len()).collect(), true);
    let [mut poses, mut focal] = layout.blocks(trajectory);
    poses.frozen = true;
    focal.frozen = true;
    let values = dynamic.tracks.values().flat_map(|tr| tr.points.iter().flat_map(|p| [p.x, p.y, p.z])).collect();
    let blocks = vec![poses, focal, ParamBlock::new("dyn_points", values)];
    let options = MinimizeOptions { csv: loss_log(cfg, "stage3.csv"), label: "stage3" };
    let (best, history) = minimize(objective, blocks, &cfg.stage3, &options)?;
    report.record(&history);
    unpack(&mut dynamic, &best[2].values);

    let filtered = filter_samples(trajectory, &mut dynamic, bundle, cfg);
    report.wall_seconds = start.elapsed().as_secs_f64();
    Ok(Stage3Output { dynamic, report, filtered })
}

fn unpack(dynamic: &mut DynamicTrajectorySet, values: &[f64]) {
    let mut chunks = values.chunks_exact(3);
    for tr in dynamic.tracks.values_mut() {
        for p in &mut tr.points {
            let v = chunks.next().expect("dynamic block size");
            *p = Vector3::new(v[0], v[1], v[2]);
        }
    }
}

fn filter_samples(trajectory: &Trajectory, dynamic: &mut DynamicTrajectorySet, bundle: &CueBundle, cfg: &PipelineConfig) -> usize {
    let rep = e_nr(trajectory, dynamic, &bundle.tracklets, None);
    if rep.residuals.is_empty() {
        return 0;
    }
    let values: Vec<f64> = rep.residuals.iter().map(|r| r.value).collect();
    let median = median(values.clone());
    let mad = median_abs_dev(&values, median);
    let threshold = (median + cfg.stage3_mad_factor * mad).max(cfg.stage3_outlier_floor_px);
    let mut count = 0;
    for r in rep.residuals.iter().filter(|r| r.value > threshold) {
        if let Some(tr) = dynamic.tracks.get_mut(&r.track) {
            tr.valid[r.frame] = false;
            count += 1;
        }
    }
    count
}

pub(crate) fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn median_abs_dev(values: &[f64], median_value: f64) -> f64 {
    median(values.iter().map(|v| (v - median_value).abs()).collect())
}
