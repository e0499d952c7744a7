//! Camera initialization over sliding windows of frames.

use std::time::Instant;

use super::{loss_log, NewFrameInit, PipelineConfig, StageReport};
use crate::cues::{CueBundle, Tracklet};
use crate::energy::InitTerms;
use crate::error::{Error, Result};
use crate::geometry::{Pose, Trajectory};
use crate::optimizer::{minimize, MinimizeOptions, ParamBlock};

use super::params::{canonicalize, CameraLayout};

/// Estimates poses and focal lengths from depth-backed correspondences of
/// static tracklets.
///
/// Windows grow from frames `0..2` up to `cfg.window` frames and then slide
/// one frame at a time, so every window adds exactly one frame, initialized
/// according to `cfg.new_frame_init`. The other frames start from the
/// current estimates. The first frame of every window is held fixed so the
/// window cannot drift as a rigid body; for the first windows that is frame
/// 0, which stays at the identity. Focal lengths are held fixed in a
/// two-frame warm-up window.
pub fn stage1_init(bundle: &CueBundle, cfg: &PipelineConfig) -> Result<(Trajectory, StageReport)> {
    let start = Instant::now();
    let n = bundle.frame_count();
    if n < 2 {
        return Err(Error::DegenerateConfiguration(format!("need at least 2 frames, found {n}")));
    }
    let w = cfg.window.clamp(2, n);
    let statics: Vec<Tracklet> = bundle.static_tracklets().cloned().collect();
    let mut trajectory = Trajectory::identity(n, bundle.intrinsics);
    let mut report = StageReport::new("stage1");

    let windows = (2..w).map(|end| 0..end).chain((0..=n - w).map(|s| s..s + w));
    for frames in windows {
        let (first, new) = (frames.start, frames.end - 1);
        trajectory.poses[new] = new_frame_pose(&trajectory, new, cfg.new_frame_init);
        let terms = InitTerms::build(&bundle.depth, &statics, cfg.window, frames.clone());
        let found = terms.tracklet_count(&statics, cfg.window, frames.clone());
        if found < cfg.min_static_tracks {
            return Err(Error::InsufficientStaticTracks {
                start: first,
                end: new,
                found,
                required: cfg.min_static_tracks,
            });
        }

        // A two-frame warm-up window holds one relative motion, which
        // barely constrains the focal lengths.
        let hold_focal = cfg.freeze_focal || (frames.len() < 3 && frames.len() < w);
        let layout = CameraLayout::new(&trajectory, frames.clone().skip(1).collect(), hold_focal);
        let mut scratch = trajectory.clone();
        let objective = |blocks: &[ParamBlock]| {
            layout.apply(&mut scratch, &blocks[0], &blocks[1]);
            let (e, g) = terms.gradient(&scratch);
            let [gp, gf] = layout.gradients(&scratch, &g);
            (e, vec![gp, gf])
        };
        let options = MinimizeOptions { csv: loss_log(cfg, &format!("stage1_frames{first:04}_{new:04}.csv")), label: "stage1" };
        let (best, history) = minimize(objective, layout.blocks(&trajectory).to_vec(), &cfg.stage1, &options)?;
        layout.apply(&mut trajectory, &best[0], &best[1]);
        report.record(&history);
    }
    canonicalize(&mut trajectory);
    report.wall_seconds = start.elapsed().as_secs_f64();
    Ok((trajectory, report))
}

fn new_frame_pose(trajectory: &Trajectory, t: usize, init: NewFrameInit) -> Pose {
    let prev = &trajectory.poses[t - 1];
    match init {
        NewFrameInit::ConstantVelocity if t >= 2 => Pose::motion_between(&trajectory.poses[t - 2], prev).compose(prev),
        _ => *prev,
    }
}
