//! Sliding-window camera initialization from depth and static tracklets,
//! compared with the true trajectory.

use dynrecon::evalkit::{ate, rpe};
use dynrecon::geometry::Intrinsics;
use dynrecon::pipeline::{stage1_init, PipelineConfig};
use dynrecon::synth::{self, CameraPath, CorruptionSpec, SceneSpec};

fn main() -> dynrecon::Result<()> {
    let mut spec = SceneSpec { frame_count: 10, intrinsics: Intrinsics::centered(42.0, 42.0, 48, 36), grid_n: 24, ..SceneSpec::standard() };
    if let CameraPath::Orbit { sweep_deg, .. } = &mut spec.camera_path {
        *sweep_deg = 30.0;
    }
    let (clean, gt) = synth::generate(&spec)?;
    let noise = CorruptionSpec { depth_scale_jitter_sigma: 0.05, ..Default::default() };
    for (name, bundle) in [("clean", clean.clone()), ("scale jitter", synth::corrupt(&clean, &noise, 1)?.0)] {
        let (traj, report) = stage1_init(&bundle, &PipelineConfig::default())?;
        let r = rpe(&traj, &gt.trajectory, 1)?;
        println!(
            "{name}: {} windows, {} iterations, ATE {:.2e}, RPE {:.2e} / {:.3} deg, fx {:.2} (true {:.2})",
            report.runs,
            report.iterations,
            ate(&traj, &gt.trajectory)?,
            r.trans,
            r.rot,
            traj.intrinsics.fx,
            gt.trajectory.intrinsics.fx
        );
    }
    Ok(())
}
