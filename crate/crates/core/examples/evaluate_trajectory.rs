//! Trajectory and depth metrics for a similarity-transformed, noisy copy of
//! a ground truth.

use dynrecon::cues::DepthFrame;
use dynrecon::evalkit::{align_depth, align_trajectories, depth_metrics, rpe, AlignMode};
use dynrecon::geometry::{rotvec_to_matrix, Pose, Trajectory};
use dynrecon::synth::{self, SceneSpec};
use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> dynrecon::Result<()> {
    let (_, gt) = synth::generate(&SceneSpec::standard())?;
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let (s, r, t) = (0.4, rotvec_to_matrix(&Vector3::new(0.3, -1.0, 0.2)), Vector3::new(1.0, 2.0, -3.0));
    let poses = gt
        .trajectory
        .poses
        .iter()
        .map(|p| {
            let noise = Pose::new(Vector3::from_fn(|_, _| rng.random_range(-0.002..0.002)), Vector3::from_fn(|_, _| rng.random_range(-0.01..0.01)));
            noise.compose(&p.transform_world(s, &r, &t))
        })
        .collect();
    let est = Trajectory::new(poses, gt.trajectory.intrinsics);
    let align = align_trajectories(&est, &gt.trajectory)?;
    println!("Sim(3) scale {:.4} (expected {:.4}), ATE {:.4}", align.scale, 1.0 / s, align.residual_rms);
    for delta in [1, 5] {
        let e = rpe(&est, &gt.trajectory, delta)?;
        println!("RPE over {delta} frames: {:.4} / {:.3} deg", e.trans, e.rot);
    }

    // Depth predicted up to an affine map in disparity, plus noise.
    let pred: Vec<DepthFrame> = gt
        .depth
        .iter()
        .map(|d| {
            let values = d.values.iter().map(|v| if *v > 0.0 { 1.0 / (2.0 / v + 0.1) * (1.0 + rng.random_range(-0.05..0.05)) } else { 0.0 }).collect();
            DepthFrame::from_values(d.frame_index, d.width, d.height, values)
        })
        .collect();
    let (aligned, a) = align_depth(&pred, &gt.depth, AlignMode::ScaleShift)?;
    let raw = depth_metrics(&pred, &gt.depth);
    let m = depth_metrics(&aligned, &gt.depth);
    println!("disparity fit a {:.3} b {:.3}", a.a, a.b);
    println!("AbsRel {:.4} -> {:.4}, delta<1.25 {:.1}% -> {:.1}%", raw.abs_rel, m.abs_rel, raw.delta_125, m.delta_125);
    Ok(())
}
