//! Static bundle adjustment from a perturbed trajectory, with outlier
//! filtering of the lifted points.

use dynrecon::energy::e_ba;
use dynrecon::evalkit::ate;
use dynrecon::geometry::{Intrinsics, Pose};
use dynrecon::pipeline::{init_static_points, stage2_ba, PipelineConfig};
use dynrecon::synth::{self, CameraPath, CorruptionSpec, SceneSpec};
use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> dynrecon::Result<()> {
    let mut spec = SceneSpec { frame_count: 8, intrinsics: Intrinsics::centered(42.0, 42.0, 48, 36), grid_n: 24, ..SceneSpec::standard() };
    if let CameraPath::Orbit { sweep_deg, .. } = &mut spec.camera_path {
        *sweep_deg = 30.0;
    }
    let (clean, gt) = synth::generate(&spec)?;
    let (bundle, _) = synth::corrupt(&clean, &CorruptionSpec { track_noise_sigma_px: 0.3, ..Default::default() }, 4)?;

    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut start = gt.trajectory.clone();
    for p in start.poses.iter_mut().skip(1) {
        let r = Vector3::from_fn(|_, _| rng.random_range(-0.01..0.01));
        let t = Vector3::from_fn(|_, _| rng.random_range(-0.03..0.03));
        *p = Pose::new(r, t).compose(p);
    }
    let before = e_ba(&start, &init_static_points(&bundle, &start), &bundle.tracklets, None);
    let out = stage2_ba(&bundle, &start, &PipelineConfig::default())?;
    let after = e_ba(&out.trajectory, &out.static_points, &bundle.tracklets, None);
    println!("ATE {:.2e} -> {:.2e}", ate(&start, &gt.trajectory)?, ate(&out.trajectory, &gt.trajectory)?);
    println!("mean reprojection {:.3} px -> {:.3} px", before.mean_residual(), after.mean_residual());
    println!(
        "{} points kept, {} filtered, {} iterations ({:?})",
        out.static_points.len(),
        out.filtered,
        out.report.iterations,
        out.report.stops
    );
    Ok(())
}
