mod common;

use common::{noisy, small_spec, small_static_spec};
use dynrecon::cues::CueBundle;
use dynrecon::energy::{e_arap, DynamicTrajectorySet, StaticPointSet};
use dynrecon::evalkit::{align_trajectories, ate, dynamic_rms, AlignmentResult};
use dynrecon::geometry::{Intrinsics, Pose, Trajectory};
use dynrecon::pipeline::{
    densify, init_dynamic, run_pipeline, stage1_init, stage2_ba, stage3_nrba, Mode, PipelineConfig, SceneSolution,
};
use dynrecon::synth::{self, CameraPath, CorruptionSpec, GroundTruth, Scene, SceneSpec};
use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn generate(spec: &SceneSpec) -> (CueBundle, GroundTruth) {
    synth::generate(spec).unwrap()
}

fn single_threaded<T: Send>(f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap().install(f)
}

/// Mean over tracks and frames of the deviation between estimated and
/// true consecutive-frame displacements.
fn displacement_jitter(est: &DynamicTrajectorySet, gt: &GroundTruth) -> f64 {
    let (mut s, mut n) = (0.0, 0);
    for (id, tr) in &est.tracks {
        let g = &gt.dynamic[id];
        for t in 1..tr.points.len() {
            if let (Some(a), Some(b), Some(ga), Some(gb)) = (tr.at(t - 1), tr.at(t), g.points[t - 1], g.points[t]) {
                s += ((b - a) - (gb - ga)).norm();
                n += 1;
            }
        }
    }
    s / n as f64
}

#[test]
fn stage1_static_camera_stays_at_identity() {
    let spec = SceneSpec {
        camera_path: CameraPath::Line { start: [0.0, -0.3, 0.0], end: [0.0, -0.3, 0.0], target: None },
        ..small_static_spec()
    };
    let (bundle, _) = generate(&spec);
    let (traj, _) = stage1_init(&bundle, &PipelineConfig::default()).unwrap();
    for (t, p) in traj.poses.iter().enumerate() {
        assert!(p.rotvec.norm() < 1e-6 && p.trans.norm() < 1e-6, "frame {t}: {p:?}");
    }
}

#[test]
fn stage2_reduces_perturbed_pose_error() {
    let (bundle, gt) = generate(&small_static_spec());
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut perturbed = gt.trajectory.clone();
    for p in perturbed.poses.iter_mut().skip(1) {
        let r = Vector3::from_fn(|_, _| rng.random_range(-0.01..0.01));
        let d = Vector3::from_fn(|_, _| rng.random_range(-0.03..0.03));
        *p = Pose::new(r, d).compose(p);
    }
    let before = ate(&perturbed, &gt.trajectory).unwrap();
    let out = stage2_ba(&bundle, &perturbed, &PipelineConfig::default()).unwrap();
    let after = ate(&out.trajectory, &gt.trajectory).unwrap();
    assert!(after < 0.5 * before, "ATE {before:.3e} -> {after:.3e}");
}

#[test]
fn stage3_without_dynamic_tracklets_is_empty() {
    let (bundle, gt) = generate(&small_static_spec());
    let out = stage3_nrba(&bundle, &gt.trajectory, &PipelineConfig::default()).unwrap();
    assert!(out.dynamic.is_empty());
    assert_eq!((out.filtered, out.report.runs), (0, 0));
}

#[test]
fn stage3_recovers_a_rigid_object_from_exact_cues() {
    let (bundle, gt) = generate(&small_spec());
    let out = stage3_nrba(&bundle, &gt.trajectory, &PipelineConfig::default()).unwrap();
    let rms = dynamic_rms(&out.dynamic, &gt.dynamic_set(), &AlignmentResult::identity()).unwrap();
    assert!(rms < 1e-3, "dynamic RMS {rms:.3e}");
    let mut truth = gt.dynamic_set();
    truth.neighbors = out.dynamic.neighbors.clone();
    let arap = e_arap(&out.dynamic);
    assert!(arap < 1e-3 * out.dynamic.len() as f64, "E_arap {arap:.3e}, truth {:.3e}", e_arap(&truth));
}

#[test]
fn stage3_reduces_depth_jitter() {
    let (clean, gt) = generate(&small_spec());
    let spec = CorruptionSpec { depth_pixel_noise_sigma: 0.05, ..Default::default() };
    let (bundle, _) = synth::corrupt(&clean, &spec, 1).unwrap();
    let init = displacement_jitter(&init_dynamic(&bundle, &gt.trajectory), &gt);
    let out = stage3_nrba(&bundle, &gt.trajectory, &PipelineConfig::default()).unwrap();
    let after = displacement_jitter(&out.dynamic, &gt);
    assert!(after < init, "jitter {init:.3e} -> {after:.3e}");
}

#[test]
fn densify_is_identity_on_exact_depth_and_undoes_global_scale() {
    let (bundle, gt) = generate(&small_spec());
    let dynamic = gt.dynamic_set();
    let out = densify(&bundle, &gt.trajectory, &gt.static_points, &dynamic, 3);
    assert!(out.supported_count() > 0);
    let mut scaled = bundle.clone();
    let scales = [0.5, 2.0, 1.3, 0.77, 1.9, 0.6, 1.0, 1.45];
    for (d, c) in scaled.depth.iter_mut().zip(scales) {
        d.values.iter_mut().for_each(|v| *v *= c);
    }
    let rescaled = densify(&scaled, &gt.trajectory, &gt.static_points, &dynamic, 3);
    assert_eq!(rescaled.supported, out.supported);
    for t in 0..bundle.frame_count() {
        for (i, ok) in out.supported[t].iter().enumerate() {
            if *ok {
                let truth = bundle.depth[t].values[i];
                assert!((out.depth[t].values[i] - truth).abs() <= 1e-9 * truth, "frame {t} pixel {i}");
                assert!((rescaled.depth[t].values[i] - truth).abs() <= 1e-6 * truth, "frame {t} pixel {i}");
            }
        }
    }
}

fn assert_same_solution(a: &SceneSolution, b: &SceneSolution) {
    assert_eq!(a.trajectory, b.trajectory);
    assert_eq!(a.static_points, b.static_points);
    assert_eq!(a.dynamic, b.dynamic);
    assert_eq!(a.fused_depth, b.fused_depth);
    assert_eq!(a.static_cloud, b.static_cloud);
}

#[test]
fn full_run_is_gauge_fixed_deterministic_and_leaves_stage2_output_alone() {
    let (clean, _) = generate(&small_spec());
    let bundle = noisy(&clean, 0);
    let cfg = PipelineConfig::default();
    let a = single_threaded(|| run_pipeline(&bundle, &cfg).unwrap());
    let b = single_threaded(|| run_pipeline(&bundle, &cfg).unwrap());
    assert_same_solution(&a, &b);
    assert_eq!(a.trajectory.poses[0], Pose::identity());

    let s1 = single_threaded(|| stage1_init(&bundle, &cfg).unwrap().0);
    let s2 = single_threaded(|| stage2_ba(&bundle, &s1, &cfg).unwrap());
    assert_eq!(a.trajectory, s2.trajectory);
    assert_eq!(a.static_points, s2.static_points);
    assert!(a.fused_depth.iter().all(|d| d.values.iter().zip(&d.valid).all(|(v, ok)| !ok || *v > 0.0)));
}

#[test]
fn filters_only_remove() {
    let (clean, _) = generate(&small_spec());
    let bundle = noisy(&clean, 3);
    let (traj, _) = stage1_init(&bundle, &PipelineConfig::default()).unwrap();
    let strict = PipelineConfig { stage2_outlier_floor_px: 0.0, stage3_outlier_floor_px: 0.0, ..Default::default() };
    let loose = PipelineConfig { stage2_outlier_percentile: 1.0, stage3_mad_factor: 1e9, ..strict.clone() };

    let s2_strict = stage2_ba(&bundle, &traj, &strict).unwrap();
    let s2_loose = stage2_ba(&bundle, &traj, &loose).unwrap();
    assert!(s2_strict.filtered > 0 && s2_loose.filtered == 0);
    assert_eq!(s2_strict.trajectory, s2_loose.trajectory);
    assert_eq!(s2_strict.static_points.len() + s2_strict.filtered, s2_loose.static_points.len());
    for (id, p) in &s2_strict.static_points.points {
        assert_eq!(p, &s2_loose.static_points.points[id]);
    }

    let s3_strict = stage3_nrba(&bundle, &s2_loose.trajectory, &strict).unwrap();
    let s3_loose = stage3_nrba(&bundle, &s2_loose.trajectory, &loose).unwrap();
    assert!(s3_strict.filtered > 0 && s3_loose.filtered == 0);
    let mut invalidated = 0;
    for (id, tr) in &s3_strict.dynamic.tracks {
        let other = &s3_loose.dynamic.tracks[id];
        assert_eq!(tr.points, other.points);
        for (a, b) in tr.valid.iter().zip(&other.valid) {
            assert!(!a || *b, "filter revalidated a sample of track {id}");
            invalidated += usize::from(*b && !a);
        }
    }
    assert_eq!(invalidated, s3_strict.filtered);
}

#[test]
fn static_scene_reduces_to_structure_from_motion() {
    let spec = small_static_spec();
    let (bundle, gt) = generate(&spec);
    let sol = run_pipeline(&bundle, &PipelineConfig::default()).unwrap();
    assert!(sol.dynamic.is_empty());
    let align = align_trajectories(&sol.trajectory, &gt.trajectory).unwrap();
    assert!(align.residual_rms < 1e-3, "ATE {:.3e}", align.residual_rms);

    // Fused static points lie on the true surfaces.
    let scene = Scene::new(&spec);
    let n = sol.static_cloud.len();
    assert!(n > 1000);
    let ms = sol.static_cloud.iter().map(|p| scene.distance_to_static(&align.apply(p)).powi(2)).sum::<f64>() / n as f64;
    assert!(ms.sqrt() < 1e-2, "surface RMS {:.3e}", ms.sqrt());
}

#[test]
fn known_intrinsics_keep_focal_fixed() {
    let (clean, _) = generate(&small_static_spec());
    let mut bundle = noisy(&clean, 5);
    bundle.intrinsics = Intrinsics { fx: 40.0, fy: 44.0, ..bundle.intrinsics };
    let cfg = PipelineConfig { freeze_focal: true, mode: Mode::Full, ..Default::default() };
    let sol = run_pipeline(&bundle, &cfg).unwrap();
    assert_eq!((sol.trajectory.intrinsics.fx, sol.trajectory.intrinsics.fy), (40.0, 44.0));
    let free = stage1_init(&bundle, &PipelineConfig::default()).unwrap().0;
    assert_ne!(free.intrinsics.fx, 40.0);
}

#[test]
fn stage1_only_mode_lifts_points_without_refinement() {
    let (bundle, _) = generate(&small_static_spec());
    let cfg = PipelineConfig { mode: Mode::Stage1Only, ..Default::default() };
    let sol = run_pipeline(&bundle, &cfg).unwrap();
    let (s1, _) = stage1_init(&bundle, &cfg).unwrap();
    assert_eq!(sol.trajectory, s1);
    assert_eq!(sol.static_points, dynrecon::pipeline::init_static_points(&bundle, &s1));
    assert_eq!(sol.diagnostics.stages.iter().map(|s| s.name.as_str()).collect::<Vec<_>>(), ["stage1", "stage3"]);
    let _: &Trajectory = &sol.trajectory;
    let _: &StaticPointSet = &sol.static_points;
}
