#![allow(dead_code)]

pub mod oracles;

use std::path::{Path, PathBuf};

use dynrecon::cues::{CueBundle, DepthFrame, TrackLabel, Tracklet};
use dynrecon::energy::{self, ActiveSet, DynamicTrack, DynamicTrajectorySet, Observations, StaticPointSet, Term, Variables};
use dynrecon::geometry::{project, Intrinsics, Pose, Trajectory};
use dynrecon::synth::{self, CameraPath, CorruptionSpec, SceneSpec};
use nalgebra::{Matrix3, Vector2, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub struct Instance {
    pub vars: Variables,
    pub tracklets: Vec<Tracklet>,
    pub depth: Vec<DepthFrame>,
}

impl Instance {
    pub fn obs(&self) -> Observations<'_> {
        Observations { tracklets: &self.tracklets, depth: &self.depth, epsilon_cam: 1e-6, huber_px: None }
    }
}

fn v3(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> Vector3<f64> {
    Vector3::new(rng.random_range(lo..hi), rng.random_range(lo..hi), rng.random_range(lo..hi))
}

/// A small random problem: 4 frames, a handful of static and dynamic
/// tracklets with noisy observations, and a smooth positive depth field.
pub fn random_instance(seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (w, h) = (40, 30);
    let f = rng.random_range(60.0..90.0);
    let k = Intrinsics { fx: f, fy: f * rng.random_range(0.9..1.1), cx: 20.0, cy: 15.0, width: w, height: h };
    let frames = 4;
    let mut poses = vec![Pose::new(v3(&mut rng, -0.05, 0.05), v3(&mut rng, -0.1, 0.1))];
    for _ in 1..frames {
        let step = Pose::new(v3(&mut rng, -0.08, 0.08), v3(&mut rng, -0.2, 0.2));
        poses.push(step.compose(poses.last().unwrap()));
    }
    let trajectory = Trajectory::new(poses, k);
    let noisy = |rng: &mut ChaCha8Rng, p: &Vector3<f64>, t: usize| {
        project(p, &trajectory.poses[t], &k).unwrap() + Vector2::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0))
    };

    let mut tracklets = Vec::new();
    let mut static_points = StaticPointSet::default();
    for id in 0..6u32 {
        let p = Vector3::new(rng.random_range(-0.8..0.8), rng.random_range(-0.6..0.6), rng.random_range(3.0..5.0));
        let points = (0..frames).map(|t| (t != 2 || id % 2 == 0).then(|| noisy(&mut rng, &p, t))).collect();
        static_points.points.insert(id, p + v3(&mut rng, -0.1, 0.1));
        tracklets.push(Tracklet { id, points, label: TrackLabel::Static });
    }
    let mut dynamic = DynamicTrajectorySet::default();
    for id in 100..105u32 {
        let base = Vector3::new(rng.random_range(-0.5..0.5), rng.random_range(-0.4..0.4), rng.random_range(3.0..4.0));
        let pts: Vec<Vector3<f64>> = (0..frames).map(|_| base + v3(&mut rng, -0.3, 0.3)).collect();
        let valid: Vec<bool> = (0..frames).map(|t| t != 1 || id != 102).collect();
        let points = (0..frames).map(|t| valid[t].then(|| noisy(&mut rng, &pts[t], t))).collect();
        tracklets.push(Tracklet { id, points, label: TrackLabel::Dynamic(1) });
        dynamic.tracks.insert(id, DynamicTrack { points: pts, valid });
        dynamic.instance_of.insert(id, 1);
    }
    let ids: Vec<u32> = dynamic.tracks.keys().copied().collect();
    for &id in &ids {
        let nbrs: Vec<u32> = ids.iter().copied().filter(|&m| m != id && (m + id) % 3 != 0).collect();
        dynamic.neighbors.insert(id, nbrs);
    }
    let depth = (0..frames)
        .map(|t| {
            let values = (0..w * h)
                .map(|i| {
                    let (u, v) = ((i % w) as f64, (i / w) as f64);
                    3.0 + 0.02 * u - 0.01 * v + 0.2 * ((u * 0.3 + t as f64).sin() * (v * 0.2).cos())
                })
                .collect();
            DepthFrame::from_values(t, w, h, values)
        })
        .collect();
    Instance { vars: Variables { trajectory, static_points, dynamic }, tracklets, depth }
}

/// Central finite differences of one term over the active blocks.
pub fn finite_difference(term: Term, inst: &Instance, active: ActiveSet, h: f64) -> Vec<f64> {
    let x0 = inst.vars.pack(active);
    let mut vars = inst.vars.clone();
    let obs = inst.obs();
    (0..x0.len())
        .map(|i| {
            let mut x = x0.clone();
            x[i] = x0[i] + h;
            vars.unpack(active, &x);
            let ep = energy::energy(term, &vars, &obs);
            x[i] = x0[i] - h;
            vars.unpack(active, &x);
            let em = energy::energy(term, &vars, &obs);
            (ep - em) / (2.0 * h)
        })
        .collect()
}

/// `max |a - b| / max |b|`.
pub fn max_relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    let scale = numeric.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-12);
    analytic.iter().zip(numeric).fold(0.0f64, |m, (a, b)| m.max((a - b).abs())) / scale
}

pub fn gradient_error(term: Term, seed: u64, active: ActiveSet) -> f64 {
    let inst = random_instance(seed);
    let analytic = energy::gradient(term, &inst.vars, &inst.obs(), active);
    let numeric = finite_difference(term, &inst, active, 1e-6);
    assert_eq!(analytic.len(), numeric.len());
    max_relative_error(&analytic, &numeric)
}

/// Variable blocks each term depends on.
pub fn active_blocks(term: Term) -> Vec<(&'static str, ActiveSet)> {
    let none = ActiveSet { poses: false, focal: false, static_points: false, dyn_points: false };
    let poses = ActiveSet { poses: true, ..none };
    let focal = ActiveSet { focal: true, ..none };
    let stat = ActiveSet { static_points: true, ..none };
    let dynp = ActiveSet { dyn_points: true, ..none };
    match term {
        Term::Ba => vec![("poses", poses), ("focal", focal), ("static_points", stat)],
        Term::Init(_) => vec![("poses", poses), ("focal", focal)],
        Term::Cam => vec![("poses", poses)],
        Term::Nr | Term::Arap | Term::Smooth => vec![("dyn_points", dynp)],
    }
}

/// The standard scene shrunk to 8 frames of 48x36 pixels, with the orbit
/// cut to 30 degrees so the motion per frame stays moderate.
pub fn small_spec() -> SceneSpec {
    let mut spec = SceneSpec {
        frame_count: 8,
        intrinsics: Intrinsics::centered(42.0, 42.0, 48, 36),
        grid_n: 24,
        track_every: 4,
        ..SceneSpec::standard()
    };
    if let CameraPath::Orbit { sweep_deg, .. } = &mut spec.camera_path {
        *sweep_deg = 30.0;
    }
    spec
}

pub fn small_static_spec() -> SceneSpec {
    SceneSpec { dynamic_objects: Vec::new(), ..small_spec() }
}

pub fn noisy(bundle: &CueBundle, seed: u64) -> CueBundle {
    let spec = CorruptionSpec {
        depth_scale_jitter_sigma: 0.05,
        track_noise_sigma_px: 0.5,
        track_dropout_rate: 0.05,
        ..Default::default()
    };
    synth::corrupt(bundle, &spec, seed).unwrap().0
}

/// Moves the world by `x -> s R x + t` and every camera with it.
pub fn transform(vars: &Variables, s: f64, r: &Matrix3<f64>, t: &Vector3<f64>) -> Variables {
    let map = |p: &Vector3<f64>| s * r * p + t;
    let poses = vars.trajectory.poses.iter().map(|p| p.transform_world(s, r, t)).collect();
    let mut dynamic = vars.dynamic.clone();
    for tr in dynamic.tracks.values_mut() {
        tr.points.iter_mut().for_each(|p| *p = map(p));
    }
    Variables {
        trajectory: Trajectory::new(poses, vars.trajectory.intrinsics),
        static_points: StaticPointSet { points: vars.static_points.points.iter().map(|(id, p)| (*id, map(p))).collect() },
        dynamic,
    }
}

/// Sha-256 over the relative paths and contents of every file under
/// `dir`, in path order, skipping the relative paths in `skip`.
pub fn tree_digest(dir: &Path, skip: &[&str]) -> String {
    fn walk(dir: &Path, out: &mut Vec<PathBuf>) {
        for e in std::fs::read_dir(dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                walk(&p, out)
            } else {
                out.push(p)
            }
        }
    }
    let mut files = Vec::new();
    walk(dir, &mut files);
    files.sort();
    let mut h = Sha256::new();
    for f in files {
        let rel = f.strip_prefix(dir).unwrap().to_str().unwrap().replace('\\', "/");
        if skip.contains(&rel.as_str()) {
            continue;
        }
        h.update(rel.as_bytes());
        h.update(std::fs::read(&f).unwrap());
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}
