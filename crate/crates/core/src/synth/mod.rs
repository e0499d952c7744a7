//! Synthetic scenes with exact ground truth, rendered analytically, and
//! controlled corruption of their cues.

mod corrupt;
mod io;
mod scene;
mod spec;

pub use corrupt::{corrupt, CorruptionRecord, CorruptionSpec};
pub use io::{read_ground_truth, write_synth, GT_DIR};
pub use scene::{Anchor, Face, Hit, Object, Scene};
pub use spec::{CameraPath, DynamicObject, Motion, Primitive, SceneSpec};

use std::collections::BTreeMap;

use nalgebra::Vector3;
use rayon::prelude::*;

use crate::cues::{grid_sample_tracklets, CueBundle, DepthFrame, MaskFrame, TrackId};
use crate::energy::{DynamicTrack, DynamicTrajectorySet, StaticPointSet};
use crate::error::{Error, Result};
use crate::geometry::Trajectory;

/// True 3D positions of one dynamic tracklet, `None` where not visible.
#[derive(Debug, Clone, PartialEq)]
pub struct GtTrack {
    pub instance: u32,
    pub points: Vec<Option<Vector3<f64>>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub trajectory: Trajectory,
    pub depth: Vec<DepthFrame>,
    pub dynamic: BTreeMap<TrackId, GtTrack>,
    /// True position of every static tracklet.
    pub static_points: StaticPointSet,
}

impl GroundTruth {
    /// Dynamic tracks as solver variables, valid where visible. Invalid
    /// samples hold the nearest earlier (or first) valid position.
    pub fn dynamic_set(&self) -> DynamicTrajectorySet {
        let mut set = DynamicTrajectorySet::default();
        for (&id, tr) in &self.dynamic {
            let Some(first) = tr.points.iter().flatten().next().copied() else { continue };
            let mut last = first;
            let points = tr
                .points
                .iter()
                .map(|p| {
                    if let Some(p) = p {
                        last = *p;
                    }
                    last
                })
                .collect();
            let valid = tr.points.iter().map(Option::is_some).collect();
            set.tracks.insert(id, DynamicTrack { points, valid });
            set.instance_of.insert(id, tr.instance);
        }
        set
    }
}

/// Renders the cues of a scene and its ground truth.
///
/// Depth and masks come from ray casting at pixel centers; tracklets are
/// seeded on a `grid_n x grid_n` grid every `track_every` frames and
/// follow their surface points through the true motion.
pub fn generate(spec: &SceneSpec) -> Result<(CueBundle, GroundTruth)> {
    spec.validate()?;
    let scene = Scene::new(spec);
    let (w, h) = (spec.intrinsics.width, spec.intrinsics.height);
    let rendered: Vec<(Vec<f64>, Vec<u16>)> = (0..spec.frame_count).into_par_iter().map(|t| scene.render(t)).collect();
    if rendered.iter().all(|(d, _)| d.iter().all(|v| *v <= 0.0)) {
        return Err(Error::EmptyScene);
    }
    let depth: Vec<DepthFrame> = rendered.iter().enumerate().map(|(t, (d, _))| DepthFrame::from_values(t, w, h, d.clone())).collect();
    let masks = rendered.into_iter().enumerate().map(|(t, (_, l))| MaskFrame::new(t, w, h, l)).collect();

    let tracklets = grid_sample_tracklets(&scene, spec.grid_n, spec.track_every);
    let mut dynamic = BTreeMap::new();
    let mut static_points = StaticPointSet::default();
    for tr in &tracklets {
        let t0 = tr.first_visible().expect("tracklets have visible samples");
        let anchor = scene.cast(t0, tr.visible(t0).unwrap()).expect("visible sample hits a surface").anchor;
        match tr.label.instance() {
            None => {
                static_points.points.insert(tr.id, scene.position(&anchor, t0));
            }
            Some(instance) => {
                let points = (0..spec.frame_count).map(|t| tr.visible(t).map(|_| scene.position(&anchor, t))).collect();
                dynamic.insert(tr.id, GtTrack { instance, points });
            }
        }
    }
    let trajectory = Trajectory::new(scene.poses.clone(), spec.intrinsics);
    let bundle = CueBundle { depth: depth.clone(), masks, tracklets, intrinsics: spec.intrinsics };
    Ok((bundle, GroundTruth { trajectory, depth, dynamic, static_points }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{project, Intrinsics};
    use nalgebra::Vector2;

    fn plane_spec() -> SceneSpec {
        SceneSpec {
            frame_count: 8,
            intrinsics: Intrinsics::centered(50.0, 50.0, 48, 36),
            camera_path: CameraPath::Orbit { target: [0.0, 0.0, 5.0], radius: 5.0, height: -0.5, start_deg: 0.0, sweep_deg: 20.0 },
            static_geometry: vec![Primitive::Plane { center: [0.0, 0.0, 7.0], rotvec: [0.0, 0.0, 0.0], half_size: [10.0, 10.0] }],
            dynamic_objects: vec![],
            grid_n: 10,
            track_every: 4,
            seed: 0,
        }
    }

    #[test]
    fn plane_tracks_reproject_exactly() {
        let spec = plane_spec();
        let (bundle, gt) = generate(&spec).unwrap();
        assert!(!bundle.tracklets.is_empty());
        assert!(bundle.dynamic_tracklets().next().is_none());
        for tr in &bundle.tracklets {
            let p = gt.static_points.points[&tr.id];
            assert!((p.z - 7.0).abs() < 1e-9);
            for (t, z) in tr.observations() {
                let px = project(&p, &gt.trajectory.poses[t], &gt.trajectory.intrinsics).unwrap();
                assert!((px - z).norm() < 1e-9);
            }
        }
        assert!(bundle.depth.iter().all(|d| d.valid_count() == 48 * 36));
    }

    #[test]
    fn rigid_object_keeps_pairwise_distances() {
        let (_, gt) = generate(&SceneSpec::standard()).unwrap();
        let tracks: Vec<&GtTrack> = gt.dynamic.values().collect();
        assert!(tracks.len() > 10);
        let mut checked = 0;
        for a in &tracks {
            for b in &tracks {
                let pairs: Vec<f64> = a.points.iter().zip(&b.points).filter_map(|(p, q)| Some((p.as_ref()? - q.as_ref()?).norm())).collect();
                for d in &pairs {
                    assert!((d - pairs[0]).abs() < 1e-9);
                    checked += 1;
                }
            }
        }
        assert!(checked > 1000);
    }

    /// Nearest intersection over all faces, by plane equation.
    fn brute_force_depth(scene: &Scene, t: usize, px: &Vector2<f64>) -> f64 {
        let pose = &scene.poses[t];
        let k = &scene.intrinsics;
        let dir_cam = Vector3::new((px.x - k.cx) / k.fx, (px.y - k.cy) / k.fy, 1.0);
        let (o, d) = (pose.center(), pose.rotation().transpose() * dir_cam);
        let mut best = 0.0f64;
        for obj in 0..scene.objects.len() {
            for fi in 0..scene.objects[obj].faces.len() {
                let f = scene.face(t, obj, fi);
                let n = f.e1.cross(&f.e2);
                let denom = n.dot(&d);
                if denom.abs() < 1e-15 {
                    continue;
                }
                let s = n.dot(&(f.origin - o)) / denom;
                let q = o + s * d - f.origin;
                let (u, v) = (q.dot(&f.e1) / f.e1.norm_squared(), q.dot(&f.e2) / f.e2.norm_squared());
                if s > 1e-6 && u.abs() <= 1.0 && v.abs() <= 1.0 && (best == 0.0 || s < best) {
                    best = s;
                }
            }
        }
        best
    }

    #[test]
    fn depth_matches_brute_force_zbuffer() {
        let spec = SceneSpec::standard();
        let scene = Scene::new(&spec);
        for t in [0, 7, 19] {
            let (depth, labels) = scene.render(t);
            for y in 0..spec.intrinsics.height {
                for x in 0..spec.intrinsics.width {
                    let i = y * spec.intrinsics.width + x;
                    let want = brute_force_depth(&scene, t, &Vector2::new(x as f64, y as f64));
                    assert!((depth[i] - want).abs() <= 1e-9 * want.max(1.0), "frame {t} pixel ({x},{y})");
                    if want == 0.0 {
                        assert_eq!(labels[i], 0);
                    }
                }
            }
            assert!(labels.contains(&1), "cube visible in frame {t}");
        }
    }

    #[test]
    fn occluded_anchor_is_not_observed() {
        let spec = SceneSpec::standard();
        let scene = Scene::new(&spec);
        // A point on the back wall straight behind the cube center.
        let cube = scene.objects.iter().position(|o| o.label == 1).unwrap();
        let pose = &scene.poses[0];
        let c = scene.objects[cube].center;
        let px = scene.intrinsics.project_camera(&pose.transform(&c)).unwrap();
        let front = scene.cast(0, &px).unwrap();
        assert_eq!(front.anchor.object, cube);
        let wall = 0;
        let f = scene.face(0, wall, 0);
        let (o, d) = (pose.center(), c - pose.center());
        let (_, u, v) = f.intersect(&o, &d).unwrap();
        let hidden = Anchor { object: wall, face: 0, u, v };
        assert!(scene.observe(&hidden, 0).is_none());
        assert!(scene.observe(&front.anchor, 0).is_some());
    }

    #[test]
    fn generation_is_deterministic() {
        let mut spec = SceneSpec::standard();
        spec.frame_count = 5;
        let a = generate(&spec).unwrap();
        let b = generate(&spec).unwrap();
        assert_eq!(a.0, b.0);
        assert_eq!(a.1, b.1);
    }

    #[test]
    fn empty_scene_is_an_error() {
        let mut spec = plane_spec();
        spec.static_geometry.clear();
        assert!(matches!(generate(&spec), Err(Error::EmptyScene)));
    }

    #[test]
    fn bundled_standard_file_matches() {
        let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("scenes/standard.json");
        assert_eq!(SceneSpec::read(&path).unwrap(), SceneSpec::standard());
    }
}
