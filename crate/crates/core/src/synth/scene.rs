//! Analytic scene: planar faces moving over time, ray casting and surface
//! anchors that follow the motion.

use nalgebra::{Matrix3, Vector2, Vector3};

use super::spec::{Motion, Primitive, SceneSpec};
use crate::cues::{TrackLabel, TrackSource};
use crate::geometry::{rotvec_to_matrix, Intrinsics, Pose, DEPTH_EPSILON};

/// Parallelogram `origin + u e1 + v e2`, `|u|, |v| <= 1`.
#[derive(Debug, Clone, Copy)]
pub struct Face {
    pub origin: Vector3<f64>,
    pub e1: Vector3<f64>,
    pub e2: Vector3<f64>,
}

impl Face {
    pub fn point(&self, u: f64, v: f64) -> Vector3<f64> {
        self.origin + u * self.e1 + v * self.e2
    }

    /// Ray parameter and face coordinates of the intersection with
    /// `o + s d`, if it lies on the face with `s > 0`.
    pub fn intersect(&self, o: &Vector3<f64>, d: &Vector3<f64>) -> Option<(f64, f64, f64)> {
        let m = Matrix3::from_columns(&[self.e1, self.e2, -d]);
        let x = m.lu().solve(&(o - self.origin))?;
        let (u, v, s) = (x[0], x[1], x[2]);
        (s > 0.0 && u.abs() <= 1.0 && v.abs() <= 1.0 && s.is_finite()).then_some((s, u, v))
    }

    /// Distance from `p` to the face, assuming `e1` and `e2` are
    /// orthogonal.
    pub fn distance(&self, p: &Vector3<f64>) -> f64 {
        let q = p - self.origin;
        let u = (q.dot(&self.e1) / self.e1.norm_squared()).clamp(-1.0, 1.0);
        let v = (q.dot(&self.e2) / self.e2.norm_squared()).clamp(-1.0, 1.0);
        (self.point(u, v) - p).norm()
    }
}

/// Rectangular faces of a primitive in its rest pose.
fn rest_faces(p: &Primitive) -> Vec<Face> {
    let r = rotvec_to_matrix(&p.rotvec());
    let c = p.center();
    match p {
        Primitive::Plane { half_size, .. } => vec![Face {
            origin: c,
            e1: half_size[0] * r.column(0),
            e2: half_size[1] * r.column(1),
        }],
        Primitive::Box { half_extents: h, .. } => {
            let mut faces = Vec::with_capacity(6);
            for i in 0..3 {
                let (j, k) = ((i + 1) % 3, (i + 2) % 3);
                for sign in [1.0, -1.0] {
                    faces.push(Face {
                        origin: c + sign * h[i] * r.column(i),
                        e1: h[j] * r.column(j),
                        e2: h[k] * r.column(k),
                    });
                }
            }
            faces
        }
    }
}

/// An object of the scene: faces at rest, a mask label and its motion.
#[derive(Debug, Clone)]
pub struct Object {
    pub label: u16,
    pub center: Vector3<f64>,
    pub rest_rotation: Matrix3<f64>,
    pub faces: Vec<Face>,
    pub motion: Option<Motion>,
}

impl Object {
    /// Affine map `x -> a x + b` taking rest positions to frame `t`.
    pub fn affine(&self, t: usize) -> (Matrix3<f64>, Vector3<f64>) {
        let tf = t as f64;
        let (a, vel) = match &self.motion {
            None => return (Matrix3::identity(), Vector3::zeros()),
            Some(Motion::Rigid { velocity, angular_velocity }) => {
                (rotvec_to_matrix(&(Vector3::from(*angular_velocity) * tf)), Vector3::from(*velocity))
            }
            Some(Motion::Sinusoidal { amplitude, frequency, axis, velocity }) => {
                let mut s = Matrix3::identity();
                s[(axis % 3, axis % 3)] = 1.0 + amplitude * (std::f64::consts::TAU * frequency * tf).sin();
                (self.rest_rotation * s * self.rest_rotation.transpose(), Vector3::from(*velocity))
            }
        };
        (a, self.center + vel * tf - a * self.center)
    }

    pub fn faces_at(&self, t: usize) -> Vec<Face> {
        let (a, b) = self.affine(t);
        self.faces
            .iter()
            .map(|f| Face { origin: a * f.origin + b, e1: a * f.e1, e2: a * f.e2 })
            .collect()
    }
}

/// A material point: object, face and face coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Anchor {
    pub object: usize,
    pub face: usize,
    pub u: f64,
    pub v: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit {
    pub anchor: Anchor,
    /// Camera-space depth of the hit.
    pub depth: f64,
}

/// A scene ready for rendering: objects, camera poses and intrinsics.
#[derive(Debug, Clone)]
pub struct Scene {
    pub objects: Vec<Object>,
    pub poses: Vec<Pose>,
    pub intrinsics: Intrinsics,
    /// Faces of every object, per frame.
    frames: Vec<Vec<Vec<Face>>>,
}

impl Scene {
    pub fn new(spec: &SceneSpec) -> Self {
        let mut objects = Vec::new();
        for p in &spec.static_geometry {
            objects.push(Object {
                label: 0,
                center: p.center(),
                rest_rotation: rotvec_to_matrix(&p.rotvec()),
                faces: rest_faces(p),
                motion: None,
            });
        }
        for d in &spec.dynamic_objects {
            objects.push(Object {
                label: d.instance,
                center: d.primitive.center(),
                rest_rotation: rotvec_to_matrix(&d.primitive.rotvec()),
                faces: rest_faces(&d.primitive),
                motion: Some(d.motion.clone()),
            });
        }
        let frames = (0..spec.frame_count).map(|t| objects.iter().map(|o| o.faces_at(t)).collect()).collect();
        Self { objects, poses: spec.camera_path.poses(spec.frame_count), intrinsics: spec.intrinsics, frames }
    }

    pub fn frame_count(&self) -> usize {
        self.poses.len()
    }

    pub fn face(&self, t: usize, object: usize, face: usize) -> &Face {
        &self.frames[t][object][face]
    }

    /// World position of an anchor at frame `t`.
    pub fn position(&self, anchor: &Anchor, t: usize) -> Vector3<f64> {
        self.face(t, anchor.object, anchor.face).point(anchor.u, anchor.v)
    }

    pub fn label(&self, anchor: &Anchor) -> u16 {
        self.objects[anchor.object].label
    }

    /// Nearest surface seen through a (subpixel) image location.
    pub fn cast(&self, t: usize, px: &Vector2<f64>) -> Option<Hit> {
        let pose = &self.poses[t];
        let rt = pose.rotation().transpose();
        let o = pose.center();
        let k = &self.intrinsics;
        let d = rt * Vector3::new((px.x - k.cx) / k.fx, (px.y - k.cy) / k.fy, 1.0);
        let mut best: Option<Hit> = None;
        for (oi, faces) in self.frames[t].iter().enumerate() {
            for (fi, f) in faces.iter().enumerate() {
                if let Some((s, u, v)) = f.intersect(&o, &d) {
                    // `d` has unit camera-space z, so `s` is the depth.
                    if s > DEPTH_EPSILON && best.is_none_or(|b| s < b.depth) {
                        best = Some(Hit { anchor: Anchor { object: oi, face: fi, u, v }, depth: s });
                    }
                }
            }
        }
        best
    }

    /// Depth and label rasters of frame `t`; pixels that miss every
    /// surface have depth 0 and label 0.
    pub fn render(&self, t: usize) -> (Vec<f64>, Vec<u16>) {
        let (w, h) = (self.intrinsics.width, self.intrinsics.height);
        let mut depth = vec![0.0; w * h];
        let mut labels = vec![0u16; w * h];
        for y in 0..h {
            for x in 0..w {
                if let Some(hit) = self.cast(t, &Vector2::new(x as f64, y as f64)) {
                    depth[y * w + x] = hit.depth;
                    labels[y * w + x] = self.label(&hit.anchor);
                }
            }
        }
        (depth, labels)
    }

    /// Where `anchor` is observed at frame `t`.
    ///
    /// The anchor must project inside the image in front of the camera with
    /// nothing closer along the ray through its exact subpixel location.
    /// In addition the rays through the pixel centers of its bilinear
    /// footprint must hit the anchor's own face, so that no observation
    /// sits on a depth or label discontinuity.
    pub fn observe(&self, anchor: &Anchor, t: usize) -> Option<Vector2<f64>> {
        let p = self.position(anchor, t);
        let pc = self.poses[t].transform(&p);
        if pc.z <= DEPTH_EPSILON {
            return None;
        }
        let px = self.intrinsics.project_camera(&pc).ok()?;
        let hit = self.cast(t, &px)?;
        if hit.depth < pc.z * (1.0 - 1e-9) {
            return None;
        }
        let (w, h) = (self.intrinsics.width, self.intrinsics.height);
        let fp = crate::cues::bilinear_footprint(w, h, &px)?;
        let same_face = |x: usize, y: usize| {
            self.cast(t, &Vector2::new(x as f64, y as f64))
                .is_some_and(|h| h.anchor.object == anchor.object && h.anchor.face == anchor.face)
        };
        fp.iter().all(|&(x, y, _)| same_face(x, y)).then_some(px)
    }

    /// Distance from `p` to the nearest static face.
    pub fn distance_to_static(&self, p: &Vector3<f64>) -> f64 {
        self.objects
            .iter()
            .filter(|o| o.motion.is_none())
            .flat_map(|o| o.faces.iter())
            .map(|f| f.distance(p))
            .fold(f64::INFINITY, f64::min)
    }
}

impl TrackSource for Scene {
    type Anchor = Anchor;

    fn frame_count(&self) -> usize {
        self.poses.len()
    }

    fn image_size(&self) -> (usize, usize) {
        (self.intrinsics.width, self.intrinsics.height)
    }

    fn anchor_at(&self, frame: usize, pixel: &Vector2<f64>) -> Option<Anchor> {
        self.cast(frame, pixel).map(|h| h.anchor)
    }

    fn observe(&self, anchor: &Anchor, frame: usize) -> Option<Vector2<f64>> {
        Scene::observe(self, anchor, frame)
    }

    fn label(&self, anchor: &Anchor) -> TrackLabel {
        match self.objects[anchor.object].label {
            0 => TrackLabel::Static,
            k => TrackLabel::Dynamic(k as u32),
        }
    }
}
