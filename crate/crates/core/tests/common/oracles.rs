//! Straightforward reference implementations, written independently of
//! the library code they are compared against.

use dynrecon::cues::DepthFrame;
use dynrecon::geometry::Pose;
use nalgebra::{Matrix3, Matrix4, SymmetricEigen, Vector3};

/// Closed-form similarity alignment from the unit quaternion maximizing
/// the correlation (largest eigenvector of Horn's 4x4 matrix). Returns
/// `(scale, rotation, translation)` taking `src` onto `dst`.
pub fn horn(src: &[Vector3<f64>], dst: &[Vector3<f64>]) -> (f64, Matrix3<f64>, Vector3<f64>) {
    let n = src.len() as f64;
    let ma = src.iter().fold(Vector3::zeros(), |a, p| a + p) / n;
    let mb = dst.iter().fold(Vector3::zeros(), |a, p| a + p) / n;
    let mut s = [[0.0; 3]; 3];
    let mut norm_a = 0.0;
    for (a, b) in src.iter().zip(dst) {
        let (a, b) = (a - ma, b - mb);
        for i in 0..3 {
            for j in 0..3 {
                s[i][j] += a[i] * b[j];
            }
        }
        norm_a += a.dot(&a);
    }
    let [[sxx, sxy, sxz], [syx, syy, syz], [szx, szy, szz]] = s;
    #[rustfmt::skip]
    let big = Matrix4::new(
        sxx + syy + szz, syz - szy,        szx - sxz,        sxy - syx,
        syz - szy,       sxx - syy - szz,  sxy + syx,        szx + sxz,
        szx - sxz,       sxy + syx,        -sxx + syy - szz, syz + szy,
        sxy - syx,       szx + sxz,        syz + szy,        -sxx - syy + szz,
    );
    let eig = SymmetricEigen::new(big);
    let imax = (0..4).max_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j])).unwrap();
    let q = eig.eigenvectors.column(imax);
    let (w, x, y, z) = (q[0], q[1], q[2], q[3]);
    #[rustfmt::skip]
    let r = Matrix3::new(
        w * w + x * x - y * y - z * z, 2.0 * (x * y - w * z),         2.0 * (x * z + w * y),
        2.0 * (y * x + w * z),         w * w - x * x + y * y - z * z, 2.0 * (y * z - w * x),
        2.0 * (z * x - w * y),         2.0 * (z * y + w * x),         w * w - x * x - y * y + z * z,
    );
    let num: f64 = src.iter().zip(dst).map(|(a, b)| (b - mb).dot(&(r * (a - ma)))).sum();
    let scale = num / norm_a;
    (scale, r, mb - scale * r * ma)
}

fn rodrigues(w: &Vector3<f64>) -> Matrix3<f64> {
    let th = w.norm();
    if th == 0.0 {
        return Matrix3::identity();
    }
    let k = w / th;
    let kx = Matrix3::new(0.0, -k.z, k.y, k.z, 0.0, -k.x, -k.y, k.x, 0.0);
    Matrix3::identity() + th.sin() * kx + (1.0 - th.cos()) * kx * kx
}

/// Camera-to-world 4x4 matrix of a world-to-camera pose.
pub fn cam_to_world(p: &Pose) -> Matrix4<f64> {
    let mut m = Matrix4::identity();
    m.fixed_view_mut::<3, 3>(0, 0).copy_from(&rodrigues(&p.rotvec));
    m.fixed_view_mut::<3, 1>(0, 3).copy_from(&p.trans);
    m.try_inverse().unwrap()
}

fn translation(m: &Matrix4<f64>) -> Vector3<f64> {
    Vector3::new(m[(0, 3)], m[(1, 3)], m[(2, 3)])
}

fn centers(poses: &[Pose]) -> Vec<Vector3<f64>> {
    poses.iter().map(|p| translation(&cam_to_world(p))).collect()
}

pub fn ate(est: &[Pose], reference: &[Pose]) -> f64 {
    let (a, b) = (centers(est), centers(reference));
    let (s, r, t) = horn(&a, &b);
    let sq: f64 = a.iter().zip(&b).map(|(a, b)| (s * r * a + t - b).norm_squared()).sum();
    (sq / a.len() as f64).sqrt()
}

/// `(translation RMSE, rotation RMSE in degrees)` over offset `delta`.
pub fn rpe(est: &[Pose], reference: &[Pose], delta: usize) -> (f64, f64) {
    let (s, _, _) = horn(&centers(est), &centers(reference));
    let (te, tr): (Vec<_>, Vec<_>) = (est.iter().map(cam_to_world).collect(), reference.iter().map(cam_to_world).collect());
    let (mut st, mut sr) = (0.0, 0.0);
    let m = est.len() - delta;
    for i in 0..m {
        let mut re = te[i].try_inverse().unwrap() * te[i + delta];
        for k in 0..3 {
            re[(k, 3)] *= s;
        }
        let rr = tr[i].try_inverse().unwrap() * tr[i + delta];
        let e = rr.try_inverse().unwrap() * re;
        st += translation(&e).norm_squared();
        let sin = 0.5
            * ((e[(2, 1)] - e[(1, 2)]).powi(2) + (e[(0, 2)] - e[(2, 0)]).powi(2) + (e[(1, 0)] - e[(0, 1)]).powi(2)).sqrt();
        let cos = 0.5 * (e[(0, 0)] + e[(1, 1)] + e[(2, 2)] - 1.0);
        sr += sin.atan2(cos).to_degrees().powi(2);
    }
    ((st / m as f64).sqrt(), (sr / m as f64).sqrt())
}

fn both_valid<'a>(pred: &'a [DepthFrame], gt: &'a [DepthFrame]) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    for (p, g) in pred.iter().zip(gt) {
        for i in 0..p.values.len() {
            if p.valid[i] && g.valid[i] {
                out.push((p.values[i], g.values[i]));
            }
        }
    }
    out
}

/// `(AbsRel, percent with max ratio under 1.25)`.
pub fn depth_accuracy(pred: &[DepthFrame], gt: &[DepthFrame]) -> (f64, f64) {
    let v = both_valid(pred, gt);
    let abs_rel = v.iter().map(|(p, g)| (p - g).abs() / g).sum::<f64>() / v.len() as f64;
    let good = v.iter().filter(|(p, g)| p / g < 1.25 && g / p < 1.25).count();
    (abs_rel, 100.0 * good as f64 / v.len() as f64)
}

/// `(a, b)` minimizing `sum (a / p + b - 1 / g)^2`, by Cramer's rule.
pub fn disparity_fit(pred: &[DepthFrame], gt: &[DepthFrame]) -> (f64, f64) {
    let (mut sxx, mut sx, mut sxy, mut sy, mut n) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (p, g) in both_valid(pred, gt) {
        let (x, y) = (1.0 / p, 1.0 / g);
        sxx += x * x;
        sx += x;
        sxy += x * y;
        sy += y;
        n += 1.0;
    }
    let det = sxx * n - sx * sx;
    ((sxy * n - sx * sy) / det, (sxx * sy - sx * sxy) / det)
}

/// Reads the vertices of a PLY file with `x y z` float and `red green
/// blue` uchar properties, ASCII or binary little-endian.
pub fn read_ply(bytes: &[u8]) -> Vec<([f32; 3], [u8; 3])> {
    let mut pos = 0;
    let mut next_line = || {
        let end = bytes[pos..].iter().position(|b| *b == b'\n').unwrap() + pos;
        let line = std::str::from_utf8(&bytes[pos..end]).unwrap().to_string();
        pos = end + 1;
        line
    };
    assert_eq!(next_line(), "ply");
    let (mut binary, mut count) = (false, 0usize);
    loop {
        let line = next_line();
        if line == "end_header" {
            break;
        }
        if let Some(f) = line.strip_prefix("format ") {
            binary = f.starts_with("binary_little_endian");
        }
        if let Some(n) = line.strip_prefix("element vertex ") {
            count = n.parse().unwrap();
        }
    }
    let body = &bytes[pos..];
    if binary {
        assert_eq!(body.len(), 15 * count);
        (0..count)
            .map(|i| {
                let r = &body[15 * i..15 * i + 15];
                let f = |k: usize| f32::from_le_bytes([r[4 * k], r[4 * k + 1], r[4 * k + 2], r[4 * k + 3]]);
                ([f(0), f(1), f(2)], [r[12], r[13], r[14]])
            })
            .collect()
    } else {
        let text = std::str::from_utf8(body).unwrap();
        let rows: Vec<_> = text
            .lines()
            .filter(|l| !l.is_empty())
            .map(|l| {
                let w: Vec<&str> = l.split(' ').collect();
                ([w[0].parse().unwrap(), w[1].parse().unwrap(), w[2].parse().unwrap()], [w[3].parse().unwrap(), w[4].parse().unwrap(), w[5].parse().unwrap()])
            })
            .collect();
        assert_eq!(rows.len(), count);
        rows
    }
}
