//! Pose algebra, pinhole projection and the TUM trajectory format.

use std::path::Path;

use dynrecon::geometry::{project, tum, unproject, Intrinsics, Pose};
use nalgebra::Vector3;

fn main() -> dynrecon::Result<()> {
    let k = Intrinsics::centered(500.0, 500.0, 640, 480);
    let cam = Pose::look_at(Vector3::new(2.0, -1.0, -4.0), Vector3::zeros(), Vector3::new(0.0, -1.0, 0.0));
    let p = Vector3::new(0.3, 0.2, 0.1);
    let px = project(&p, &cam, &k)?;
    let depth = cam.transform(&p).z;
    let back = unproject(&px, depth, &cam, &k)?;
    println!("point {p:?} -> pixel ({:.2}, {:.2}) at depth {depth:.3}, back-projection error {:.1e}", px.x, px.y, (back - p).norm());

    let step = Pose::new(Vector3::new(0.0, 0.05, 0.0), Vector3::new(0.1, 0.0, 0.0));
    let mut poses = vec![cam];
    for _ in 0..4 {
        poses.push(step.compose(poses.last().unwrap()));
    }
    for (a, b) in poses.iter().zip(&poses[1..]) {
        let m = Pose::motion_between(a, b);
        println!("motion {:.3?} {:.3?}", m.rotvec.as_slice(), m.trans.as_slice());
    }

    let text = tum::to_string(&poses);
    print!("{text}");
    let parsed = tum::from_str(&text, Path::new("<memory>"))?;
    let err = parsed.iter().zip(&poses).map(|(a, b)| (a.to_matrix() - b.to_matrix()).abs().max()).fold(0.0, f64::max);
    println!("TUM round trip max matrix error {err:.1e}");
    Ok(())
}
