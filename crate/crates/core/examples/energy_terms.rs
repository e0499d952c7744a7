//! Every energy term at the true solution of a synthetic scene and at a
//! perturbed one.

use dynrecon::energy::{energy, Observations, Term, Variables};
use dynrecon::geometry::Pose;
use dynrecon::pipeline::build_knn;
use dynrecon::synth::{self, SceneSpec};
use nalgebra::Vector3;

fn main() -> dynrecon::Result<()> {
    let (bundle, gt) = synth::generate(&SceneSpec { frame_count: 8, ..SceneSpec::standard() })?;
    let mut dynamic = gt.dynamic_set();
    dynamic.neighbors = build_knn(&dynamic, 8);
    let truth = Variables { trajectory: gt.trajectory.clone(), static_points: gt.static_points.clone(), dynamic };
    let mut off = truth.clone();
    off.trajectory.poses[3] = Pose::new(Vector3::new(0.0, 0.01, 0.0), Vector3::new(0.02, 0.0, 0.0)).compose(&off.trajectory.poses[3]);
    for (id, tr) in off.dynamic.tracks.iter_mut() {
        if id % 2 == 0 {
            tr.points[4].y += 0.01;
        }
    }
    let obs = Observations { tracklets: &bundle.tracklets, depth: &bundle.depth, epsilon_cam: 1e-6, huber_px: None };
    println!("{:<10} {:>12} {:>12}", "term", "truth", "perturbed");
    for term in [Term::Ba, Term::Nr, Term::Cam, Term::Arap, Term::Smooth, Term::Init(5)] {
        println!("{:<10} {:>12.4e} {:>12.4e}", format!("{term:?}"), energy(term, &truth, &obs), energy(term, &off, &obs));
    }
    Ok(())
}
