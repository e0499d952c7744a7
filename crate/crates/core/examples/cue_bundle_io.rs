//! Writes a cue bundle (PFM depth, PNG masks, JSON tracklets and
//! intrinsics) to a temporary directory, reads it back and exports the true
//! static points as a PLY cloud.

use dynrecon::cues::{load_bundle_with_report, save_bundle};
use dynrecon::ply::{self, Encoding, PointCloud};
use dynrecon::synth::{self, SceneSpec};

fn main() -> dynrecon::Result<()> {
    let (bundle, gt) = synth::generate(&SceneSpec::standard())?;
    let dir = std::env::temp_dir().join(format!("dynrecon-bundle-{}", std::process::id()));
    save_bundle(&bundle, &dir)?;
    let (loaded, report) = load_bundle_with_report(&dir)?;
    println!(
        "{}: {} frames, {} tracklets, {} invalid depth pixels, {} dropped tracklets",
        dir.display(),
        loaded.frame_count(),
        loaded.tracklets.len(),
        report.invalid_depth_pixels,
        report.dropped_tracklets
    );
    println!("tracklets identical after reload: {}", loaded.tracklets == bundle.tracklets);

    let mut cloud = PointCloud::default();
    for p in gt.static_points.points.values() {
        cloud.push([p.x as f32, p.y as f32, p.z as f32], [200, 200, 200]);
    }
    let path = dir.join("static_truth.ply");
    ply::write(&path, &cloud, Encoding::Ascii)?;
    println!("{} points written to {}, reread {}", cloud.len(), path.display(), ply::read(&path)?.len());
    std::fs::remove_dir_all(&dir).ok();
    Ok(())
}
