//! The full reconstruction on a cue bundle directory, or on a freshly
//! generated noisy standard scene when no directory is given. Writes the
//! solution to `recon_out`.
//!
//! cargo run --release --example full_pipeline -- [bundle_dir]

use std::path::Path;

use dynrecon::cues::{classify_tracklets, load_bundle};
use dynrecon::evalkit::{ate, self_consistency};
use dynrecon::pipeline::{run_pipeline, write_solution, PipelineConfig};
use dynrecon::synth::{self, CorruptionSpec, SceneSpec};

fn main() -> dynrecon::Result<()> {
    let (bundle, gt) = match std::env::args().nth(1) {
        Some(dir) => {
            let mut b = load_bundle(Path::new(&dir))?;
            b.tracklets = classify_tracklets(&b.tracklets, &b.masks, 2)?;
            (b, None)
        }
        None => {
            let (clean, gt) = synth::generate(&SceneSpec::standard())?;
            let noise = CorruptionSpec { depth_scale_jitter_sigma: 0.1, track_noise_sigma_px: 0.3, ..Default::default() };
            (synth::corrupt(&clean, &noise, 0)?.0, Some(gt))
        }
    };
    let sol = run_pipeline(&bundle, &PipelineConfig::default())?;
    for s in &sol.diagnostics.stages {
        println!("{}: {} runs, {} iterations, loss {:.4e} -> {:.4e}, {:.1} s", s.name, s.runs, s.iterations, s.initial_loss, s.final_loss, s.wall_seconds);
    }
    let d = &sol.diagnostics;
    println!(
        "{} static points, {} dynamic tracks, mean reprojection {:.3} px, {} fused points",
        sol.static_points.len(),
        sol.dynamic.len(),
        d.final_mean_residual_px,
        d.fused_static_points
    );
    let sc_in = self_consistency(&bundle.depth, &sol.trajectory, &bundle.masks, &[0.01]);
    let sc_out = self_consistency(&sol.fused_depth, &sol.trajectory, &bundle.masks, &[0.01]);
    println!("self-consistency {:.4} -> {:.4}", sc_in.sc, sc_out.sc);
    if let Some(gt) = gt {
        println!("ATE {:.3e}", ate(&sol.trajectory, &gt.trajectory)?);
    }
    write_solution(Path::new("recon_out"), &sol)?;
    println!("solution written to recon_out");
    Ok(())
}
