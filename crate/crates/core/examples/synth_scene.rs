//! Generates the standard synthetic scene, degrades its cues and writes the
//! dataset to a directory (default `synth_out`).
//!
//! cargo run --example synth_scene -- /tmp/scene

use std::path::PathBuf;

use dynrecon::synth::{self, CorruptionSpec, SceneSpec};

fn main() -> dynrecon::Result<()> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "synth_out".into()));
    let spec = SceneSpec::standard();
    let (clean, gt) = synth::generate(&spec)?;
    let noise = CorruptionSpec { depth_scale_jitter_sigma: 0.05, track_noise_sigma_px: 0.5, track_dropout_rate: 0.05, ..Default::default() };
    let (bundle, record) = synth::corrupt(&clean, &noise, spec.seed)?;
    synth::write_synth(&out, Some(&spec), &bundle, &gt)?;

    let k = &bundle.intrinsics;
    println!("{} frames of {}x{}, fx {:.1}", bundle.frame_count(), k.width, k.height, k.fx);
    println!(
        "{} tracklets ({} static, {} dynamic)",
        bundle.tracklets.len(),
        bundle.static_tracklets().count(),
        bundle.dynamic_tracklets().count()
    );
    println!("per-frame depth scales {:.3?}", record.depth_scales);
    println!("written to {}", out.display());
    Ok(())
}
