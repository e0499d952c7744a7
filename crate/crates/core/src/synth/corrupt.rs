//! Controlled degradation of clean cues.

use nalgebra::Vector2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Normal};
use serde::{Deserialize, Serialize};

use crate::cues::{CueBundle, DepthFrame, MaskFrame};
use crate::error::{Error, Result};

/// Noise levels; the default (all zero) leaves a bundle unchanged.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CorruptionSpec {
    /// Sigma of the log of a per-frame depth scale.
    pub depth_scale_jitter_sigma: f64,
    /// Sigma of a per-frame additive depth shift.
    pub depth_shift_jitter_sigma: f64,
    /// Sigma of per-pixel multiplicative noise, relative to depth.
    pub depth_pixel_noise_sigma: f64,
    pub track_noise_sigma_px: f64,
    /// Probability that a visible track sample is dropped.
    pub track_dropout_rate: f64,
    /// Dilate dynamic mask regions by this many pixels when positive,
    /// erode them when negative.
    pub mask_erode_dilate_px: i32,
}

impl CorruptionSpec {
    pub fn validate(&self) -> Result<()> {
        let ok = self.depth_scale_jitter_sigma >= 0.0
            && self.depth_shift_jitter_sigma >= 0.0
            && self.depth_pixel_noise_sigma >= 0.0
            && self.track_noise_sigma_px >= 0.0
            && (0.0..=1.0).contains(&self.track_dropout_rate);
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("invalid corruption spec {self:?}")))
        }
    }
}

/// The per-frame values drawn by [`corrupt`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorruptionRecord {
    pub depth_scales: Vec<f64>,
    pub depth_shifts: Vec<f64>,
}

/// Applies `cspec` to a copy of `bundle`.
///
/// Depth becomes `(c_t D + b_t)(1 + n)` with per-frame lognormal scale
/// `c_t`, Gaussian shift `b_t` and per-pixel Gaussian `n`; values that end
/// up non-positive become invalid. Track samples get isotropic Gaussian
/// noise and are dropped at the dropout rate or when pushed outside the
/// image; tracklets left with fewer than 2 samples are removed. Masks are
/// morphologically dilated or eroded.
pub fn corrupt(bundle: &CueBundle, cspec: &CorruptionSpec, seed: u64) -> Result<(CueBundle, CorruptionRecord)> {
    cspec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = bundle.frame_count();
    let scale = LogNormal::new(0.0, cspec.depth_scale_jitter_sigma).expect("valid sigma");
    let shift = Normal::new(0.0, cspec.depth_shift_jitter_sigma).expect("valid sigma");
    let pixel = Normal::new(0.0, cspec.depth_pixel_noise_sigma).expect("valid sigma");
    let track = Normal::new(0.0, cspec.track_noise_sigma_px).expect("valid sigma");

    let mut out = bundle.clone();
    let mut record = CorruptionRecord { depth_scales: vec![1.0; n], depth_shifts: vec![0.0; n] };
    for t in 0..n {
        if cspec.depth_scale_jitter_sigma > 0.0 {
            record.depth_scales[t] = scale.sample(&mut rng);
        }
        if cspec.depth_shift_jitter_sigma > 0.0 {
            record.depth_shifts[t] = shift.sample(&mut rng);
        }
    }
    let touches_depth = cspec.depth_scale_jitter_sigma > 0.0 || cspec.depth_shift_jitter_sigma > 0.0 || cspec.depth_pixel_noise_sigma > 0.0;
    if touches_depth {
        for (t, d) in out.depth.iter_mut().enumerate() {
            let (c, b) = (record.depth_scales[t], record.depth_shifts[t]);
            let values = d
                .values
                .iter()
                .zip(&d.valid)
                .map(|(&v, &ok)| {
                    if !ok {
                        return 0.0;
                    }
                    let noise = if cspec.depth_pixel_noise_sigma > 0.0 { pixel.sample(&mut rng) } else { 0.0 };
                    (c * v + b) * (1.0 + noise)
                })
                .collect();
            *d = DepthFrame::from_values(d.frame_index, d.width, d.height, values);
        }
    }

    if cspec.track_noise_sigma_px > 0.0 || cspec.track_dropout_rate > 0.0 {
        let k = bundle.intrinsics;
        for tr in &mut out.tracklets {
            for p in tr.points.iter_mut() {
                let Some(z) = p.as_mut() else { continue };
                if cspec.track_noise_sigma_px > 0.0 {
                    *z += Vector2::new(track.sample(&mut rng), track.sample(&mut rng));
                }
                let dropped = cspec.track_dropout_rate > 0.0 && rng.random::<f64>() < cspec.track_dropout_rate;
                if dropped || !k.contains(z) {
                    *p = None;
                }
            }
        }
        out.tracklets.retain(|t| t.visible_count() >= 2);
    }

    if cspec.mask_erode_dilate_px != 0 {
        for m in &mut out.masks {
            *m = morph(m, cspec.mask_erode_dilate_px);
        }
    }
    Ok((out, record))
}

/// Square-window dilation (`r > 0`) or erosion (`r < 0`) of the dynamic
/// labels. Dilation gives a background pixel the smallest label in its
/// window; erosion clears a labeled pixel whose window holds any other
/// label.
fn morph(mask: &MaskFrame, r: i32) -> MaskFrame {
    let (w, h) = (mask.width as i64, mask.height as i64);
    let rad = r.unsigned_abs() as i64;
    let mut labels = mask.labels.clone();
    for y in 0..h {
        for x in 0..w {
            let own = mask.label(x as usize, y as usize);
            let window = (-rad..=rad)
                .flat_map(|dy| (-rad..=rad).map(move |dx| (x + dx, y + dy)))
                .filter(|&(xx, yy)| xx >= 0 && yy >= 0 && xx < w && yy < h)
                .map(|(xx, yy)| mask.label(xx as usize, yy as usize));
            let i = (y * w + x) as usize;
            if r > 0 && own == 0 {
                labels[i] = window.filter(|l| *l != 0).min().unwrap_or(0);
            } else if r < 0 && own != 0 && window.clone().any(|l| l != own) {
                labels[i] = 0;
            }
        }
    }
    MaskFrame::new(mask.frame_index, mask.width, mask.height, labels)
}
