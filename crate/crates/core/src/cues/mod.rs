//! Visual cues consumed by the solver: depth rasters, instance masks and 2D
//! point tracklets, plus static/dynamic tracklet classification.

mod grid;
mod io;
mod mask_png;
pub mod pfm;

pub use grid::{dedup_tracklets, grid_sample_tracklets, grid_seeds, seed_frames, TrackSource};
pub use io::{load_bundle, load_bundle_with_report, read_depth_dir, save_bundle, write_depth_dir, LoadReport};
pub use mask_png::{read_mask_png, write_mask_png};

use std::collections::BTreeSet;

use nalgebra::Vector2;

use crate::error::{Error, Result};
use crate::geometry::Intrinsics;

pub type TrackId = u32;

/// Default mask dilation applied before classifying tracklets.
pub const DEFAULT_DILATION_PX: usize = 2;

/// Per-pixel depth for one frame, row-major. Invalid pixels hold `0.0`.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthFrame {
    pub frame_index: usize,
    pub width: usize,
    pub height: usize,
    pub values: Vec<f64>,
    pub valid: Vec<bool>,
}

impl DepthFrame {
    /// Wraps a raster, marking non-finite and non-positive values invalid.
    pub fn from_values(frame_index: usize, width: usize, height: usize, mut values: Vec<f64>) -> Self {
        assert_eq!(values.len(), width * height, "raster size");
        let valid: Vec<bool> = values.iter().map(|v| v.is_finite() && *v > 0.0).collect();
        for (v, ok) in values.iter_mut().zip(&valid) {
            if !ok {
                *v = 0.0;
            }
        }
        Self {
            frame_index,
            width,
            height,
            values,
            valid,
        }
    }

    pub fn get(&self, x: usize, y: usize) -> Option<f64> {
        let i = y * self.width + x;
        self.valid[i].then(|| self.values[i])
    }

    /// Depth at a subpixel location.
    ///
    /// Interpolates inverse depth bilinearly over the four surrounding
    /// pixels, which is exact on planar surfaces. Returns `None` when any
    /// contributing pixel is invalid or the location is outside the raster.
    pub fn sample(&self, px: &Vector2<f64>) -> Option<f64> {
        let mut acc = 0.0;
        for (x, y, w) in bilinear_footprint(self.width, self.height, px)? {
            acc += w / self.get(x, y)?;
        }
        Some(1.0 / acc)
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|v| **v).count()
    }
}

/// Pixels and weights of bilinear interpolation at `px`, leaving out
/// pixels with zero weight. `None` outside the raster.
pub fn bilinear_footprint(width: usize, height: usize, px: &Vector2<f64>) -> Option<Vec<(usize, usize, f64)>> {
    let (x, y) = (px.x, px.y);
    if !(x >= 0.0 && y >= 0.0 && x <= (width - 1) as f64 && y <= (height - 1) as f64) {
        return None;
    }
    let x0 = (x.floor() as usize).min(width - 1);
    let y0 = (y.floor() as usize).min(height - 1);
    let ax = x - x0 as f64;
    let ay = y - y0 as f64;
    let mut out = Vec::with_capacity(4);
    for (dy, wy) in [(0, 1.0 - ay), (1, ay)] {
        for (dx, wx) in [(0, 1.0 - ax), (1, ax)] {
            let w = wx * wy;
            if w != 0.0 {
                out.push((x0 + dx, y0 + dy, w));
            }
        }
    }
    Some(out)
}

/// Per-pixel instance labels for one frame: 0 is static background, `k > 0`
/// is dynamic instance `k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaskFrame {
    pub frame_index: usize,
    pub width: usize,
    pub height: usize,
    pub labels: Vec<u16>,
}

impl MaskFrame {
    pub fn new(frame_index: usize, width: usize, height: usize, labels: Vec<u16>) -> Self {
        assert_eq!(labels.len(), width * height, "raster size");
        Self {
            frame_index,
            width,
            height,
            labels,
        }
    }

    pub fn label(&self, x: usize, y: usize) -> u16 {
        self.labels[y * self.width + x]
    }

    /// Label of the pixel nearest to a subpixel location.
    pub fn label_at(&self, px: &Vector2<f64>) -> Option<u16> {
        let x = px.x.round();
        let y = px.y.round();
        if x < 0.0 || y < 0.0 || x >= self.width as f64 || y >= self.height as f64 {
            return None;
        }
        Some(self.label(x as usize, y as usize))
    }

    pub fn is_static(&self, x: usize, y: usize) -> bool {
        self.label(x, y) == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TrackLabel {
    Static,
    Dynamic(u32),
}

impl TrackLabel {
    pub fn instance(&self) -> Option<u32> {
        match self {
            TrackLabel::Static => None,
            TrackLabel::Dynamic(k) => Some(*k),
        }
    }

    pub fn is_static(&self) -> bool {
        matches!(self, TrackLabel::Static)
    }
}

/// A 2D point trajectory; `None` marks frames where the point is not visible.
#[derive(Debug, Clone, PartialEq)]
pub struct Tracklet {
    pub id: TrackId,
    pub points: Vec<Option<Vector2<f64>>>,
    pub label: TrackLabel,
}

impl Tracklet {
    pub fn visible(&self, t: usize) -> Option<&Vector2<f64>> {
        self.points.get(t).and_then(Option::as_ref)
    }

    pub fn visible_count(&self) -> usize {
        self.points.iter().filter(|p| p.is_some()).count()
    }

    pub fn first_visible(&self) -> Option<usize> {
        self.points.iter().position(Option::is_some)
    }

    pub fn observations(&self) -> impl Iterator<Item = (usize, &Vector2<f64>)> {
        self.points.iter().enumerate().filter_map(|(t, p)| p.as_ref().map(|p| (t, p)))
    }
}

/// Every per-video input of the solver.
#[derive(Debug, Clone, PartialEq)]
pub struct CueBundle {
    pub depth: Vec<DepthFrame>,
    pub masks: Vec<MaskFrame>,
    pub tracklets: Vec<Tracklet>,
    pub intrinsics: Intrinsics,
}

impl CueBundle {
    pub fn frame_count(&self) -> usize {
        self.depth.len()
    }

    pub fn static_tracklets(&self) -> impl Iterator<Item = &Tracklet> {
        self.tracklets.iter().filter(|t| t.label.is_static())
    }

    pub fn dynamic_tracklets(&self) -> impl Iterator<Item = &Tracklet> {
        self.tracklets.iter().filter(|t| !t.label.is_static())
    }

    /// Checks the structural invariants; returns a description of the first
    /// violation.
    pub fn check(&self) -> std::result::Result<(), String> {
        let n = self.depth.len();
        if n < 2 {
            return Err(format!("need at least 2 frames, found {n}"));
        }
        if self.masks.len() != n {
            return Err(format!("{} depth frames but {} masks", n, self.masks.len()));
        }
        let (w, h) = (self.intrinsics.width, self.intrinsics.height);
        for (t, (d, m)) in self.depth.iter().zip(&self.masks).enumerate() {
            if d.width != w || d.height != h || m.width != w || m.height != h {
                return Err(format!("frame {t}: raster size differs from intrinsics {w}x{h}"));
            }
        }
        for tr in &self.tracklets {
            if tr.points.len() != n {
                return Err(format!("tracklet {} has {} samples for {} frames", tr.id, tr.points.len(), n));
            }
            if tr.visible_count() < 2 {
                return Err(format!("tracklet {} has fewer than 2 visible samples", tr.id));
            }
            if tr.observations().any(|(_, p)| !self.intrinsics.contains(p)) {
                return Err(format!("tracklet {} has a visible sample outside the image", tr.id));
            }
        }
        Ok(())
    }
}

/// Labels each tracklet from the masks.
///
/// A tracklet is `Dynamic(k)` if any visible sample falls inside instance
/// `k`'s mask dilated by `dilation_px` (square structuring element), and
/// `Static` otherwise. Tracklets touching more than one instance are
/// dropped.
pub fn classify_tracklets(tracklets: &[Tracklet], masks: &[MaskFrame], dilation_px: usize) -> Result<Vec<Tracklet>> {
    let mut out = Vec::with_capacity(tracklets.len());
    for tr in tracklets {
        if tr.points.len() != masks.len() {
            return Err(Error::DimensionMismatch(format!(
                "tracklet {} has {} samples but there are {} masks",
                tr.id,
                tr.points.len(),
                masks.len()
            )));
        }
        let mut touched = BTreeSet::new();
        for (t, p) in tr.observations() {
            let mask = &masks[t];
            let (cx, cy) = (p.x.round(), p.y.round());
            if cx < 0.0 || cy < 0.0 || cx >= mask.width as f64 || cy >= mask.height as f64 {
                return Err(Error::DimensionMismatch(format!(
                    "tracklet {} sample at frame {t} lies outside the {}x{} mask",
                    tr.id, mask.width, mask.height
                )));
            }
            let (cx, cy) = (cx as usize, cy as usize);
            let y0 = cy.saturating_sub(dilation_px);
            let y1 = (cy + dilation_px).min(mask.height - 1);
            let x0 = cx.saturating_sub(dilation_px);
            let x1 = (cx + dilation_px).min(mask.width - 1);
            for y in y0..=y1 {
                for x in x0..=x1 {
                    let l = mask.label(x, y);
                    if l != 0 {
                        touched.insert(l as u32);
                    }
                }
            }
        }
        let label = match touched.len() {
            0 => TrackLabel::Static,
            1 => TrackLabel::Dynamic(*touched.iter().next().unwrap()),
            _ => continue,
        };
        out.push(Tracklet { label, ..tr.clone() });
    }
    Ok(out)
}
