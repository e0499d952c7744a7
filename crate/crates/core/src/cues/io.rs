//! Cue bundle directory layout:
//!
//! ```text
//! depth/000000.pfm ...   single-channel PFM, non-positive = invalid
//! masks/000000.png ...   8/16-bit grayscale, value = instance id
//! tracks.jsonl           {"id":..,"label":"static"|k,"points":[[x,y]|null,..]}
//! intrinsics.json        {"fx":..,"fy":..,"cx":..,"cy":..,"width":..,"height":..}
//! ```

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use super::pfm::{self, FloatRaster};
use super::{read_mask_png, write_mask_png, CueBundle, DepthFrame, TrackLabel, Tracklet};
use crate::error::{Error, Result};
use crate::geometry::Intrinsics;

/// Things silently repaired while loading.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct LoadReport {
    /// Depth pixels that were non-positive or non-finite.
    pub invalid_depth_pixels: usize,
    /// Visible track samples outside the image, turned invisible.
    pub out_of_bounds_samples: usize,
    /// Tracklets left with fewer than two visible samples.
    pub dropped_tracklets: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum LabelRepr {
    Name(String),
    Instance(u32),
}

#[derive(Serialize, Deserialize)]
struct TrackRecord {
    id: u32,
    label: LabelRepr,
    points: Vec<Option<[f64; 2]>>,
}

pub(crate) fn depth_path(dir: &Path, t: usize) -> PathBuf {
    dir.join(format!("{t:06}.pfm"))
}

pub(crate) fn depth_to_raster(d: &DepthFrame) -> FloatRaster {
    FloatRaster {
        width: d.width,
        height: d.height,
        data: d.values.iter().zip(&d.valid).map(|(v, ok)| if *ok { *v as f32 } else { 0.0 }).collect(),
    }
}

pub(crate) fn raster_to_depth(r: FloatRaster, frame_index: usize) -> (DepthFrame, usize) {
    let values: Vec<f64> = r.data.iter().map(|v| *v as f64).collect();
    let d = DepthFrame::from_values(frame_index, r.width, r.height, values);
    let invalid = d.valid.len() - d.valid_count();
    (d, invalid)
}

/// Reads `000000.pfm`, `000001.pfm`, ... until the first missing index.
/// Also returns the number of invalid pixels.
pub fn read_depth_dir(dir: &Path) -> Result<(Vec<DepthFrame>, usize)> {
    if !dir.is_dir() {
        return Err(Error::MissingFile { path: dir.to_path_buf() });
    }
    let mut frames = Vec::new();
    let mut invalid = 0;
    loop {
        let path = depth_path(dir, frames.len());
        if !path.exists() {
            break;
        }
        let (d, bad) = raster_to_depth(pfm::read(&path)?, frames.len());
        invalid += bad;
        frames.push(d);
    }
    Ok((frames, invalid))
}

pub fn write_depth_dir(dir: &Path, frames: &[DepthFrame]) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (t, d) in frames.iter().enumerate() {
        pfm::write(&depth_path(dir, t), &depth_to_raster(d))?;
    }
    Ok(())
}

pub(crate) fn tracklets_to_jsonl(tracklets: &[Tracklet]) -> String {
    let mut out = String::new();
    for tr in tracklets {
        let record = TrackRecord {
            id: tr.id,
            label: match tr.label {
                TrackLabel::Static => LabelRepr::Name("static".into()),
                TrackLabel::Dynamic(k) => LabelRepr::Instance(k),
            },
            points: tr.points.iter().map(|p| p.map(|p| [p.x, p.y])).collect(),
        };
        writeln!(out, "{}", serde_json::to_string(&record).expect("serializable")).unwrap();
    }
    out
}

pub(crate) fn tracklets_from_jsonl(text: &str, path: &Path) -> Result<Vec<Tracklet>> {
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |reason: String| Error::Parse {
            path: path.to_path_buf(),
            reason: format!("line {}: {reason}", lineno + 1),
        };
        let rec: TrackRecord = serde_json::from_str(line).map_err(|e| parse_err(e.to_string()))?;
        let label = match rec.label {
            LabelRepr::Name(s) if s == "static" => TrackLabel::Static,
            LabelRepr::Instance(k) if k > 0 => TrackLabel::Dynamic(k),
            LabelRepr::Name(s) => return Err(parse_err(format!("unknown label `{s}`"))),
            LabelRepr::Instance(_) => return Err(parse_err("instance ids start at 1".into())),
        };
        out.push(Tracklet {
            id: rec.id,
            points: rec.points.into_iter().map(|p| p.map(|[x, y]| Vector2::new(x, y))).collect(),
            label,
        });
    }
    Ok(out)
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}

pub(crate) fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

pub fn save_bundle(bundle: &CueBundle, dir: &Path) -> Result<()> {
    write_file(
        &dir.join("intrinsics.json"),
        serde_json::to_string_pretty(&bundle.intrinsics).expect("serializable"),
    )?;
    write_depth_dir(&dir.join("depth"), &bundle.depth)?;
    let masks = dir.join("masks");
    std::fs::create_dir_all(&masks).map_err(|e| Error::io(&masks, e))?;
    for (t, m) in bundle.masks.iter().enumerate() {
        write_mask_png(&masks.join(format!("{t:06}.png")), m)?;
    }
    write_file(&dir.join("tracks.jsonl"), tracklets_to_jsonl(&bundle.tracklets))
}

pub fn load_bundle(dir: &Path) -> Result<CueBundle> {
    load_bundle_with_report(dir).map(|(b, _)| b)
}

pub fn load_bundle_with_report(dir: &Path) -> Result<(CueBundle, LoadReport)> {
    let mut report = LoadReport::default();
    let intrinsics: Intrinsics = read_json(&dir.join("intrinsics.json"))?;
    let (w, h) = (intrinsics.width, intrinsics.height);
    let depth_dir = dir.join("depth");
    let (depth, invalid) = read_depth_dir(&depth_dir)?;
    report.invalid_depth_pixels = invalid;
    if depth.len() < 2 {
        return Err(Error::InconsistentDimensions {
            path: depth_dir,
            reason: format!("found {} depth frame(s); at least 2 are required", depth.len()),
        });
    }
    for (t, d) in depth.iter().enumerate() {
        if d.width != w || d.height != h {
            return Err(Error::InconsistentDimensions {
                path: depth_path(&depth_dir, t),
                reason: format!("{}x{} raster, intrinsics say {w}x{h}", d.width, d.height),
            });
        }
    }
    let mut masks = Vec::with_capacity(depth.len());
    for t in 0..depth.len() {
        let path = dir.join("masks").join(format!("{t:06}.png"));
        let m = read_mask_png(&path, t)?;
        if m.width != w || m.height != h {
            return Err(Error::InconsistentDimensions {
                path,
                reason: format!("{}x{} mask, intrinsics say {w}x{h}", m.width, m.height),
            });
        }
        masks.push(m);
    }
    let tracks_path = dir.join("tracks.jsonl");
    let text = std::fs::read_to_string(&tracks_path).map_err(|e| Error::io(&tracks_path, e))?;
    let mut tracklets = Vec::new();
    for mut tr in tracklets_from_jsonl(&text, &tracks_path)? {
        if tr.points.len() != depth.len() {
            return Err(Error::InconsistentDimensions {
                path: tracks_path,
                reason: format!("tracklet {} has {} samples for {} frames", tr.id, tr.points.len(), depth.len()),
            });
        }
        for p in tr.points.iter_mut() {
            if p.is_some_and(|q| !intrinsics.contains(&q) || !q.x.is_finite() || !q.y.is_finite()) {
                *p = None;
                report.out_of_bounds_samples += 1;
            }
        }
        if tr.visible_count() < 2 {
            report.dropped_tracklets += 1;
            continue;
        }
        tracklets.push(tr);
    }
    if report.invalid_depth_pixels > 0 {
        log::warn!("{}: {} invalid depth pixels", dir.display(), report.invalid_depth_pixels);
    }
    Ok((
        CueBundle {
            depth,
            masks,
            tracklets,
            intrinsics,
        },
        report,
    ))
}
