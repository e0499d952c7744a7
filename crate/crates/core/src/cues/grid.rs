use std::collections::HashSet;

use nalgebra::Vector2;

use super::{TrackLabel, Tracklet};

/// Something that can seed and follow surface points, such as a synthetic
/// scene with known motion.
pub trait TrackSource {
    type Anchor;

    fn frame_count(&self) -> usize;

    fn image_size(&self) -> (usize, usize);

    /// The surface point seen through `pixel` at `frame`.
    fn anchor_at(&self, frame: usize, pixel: &Vector2<f64>) -> Option<Self::Anchor>;

    /// Where `anchor` projects at `frame`; `None` when occluded or out of view.
    fn observe(&self, anchor: &Self::Anchor, frame: usize) -> Option<Vector2<f64>>;

    fn label(&self, anchor: &Self::Anchor) -> TrackLabel;
}

/// `grid_n x grid_n` uniformly spaced pixels spanning the whole image,
/// corners included.
pub fn grid_seeds(width: usize, height: usize, grid_n: usize) -> Vec<Vector2<f64>> {
    assert!(grid_n >= 2, "grid_n must be at least 2");
    let step = |extent: usize, i: usize| (extent - 1) as f64 * i as f64 / (grid_n - 1) as f64;
    (0..grid_n)
        .flat_map(|j| (0..grid_n).map(move |i| Vector2::new(step(width, i), step(height, j))))
        .collect()
}

pub fn seed_frames(frame_count: usize, every: usize) -> Vec<usize> {
    assert!(every >= 1, "every must be at least 1");
    (0..frame_count).step_by(every).collect()
}

/// Seeds a grid on every `every`-th frame and follows each seed over the
/// whole sequence in both directions. Identical trajectories are kept once
/// and ids are assigned in seeding order.
pub fn grid_sample_tracklets<S: TrackSource>(source: &S, grid_n: usize, every: usize) -> Vec<Tracklet> {
    let (w, h) = source.image_size();
    let seeds = grid_seeds(w, h, grid_n);
    let n = source.frame_count();
    let mut tracks = Vec::new();
    for frame in seed_frames(n, every) {
        for px in &seeds {
            let Some(anchor) = source.anchor_at(frame, px) else {
                continue;
            };
            let points: Vec<_> = (0..n).map(|t| source.observe(&anchor, t)).collect();
            if points[frame].is_none() || points.iter().filter(|p| p.is_some()).count() < 2 {
                continue;
            }
            tracks.push(Tracklet {
                id: 0,
                points,
                label: source.label(&anchor),
            });
        }
    }
    let mut tracks = dedup_tracklets(tracks);
    for (i, t) in tracks.iter_mut().enumerate() {
        t.id = i as u32;
    }
    tracks
}

/// Removes tracklets whose samples are bit-identical to an earlier one.
pub fn dedup_tracklets(tracklets: Vec<Tracklet>) -> Vec<Tracklet> {
    let mut seen = HashSet::new();
    tracklets
        .into_iter()
        .filter(|t| {
            let key: Vec<Option<(u64, u64)>> = t.points.iter().map(|p| p.map(|p| (p.x.to_bits(), p.y.to_bits()))).collect();
            seen.insert((key, t.label))
        })
        .collect()
}
