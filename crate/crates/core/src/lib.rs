//! Joint camera, static-geometry and dynamic-trajectory reconstruction from
//! precomputed monocular video cues (depth rasters, instance masks and 2D
//! point tracklets).
//!
//! The solver runs three optimization stages: windowed camera
//! initialization from depth-backed correspondences, static bundle
//! adjustment with a camera-motion prior, and non-rigid bundle adjustment of
//! dynamic points under smoothness and as-rigid-as-possible priors. A
//! densification and fusion pass then turns the semi-dense result into
//! per-pixel aligned depth.
//!
//! [`synth`] generates scenes with exact ground truth and [`evalkit`]
//! implements the trajectory and depth metrics used to score a solution.

pub mod cli;
pub mod config;
pub mod cues;
pub mod energy;
pub mod error;
pub mod evalkit;
pub mod geometry;
pub mod optimizer;
pub mod pipeline;
pub mod ply;
pub mod synth;

pub use error::{Error, Result};
