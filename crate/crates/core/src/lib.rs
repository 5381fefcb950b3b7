//! Geometry-driven image resampling with a two-plane perspective prior.
//!
//! A dominant vanishing point and a handful of angles define a ground plane
//! and a plane above the horizon. Each plane carries an exponential saliency
//! profile in bird's-eye view; mapped back into the camera view and summed,
//! the profiles form a saliency map that drives a separable, invertible image
//! warp. Far-away regions get more output pixels, so small distant objects
//! survive downsampling.
//!
//! The crate also ships a deterministic streaming-perception harness: COCO
//! style AP, streaming AP over a virtual clock with configurable detector
//! latency, a mock detector, and two track-quality metrics.
//!
//! Module map:
//!
//! * [`geometry`]: plane quads, homographies, vanishing points from lines
//! * [`saliency`]: BEV profiles, two-plane and multi-VP saliency, on-disk cache
//! * [`warp`]: axis maps, image resampling, point and box mapping
//! * [`sensitivity`]: finite-difference gradients of warp objectives
//! * [`eval`]: AP, streaming simulation and sAP, track metrics
//!
//! The `book/` directory next to the workspace explains each stage with
//! runnable snippets; they are compiled and run as doc-tests of this crate.

// Range checks are written as `!(x > bound)` so that NaN fails them too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bbox;
pub mod eval;
pub mod geometry;
pub mod saliency;
pub mod sensitivity;
pub mod warp;

pub use bbox::BBox;
pub use geometry::{ImageSize, PlaneKind, Point2};
pub use saliency::{SaliencyMap, WarpParams};
pub use warp::{AxisMap, Image, WarpField};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub struct Introduction;
    #[doc = include_str!("../../../book/src/geometry.md")]
    pub struct Geometry;
    #[doc = include_str!("../../../book/src/saliency.md")]
    pub struct Saliency;
    #[doc = include_str!("../../../book/src/warping.md")]
    pub struct Warping;
    #[doc = include_str!("../../../book/src/streaming.md")]
    pub struct Streaming;
    #[doc = include_str!("../../../book/src/cli.md")]
    pub struct Cli;
}
