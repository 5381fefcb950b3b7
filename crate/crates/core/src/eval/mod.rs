//! Detection metrics and the streaming evaluation harness.

pub mod io;
pub mod metrics;
pub mod mock;
pub mod stream;
pub mod track;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bbox::BBox;

pub use metrics::{coco_ap, iou, ApParams, ApReport, AreaRange, ClassAp};
pub use mock::{Detector, MockConfig, MockDetector, WarpedDetector};
pub use stream::{
    associate, first_scored_frame, simulate_stream, streaming_ap, LatencyKind, LatencyModel, Policy, Sequence, StreamEvent,
    StreamTimeline,
};
pub use track::{ate, min_object_size_tracked, track_extension, AteAggregation, TrackLengths};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("sequence has no frames")]
    EmptySequence,
    #[error("timestamps must increase strictly (frame {frame_id})")]
    NonIncreasingTime { frame_id: u64 },
    #[error("frame period is not constant (frame {frame_id}: {got} ms vs {expected} ms)")]
    IrregularPeriod { frame_id: u64, expected: f64, got: f64 },
    #[error("duplicate frame id {0}")]
    DuplicateFrame(u64),
    #[error("frame {frame_id}: {boxes} boxes but {tracks} track ids")]
    TrackIdCount { frame_id: u64, boxes: usize, tracks: usize },
    #[error("latency model: {0}")]
    Latency(String),
    #[error("mock detector: {0}")]
    Mock(String),
    #[error("ground-truth track length {0} is below 150 frames")]
    TooShort(u32),
    #[error("track lengths out of range: l_m = {l_m}, l_b = {l_b}, l_gt = {l_gt}")]
    TrackLength { l_m: u32, l_b: u32, l_gt: u32 },
    #[error("ground-truth track has a single object size")]
    DegenerateTrack,
    #[error("empty track")]
    EmptyTrack,
    #[error("no qualifying tracks")]
    NoTracks,
    #[error("{0}")]
    Schema(String),
}

/// Ground truth for one frame of a sequence. Box scores are not used.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthFrame {
    pub frame_id: u64,
    pub timestamp_ms: f64,
    pub boxes: Vec<BBox>,
    pub track_ids: Option<Vec<u64>>,
}
