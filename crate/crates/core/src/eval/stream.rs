//! Virtual-clock streaming simulation and streaming AP.
//!
//! Frames arrive at their timestamps (shifted so frame 0 arrives at t = 0).
//! A single simulated detector, whenever idle, takes the most recent frame
//! that has arrived and not been processed, works on it for a sampled
//! latency, and emits its predictions at the finish time. Streaming AP then
//! scores every frame against the last emission strictly before its arrival.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::metrics::{coco_ap, ApParams, ApReport};
use super::mock::Detector;
use super::{EvalError, GroundTruthFrame};
use crate::bbox::BBox;

/// Frame period used when a sequence is synthesized without one.
pub const DEFAULT_FPS: f64 = 30.0;

/// Sampled latencies never drop below this (ms).
pub const MIN_LATENCY_MS: f64 = 0.1;

/// Allowed deviation of a frame interval from the mean period (ms).
pub const PERIOD_TOLERANCE_MS: f64 = 1e-2;

/// A validated ground-truth sequence with a constant frame period.
#[derive(Debug, Clone, PartialEq)]
pub struct Sequence {
    frames: Vec<GroundTruthFrame>,
}

impl Sequence {
    pub fn new(frames: Vec<GroundTruthFrame>) -> Result<Self, EvalError> {
        if frames.is_empty() {
            return Err(EvalError::EmptySequence);
        }
        let mut ids = std::collections::BTreeSet::new();
        for f in &frames {
            if !ids.insert(f.frame_id) {
                return Err(EvalError::DuplicateFrame(f.frame_id));
            }
            if let Some(t) = &f.track_ids {
                if t.len() != f.boxes.len() {
                    return Err(EvalError::TrackIdCount {
                        frame_id: f.frame_id,
                        boxes: f.boxes.len(),
                        tracks: t.len(),
                    });
                }
            }
        }
        for w in frames.windows(2) {
            if !(w[1].timestamp_ms > w[0].timestamp_ms) {
                return Err(EvalError::NonIncreasingTime { frame_id: w[1].frame_id });
            }
        }
        let n = frames.len();
        if n > 2 {
            let period = (frames[n - 1].timestamp_ms - frames[0].timestamp_ms) / (n - 1) as f64;
            for w in frames.windows(2) {
                let got = w[1].timestamp_ms - w[0].timestamp_ms;
                if (got - period).abs() > PERIOD_TOLERANCE_MS {
                    return Err(EvalError::IrregularPeriod {
                        frame_id: w[1].frame_id,
                        expected: period,
                        got,
                    });
                }
            }
        }
        Ok(Self { frames })
    }

    /// Frames `0..n` at `fps`, with boxes from `boxes_at(k)`.
    pub fn synthetic(n: usize, fps: f64, mut boxes_at: impl FnMut(usize) -> Vec<BBox>) -> Result<Self, EvalError> {
        let frames = (0..n)
            .map(|k| GroundTruthFrame {
                frame_id: k as u64,
                timestamp_ms: k as f64 * 1000.0 / fps,
                boxes: boxes_at(k),
                track_ids: None,
            })
            .collect();
        Self::new(frames)
    }

    pub fn frames(&self) -> &[GroundTruthFrame] {
        &self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Arrival time of frame `k` on the virtual clock.
    pub fn arrival_ms(&self, k: usize) -> f64 {
        self.frames[k].timestamp_ms - self.frames[0].timestamp_ms
    }

    /// Mean frame period (ms); a one-frame sequence reports the 30 fps period.
    pub fn period_ms(&self) -> f64 {
        let n = self.frames.len();
        if n < 2 {
            return 1000.0 / DEFAULT_FPS;
        }
        (self.frames[n - 1].timestamp_ms - self.frames[0].timestamp_ms) / (n - 1) as f64
    }

    /// Stream length: `n` frame periods.
    pub fn duration_ms(&self) -> f64 {
        self.frames.len() as f64 * self.period_ms()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LatencyKind {
    Constant,
    Gaussian,
}

/// Per-frame detector latency.
///
/// Gaussian samples are drawn from a ChaCha8 stream selected by the frame
/// id, so a frame's latency does not depend on which other frames were
/// processed before it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatencyModel {
    pub kind: LatencyKind,
    pub mean_ms: f64,
    #[serde(default)]
    pub std_ms: f64,
    #[serde(default)]
    pub seed: u64,
}

impl LatencyModel {
    pub fn constant(ms: f64) -> Result<Self, EvalError> {
        Self {
            kind: LatencyKind::Constant,
            mean_ms: ms,
            std_ms: 0.0,
            seed: 0,
        }
        .validated()
    }

    pub fn gaussian(mean_ms: f64, std_ms: f64, seed: u64) -> Result<Self, EvalError> {
        Self {
            kind: LatencyKind::Gaussian,
            mean_ms,
            std_ms,
            seed,
        }
        .validated()
    }

    pub fn validated(self) -> Result<Self, EvalError> {
        if !(self.mean_ms.is_finite() && self.mean_ms >= 0.0) {
            return Err(EvalError::Latency(format!("mean {} must be finite and >= 0", self.mean_ms)));
        }
        if !(self.std_ms.is_finite() && self.std_ms >= 0.0) {
            return Err(EvalError::Latency(format!("std {} must be finite and >= 0", self.std_ms)));
        }
        Ok(self)
    }

    /// Latency (ms) for `frame_id`.
    pub fn sample(&self, frame_id: u64) -> f64 {
        let raw = match self.kind {
            LatencyKind::Constant => self.mean_ms,
            LatencyKind::Gaussian => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                rng.set_stream(frame_id);
                Normal::new(self.mean_ms, self.std_ms)
                    .expect("validated std")
                    .sample(&mut rng)
            }
        };
        raw.max(MIN_LATENCY_MS)
    }
}

/// Scheduling policy of the simulated detector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Policy {
    /// When idle, process the newest arrived frame; skip anything older.
    #[default]
    ProcessLatest,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamEvent {
    /// Virtual time at which processing started.
    pub start_ms: f64,
    pub emit_ms: f64,
    pub source_frame_id: u64,
    /// Index of the source frame in the sequence.
    pub source_index: usize,
    pub predictions: Vec<BBox>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamTimeline {
    pub events: Vec<StreamEvent>,
}

impl StreamTimeline {
    pub fn processed_frame_ids(&self) -> Vec<u64> {
        self.events.iter().map(|e| e.source_frame_id).collect()
    }

    pub fn emit_times(&self) -> Vec<f64> {
        self.events.iter().map(|e| e.emit_ms).collect()
    }

    /// Emissions per second of stream time.
    pub fn throughput_fps(&self, seq: &Sequence) -> f64 {
        self.events.len() as f64 / (seq.duration_ms() / 1000.0)
    }
}

/// Runs the detector over `seq` on a virtual clock.
///
/// Emissions at or after the last frame's arrival are still recorded, but
/// the simulation stops starting new work once every frame has arrived and
/// the newest one is done.
pub fn simulate_stream(seq: &Sequence, det: &dyn Detector, latency: &LatencyModel, policy: Policy) -> StreamTimeline {
    let Policy::ProcessLatest = policy;
    let n = seq.len();
    let arrivals: Vec<f64> = (0..n).map(|k| seq.arrival_ms(k)).collect();
    let mut events = Vec::new();
    let mut clock = 0.0;
    let mut next_unseen = 0usize;
    while next_unseen < n {
        // newest frame that has arrived by `clock`
        let latest = arrivals.partition_point(|&t| t <= clock);
        if latest <= next_unseen {
            clock = arrivals[next_unseen];
            continue;
        }
        let k = latest - 1;
        let frame = &seq.frames()[k];
        let emit = clock + latency.sample(frame.frame_id);
        events.push(StreamEvent {
            start_ms: clock,
            emit_ms: emit,
            source_frame_id: frame.frame_id,
            source_index: k,
            predictions: det.detect(frame),
        });
        next_unseen = k + 1;
        clock = emit;
    }
    StreamTimeline { events }
}

/// For every frame, the index of the last event emitted strictly before the
/// frame's arrival.
pub fn associate(timeline: &StreamTimeline, seq: &Sequence) -> Vec<Option<usize>> {
    (0..seq.len())
        .map(|k| {
            let t = seq.arrival_ms(k);
            timeline.events.partition_point(|e| e.emit_ms < t).checked_sub(1)
        })
        .collect()
}

/// Index of the first frame scored by [`streaming_ap`].
///
/// Frame 0 arrives at t = 0, the instant the clock starts, so no detector
/// can have emitted anything strictly before it. It is left out of the
/// score whenever the sequence has later frames.
pub fn first_scored_frame(seq: &Sequence) -> usize {
    usize::from(seq.len() > 1)
}

/// Streaming AP: [`coco_ap`] over frames paired with their associated
/// emissions. Frames with no earlier emission get an empty prediction set.
pub fn streaming_ap(timeline: &StreamTimeline, seq: &Sequence, params: &ApParams) -> ApReport {
    let first = first_scored_frame(seq);
    let dets: Vec<Vec<BBox>> = associate(timeline, seq)
        .into_iter()
        .skip(first)
        .map(|e| e.map(|i| timeline.events[i].predictions.clone()).unwrap_or_default())
        .collect();
    coco_ap(&dets, &seq.frames()[first..], params)
}
