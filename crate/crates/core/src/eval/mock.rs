//! Stand-in detectors: ground truth plus controlled noise.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{EvalError, GroundTruthFrame};
use crate::bbox::BBox;
use crate::warp::{unwarp_boxes, warp_boxes, WarpField};

/// Boxes below this area (px²) are "small" and subject to dropping.
pub const SMALL_AREA: f64 = 32.0 * 32.0;

/// Jittered boxes are widened to at least this extent (px) per axis.
pub const MIN_BOX_EXTENT: f64 = 0.5;

// keeps the detector's random stream apart from a latency model that was
// given the same seed
const STREAM_SALT: u64 = 0x9e37_79b9_7f4a_7c15;

pub trait Detector {
    /// Predictions for `frame`, in original image coordinates.
    fn detect(&self, frame: &GroundTruthFrame) -> Vec<BBox>;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MockConfig {
    /// Standard deviation of the per-corner Gaussian jitter (px).
    pub jitter_px: f64,
    pub drop_small_prob: f64,
    /// Scores are `1 − |n|` with `n ~ N(0, score_noise)`, clamped to [0, 1].
    pub score_noise: f64,
}

impl Default for MockConfig {
    fn default() -> Self {
        Self {
            jitter_px: 0.0,
            drop_small_prob: 0.0,
            score_noise: 0.0,
        }
    }
}

impl MockConfig {
    pub fn validated(self) -> Result<Self, EvalError> {
        if !(self.jitter_px.is_finite() && self.jitter_px >= 0.0) {
            return Err(EvalError::Mock(format!("jitter_px {} must be >= 0", self.jitter_px)));
        }
        if !(0.0..=1.0).contains(&self.drop_small_prob) {
            return Err(EvalError::Mock(format!(
                "drop_small_prob {} outside [0, 1]",
                self.drop_small_prob
            )));
        }
        if !(self.score_noise.is_finite() && self.score_noise >= 0.0) {
            return Err(EvalError::Mock(format!("score_noise {} must be >= 0", self.score_noise)));
        }
        Ok(self)
    }
}

/// Copies ground truth with jitter, small-object drops and noisy scores.
/// Output depends only on `(frame_id, seed)` and the boxes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MockDetector {
    cfg: MockConfig,
    seed: u64,
}

impl MockDetector {
    pub fn new(cfg: MockConfig, seed: u64) -> Result<Self, EvalError> {
        Ok(Self {
            cfg: cfg.validated()?,
            seed,
        })
    }

    pub fn config(&self) -> &MockConfig {
        &self.cfg
    }

    /// Applies the noise model to `boxes` as if they came from `frame_id`.
    pub fn perturb(&self, boxes: &[BBox], frame_id: u64) -> Vec<BBox> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ STREAM_SALT);
        rng.set_stream(frame_id);
        let jitter = Normal::new(0.0, self.cfg.jitter_px).expect("validated jitter");
        let noise = Normal::new(0.0, self.cfg.score_noise).expect("validated noise");
        let mut out = Vec::with_capacity(boxes.len());
        for b in boxes {
            // fixed number of draws per box, whatever happens to it
            let u: f64 = rng.random();
            let d: [f64; 4] = std::array::from_fn(|_| jitter.sample(&mut rng));
            let n = noise.sample(&mut rng);
            if b.area() < SMALL_AREA && u < self.cfg.drop_small_prob {
                continue;
            }
            let (x1, x2) = spread(b.x1 + d[0], b.x2 + d[2]);
            let (y1, y2) = spread(b.y1 + d[1], b.y2 + d[3]);
            let score = (1.0 - n.abs()).clamp(0.0, 1.0);
            if let Ok(p) = BBox::new(x1, y1, x2, y2, score, b.class_id) {
                out.push(p);
            }
        }
        out
    }
}

fn spread(a: f64, b: f64) -> (f64, f64) {
    let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
    if hi - lo >= MIN_BOX_EXTENT {
        return (lo, hi);
    }
    let mid = 0.5 * (lo + hi);
    (mid - 0.5 * MIN_BOX_EXTENT, mid + 0.5 * MIN_BOX_EXTENT)
}

impl Detector for MockDetector {
    fn detect(&self, frame: &GroundTruthFrame) -> Vec<BBox> {
        self.perturb(&frame.boxes, frame.frame_id)
    }
}

/// Mock detector that "sees" the warped frame.
///
/// Ground truth is mapped into warped coordinates, perturbed there (so the
/// small-object rule applies to the warped size), and mapped back. With a
/// uniform field this models plain downsampling; with a saliency-driven
/// field, magnified regions keep objects that downsampling would lose.
#[derive(Debug, Clone)]
pub struct WarpedDetector {
    inner: MockDetector,
    field: WarpField,
}

impl WarpedDetector {
    pub fn new(inner: MockDetector, field: WarpField) -> Self {
        Self { inner, field }
    }

    pub fn field(&self) -> &WarpField {
        &self.field
    }
}

/// Clips a box to `[0, w−1] × [0, h−1]`; `None` if nothing is left.
fn clip(b: &BBox, w: f64, h: f64) -> Option<BBox> {
    let c = |v: f64, hi: f64| v.clamp(0.0, hi);
    b.with_corners(c(b.x1, w), c(b.y1, h), c(b.x2, w), c(b.y2, h)).ok()
}

impl Detector for WarpedDetector {
    fn detect(&self, frame: &GroundTruthFrame) -> Vec<BBox> {
        let (iw, ih) = (self.field.in_size().wf() - 1.0, self.field.in_size().hf() - 1.0);
        let (ow, oh) = (self.field.out_size().wf() - 1.0, self.field.out_size().hf() - 1.0);
        let inside: Vec<BBox> = frame.boxes.iter().filter_map(|b| clip(b, iw, ih)).collect();
        let warped = warp_boxes(&inside, &self.field).expect("clipped boxes lie inside the field");
        let found: Vec<BBox> = self
            .inner
            .perturb(&warped, frame.frame_id)
            .iter()
            .filter_map(|b| clip(b, ow, oh))
            .collect();
        unwarp_boxes(&found, &self.field).expect("clipped boxes lie inside the field")
    }
}
