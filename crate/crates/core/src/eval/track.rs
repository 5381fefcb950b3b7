//! Track-quality metrics: track-length extension and the smallest object
//! size a tracker keeps hold of.

use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::bbox::BBox;

/// Ground-truth tracks shorter than this (5 s at 30 fps) are not scored.
pub const MIN_GT_TRACK_FRAMES: u32 = 150;

/// Extension of one track: `(l_m − l_b) / l_gt`, where `l_m` and `l_b` are
/// the tracked lengths (frames) with the method and the baseline.
pub fn track_extension(l_m: u32, l_b: u32, l_gt: u32) -> Result<f64, EvalError> {
    if l_gt < MIN_GT_TRACK_FRAMES {
        return Err(EvalError::TooShort(l_gt));
    }
    if l_m > l_gt || l_b > l_gt {
        return Err(EvalError::TrackLength { l_m, l_b, l_gt });
    }
    Ok((f64::from(l_m) - f64::from(l_b)) / f64::from(l_gt))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrackLengths {
    pub l_m: u32,
    pub l_b: u32,
    pub l_gt: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AteAggregation {
    /// Plain mean of per-track extensions.
    #[default]
    Mean,
    /// Extensions weighted by ground-truth length, i.e. `Σ(l_m − l_b) / Σ l_gt`.
    LengthWeighted,
}

/// Average track extension over the tracks that are long enough to count.
pub fn ate(tracks: &[TrackLengths], agg: AteAggregation) -> Result<f64, EvalError> {
    let mut sum = 0.0;
    let mut weight = 0.0;
    for t in tracks.iter().filter(|t| t.l_gt >= MIN_GT_TRACK_FRAMES) {
        let e = track_extension(t.l_m, t.l_b, t.l_gt)?;
        let w = match agg {
            AteAggregation::Mean => 1.0,
            AteAggregation::LengthWeighted => f64::from(t.l_gt),
        };
        sum += w * e;
        weight += w;
    }
    if weight == 0.0 {
        return Err(EvalError::NoTracks);
    }
    Ok(sum / weight)
}

/// Normalized log-size of the smallest matched prediction along a track:
/// `(c − o) / (O − o)` with `o`, `O` the min and max log-area over the
/// ground-truth boxes and `c` the log-area of `smallest_matched`.
pub fn min_object_size_tracked(track_gt: &[BBox], smallest_matched: &BBox) -> Result<f64, EvalError> {
    if track_gt.is_empty() {
        return Err(EvalError::EmptyTrack);
    }
    let sizes = track_gt.iter().map(|b| b.area().ln());
    let lo = sizes.clone().fold(f64::INFINITY, f64::min);
    let hi = sizes.fold(f64::NEG_INFINITY, f64::max);
    if hi <= lo {
        return Err(EvalError::DegenerateTrack);
    }
    Ok((smallest_matched.area().ln() - lo) / (hi - lo))
}
