//! JSON frame lists shared by ground truth and detection files:
//!
//! ```json
//! {"frames": [{"id": 0, "t_ms": 0.0,
//!              "boxes": [{"xyxy": [10, 20, 50, 80], "score": 0.9, "class": 1, "track": 7}]}]}
//! ```
//!
//! `score` and `track` are optional. Ground-truth boxes without a score get
//! 1.0; a frame either gives a track id for every box or for none.

use serde::{Deserialize, Serialize};

use super::{EvalError, GroundTruthFrame, Sequence};
use crate::bbox::BBox;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxRecord {
    pub xyxy: [f64; 4],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
    pub class: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub track: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameRecord {
    pub id: u64,
    pub t_ms: f64,
    pub boxes: Vec<BoxRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FramesFile {
    pub frames: Vec<FrameRecord>,
}

impl BoxRecord {
    pub fn to_bbox(&self) -> Result<BBox, EvalError> {
        let [x1, y1, x2, y2] = self.xyxy;
        BBox::new(x1, y1, x2, y2, self.score.unwrap_or(1.0), self.class).map_err(|e| EvalError::Schema(e.to_string()))
    }

    pub fn from_bbox(b: &BBox, track: Option<u64>) -> Self {
        Self {
            xyxy: [b.x1, b.y1, b.x2, b.y2],
            score: Some(b.score),
            class: b.class_id,
            track,
        }
    }

    /// Same record with new corners; score, class and track are kept as given.
    pub fn with_box(&self, b: &BBox) -> Self {
        Self {
            xyxy: [b.x1, b.y1, b.x2, b.y2],
            ..self.clone()
        }
    }
}

impl FramesFile {
    pub fn from_json(s: &str) -> Result<Self, EvalError> {
        serde_json::from_str(s).map_err(|e| EvalError::Schema(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("frames serialize")
    }

    pub fn to_frames(&self) -> Result<Vec<GroundTruthFrame>, EvalError> {
        self.frames
            .iter()
            .map(|f| {
                let boxes = f.boxes.iter().map(BoxRecord::to_bbox).collect::<Result<Vec<_>, _>>()?;
                let tracks: Vec<Option<u64>> = f.boxes.iter().map(|b| b.track).collect();
                let track_ids = if tracks.iter().all(Option::is_some) && !tracks.is_empty() {
                    Some(tracks.into_iter().flatten().collect())
                } else if tracks.iter().all(Option::is_none) {
                    None
                } else {
                    return Err(EvalError::Schema(format!("frame {}: track ids on some boxes only", f.id)));
                };
                Ok(GroundTruthFrame {
                    frame_id: f.id,
                    timestamp_ms: f.t_ms,
                    boxes,
                    track_ids,
                })
            })
            .collect()
    }

    pub fn to_sequence(&self) -> Result<Sequence, EvalError> {
        Sequence::new(self.to_frames()?)
    }

    pub fn from_frames(frames: &[GroundTruthFrame]) -> Self {
        Self {
            frames: frames
                .iter()
                .map(|f| FrameRecord {
                    id: f.frame_id,
                    t_ms: f.timestamp_ms,
                    boxes: f
                        .boxes
                        .iter()
                        .enumerate()
                        .map(|(i, b)| BoxRecord::from_bbox(b, f.track_ids.as_ref().map(|t| t[i])))
                        .collect(),
                })
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"{"frames": [
        {"id": 0, "t_ms": 0.0, "boxes": [{"xyxy": [1, 2, 3, 4], "class": 0, "track": 5}]},
        {"id": 1, "t_ms": 33.3, "boxes": [{"xyxy": [1, 2, 3, 4], "score": 0.5, "class": 2}]}
    ]}"#;

    #[test]
    fn parses_and_round_trips() {
        let f = FramesFile::from_json(SAMPLE).unwrap();
        let frames = f.to_frames().unwrap();
        assert_eq!(frames[0].boxes[0].score, 1.0);
        assert_eq!(frames[0].track_ids, Some(vec![5]));
        assert_eq!(frames[1].track_ids, None);
        assert_eq!(frames[1].boxes[0].class_id, 2);
        let back = FramesFile::from_json(&f.to_json()).unwrap();
        assert_eq!(back, f);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_boxes() {
        assert!(FramesFile::from_json(r#"{"frames": [], "extra": 1}"#).is_err());
        let bad = r#"{"frames": [{"id": 0, "t_ms": 0, "boxes": [{"xyxy": [3, 2, 1, 4], "class": 0}]}]}"#;
        assert!(FramesFile::from_json(bad).unwrap().to_frames().is_err());
        let mixed = r#"{"frames": [{"id": 0, "t_ms": 0, "boxes": [
            {"xyxy": [0, 0, 1, 1], "class": 0, "track": 1}, {"xyxy": [0, 0, 1, 1], "class": 0}]}]}"#;
        assert!(FramesFile::from_json(mixed).unwrap().to_frames().is_err());
    }
}
