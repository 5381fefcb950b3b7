use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BoxError {
    #[error("box corners out of order or non-finite: ({x1}, {y1}, {x2}, {y2})")]
    Inverted { x1: f64, y1: f64, x2: f64, y2: f64 },
    #[error("score {0} outside [0, 1]")]
    Score(f64),
}

/// Axis-aligned detection or ground-truth box in pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub x1: f64,
    pub y1: f64,
    pub x2: f64,
    pub y2: f64,
    pub score: f64,
    pub class_id: u32,
}

impl BBox {
    pub fn new(x1: f64, y1: f64, x2: f64, y2: f64, score: f64, class_id: u32) -> Result<Self, BoxError> {
        // written so NaN fails too
        if !(x2 > x1 && y2 > y1) || ![x1, y1, x2, y2].iter().all(|v| v.is_finite()) {
            return Err(BoxError::Inverted { x1, y1, x2, y2 });
        }
        if !(0.0..=1.0).contains(&score) {
            return Err(BoxError::Score(score));
        }
        Ok(Self {
            x1,
            y1,
            x2,
            y2,
            score,
            class_id,
        })
    }

    pub fn width(&self) -> f64 {
        self.x2 - self.x1
    }

    pub fn height(&self) -> f64 {
        self.y2 - self.y1
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    /// Same box with new corners; score and class are kept.
    pub fn with_corners(&self, x1: f64, y1: f64, x2: f64, y2: f64) -> Result<Self, BoxError> {
        BBox::new(x1, y1, x2, y2, self.score, self.class_id)
    }
}
