//! Separable saliency-guided warps.
//!
//! A [`WarpField`] holds one monotone [`AxisMap`] per axis. Each map sends an
//! output pixel index to a (fractional) input pixel index; resampling an
//! image reads the input bilinearly at those positions. Because the axes are
//! independent, axis-aligned boxes stay axis-aligned in both directions.

mod axis;
mod image;

pub use self::axis::{
    inverse_axis_map, inverse_axis_map_with, kernel_sigma_samples, AxisMapOptions,
    KERNEL_RADIUS_SIGMAS,
};
pub use self::image::{warp_image, Image, ImageError};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bbox::{BBox, BoxError};
use crate::geometry::{ImageSize, Point2};
use crate::saliency::SaliencyMap;

/// Adjacent axis-map values closer than this count as a flat segment.
pub const FLAT_TOLERANCE: f64 = 1e-9;

/// Slack allowed when checking that a coordinate lies inside an axis range.
const BOUNDS_SLACK: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WarpError {
    #[error("saliency must be positive, sample {index} is {value}")]
    NonPositiveSaliency { index: usize, value: f64 },
    #[error("axis map decreases at index {index} (step {step:e})")]
    MonotonicityViolation { index: usize, step: f64 },
    #[error("axis map is flat at index {index}")]
    FlatSegment { index: usize },
    #[error("axis map value {value} outside [0, {max}]")]
    ValueOutOfRange { value: f64, max: f64 },
    #[error("axes need at least two samples")]
    AxisTooShort,
    #[error("kernel sigma fraction {0} outside (0, 0.5]")]
    BadSigma(f64),
    #[error("output size {0} is smaller than 8x8")]
    OutputTooSmall(ImageSize),
    #[error("coordinate {value} outside [{lo}, {hi}]")]
    OutOfBounds { value: f64, lo: f64, hi: f64 },
    #[error(transparent)]
    Box(#[from] BoxError),
    #[error("warp field JSON: {0}")]
    Json(String),
}

pub type Result<T> = std::result::Result<T, WarpError>;

/// Strictly increasing map from output index to input coordinate.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct AxisMap {
    values: Vec<f64>,
    #[serde(skip)]
    in_len: usize,
}

impl AxisMap {
    pub fn new(values: Vec<f64>, in_len: usize) -> Result<Self> {
        if values.len() < 2 || in_len < 2 {
            return Err(WarpError::AxisTooShort);
        }
        let max = (in_len - 1) as f64;
        if let Some(&value) = values.iter().find(|v| !(**v >= 0.0 && **v <= max)) {
            return Err(WarpError::ValueOutOfRange { value, max });
        }
        for (index, w) in values.windows(2).enumerate() {
            let step = w[1] - w[0];
            if step < -FLAT_TOLERANCE {
                return Err(WarpError::MonotonicityViolation { index, step });
            }
            if step <= FLAT_TOLERANCE {
                return Err(WarpError::FlatSegment { index });
            }
        }
        Ok(Self { values, in_len })
    }

    /// Evenly spaced map covering the whole input.
    pub fn uniform(in_len: usize, out_len: usize) -> Result<Self> {
        if in_len < 2 || out_len < 2 {
            return Err(WarpError::AxisTooShort);
        }
        let step = (in_len - 1) as f64 / (out_len - 1) as f64;
        let mut values: Vec<f64> = (0..out_len).map(|i| i as f64 * step).collect();
        values[out_len - 1] = (in_len - 1) as f64;
        Self::new(values, in_len)
    }

    pub fn identity(len: usize) -> Result<Self> {
        Self::new((0..len).map(|i| i as f64).collect(), len)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn in_len(&self) -> usize {
        self.in_len
    }

    pub fn out_len(&self) -> usize {
        self.values.len()
    }

    /// Input coordinate of the fractional output coordinate `u`.
    pub fn unwarp(&self, u: f64) -> Result<f64> {
        let hi = (self.values.len() - 1) as f64;
        let u = check_range(u, hi)?;
        let i = (u.floor() as usize).min(self.values.len() - 2);
        let f = u - i as f64;
        Ok(self.values[i] + f * (self.values[i + 1] - self.values[i]))
    }

    /// Output coordinate whose input coordinate is `x`: the inverse of
    /// [`AxisMap::unwarp`], found by bisection.
    pub fn warp(&self, x: f64) -> Result<f64> {
        let x = check_range(x, (self.in_len - 1) as f64)?;
        let v = &self.values;
        if x <= v[0] {
            return Ok(0.0);
        }
        if x >= v[v.len() - 1] {
            return Ok((v.len() - 1) as f64);
        }
        // first index with v[i] > x, so v[i-1] <= x < v[i]
        let i = v.partition_point(|&t| t <= x);
        let (a, b) = (v[i - 1], v[i]);
        Ok((i - 1) as f64 + (x - a) / (b - a))
    }
}

fn check_range(value: f64, hi: f64) -> Result<f64> {
    if !(value >= -BOUNDS_SLACK && value <= hi + BOUNDS_SLACK) {
        return Err(WarpError::OutOfBounds { value, lo: 0.0, hi });
    }
    Ok(value.clamp(0.0, hi))
}

/// A separable inverse warp: `tx` for columns, `ty` for rows.
#[derive(Debug, Clone, PartialEq)]
pub struct WarpField {
    tx: AxisMap,
    ty: AxisMap,
}

/// JSON form: `{"tx": [...], "ty": [...], "in_size": [w, h]}`.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WarpFieldJson {
    tx: Vec<f64>,
    ty: Vec<f64>,
    in_size: [u32; 2],
}

impl WarpField {
    pub fn new(tx: AxisMap, ty: AxisMap) -> Self {
        Self { tx, ty }
    }

    pub fn identity(size: ImageSize) -> Result<Self> {
        Ok(Self {
            tx: AxisMap::identity(size.w() as usize)?,
            ty: AxisMap::identity(size.h() as usize)?,
        })
    }

    /// Plain resize from `in_size` to `out_size`.
    pub fn uniform(in_size: ImageSize, out_size: ImageSize) -> Result<Self> {
        Ok(Self {
            tx: AxisMap::uniform(in_size.w() as usize, out_size.w() as usize)?,
            ty: AxisMap::uniform(in_size.h() as usize, out_size.h() as usize)?,
        })
    }

    pub fn tx(&self) -> &AxisMap {
        &self.tx
    }

    pub fn ty(&self) -> &AxisMap {
        &self.ty
    }

    pub fn in_size(&self) -> ImageSize {
        ImageSize::new(self.tx.in_len as u32, self.ty.in_len as u32).expect("axis maps have length >= 2")
    }

    pub fn out_size(&self) -> ImageSize {
        ImageSize::new(self.tx.out_len() as u32, self.ty.out_len() as u32).expect("axis maps have length >= 2")
    }

    pub fn to_json(&self) -> String {
        let in_size = self.in_size();
        serde_json::to_string(&WarpFieldJson {
            tx: self.tx.values.clone(),
            ty: self.ty.values.clone(),
            in_size: [in_size.w(), in_size.h()],
        })
        .expect("plain numbers serialize")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let raw: WarpFieldJson = serde_json::from_str(s).map_err(|e| WarpError::Json(e.to_string()))?;
        Ok(Self {
            tx: AxisMap::new(raw.tx, raw.in_size[0] as usize)?,
            ty: AxisMap::new(raw.ty, raw.in_size[1] as usize)?,
        })
    }
}

/// Column and row sums of a saliency map: `sx[i] = Σ_j S[i, j]`,
/// `sy[j] = Σ_i S[i, j]`.
pub fn marginalize(s: &SaliencyMap) -> (Vec<f64>, Vec<f64>) {
    let (gw, gh) = (s.grid().w() as usize, s.grid().h() as usize);
    let mut sx = vec![0.0; gw];
    let mut sy = vec![0.0; gh];
    for (j, row_sum) in sy.iter_mut().enumerate() {
        for (i, &v) in s.row(j).iter().enumerate() {
            sx[i] += v;
            *row_sum += v;
        }
    }
    (sx, sy)
}

/// Warp field that resamples `s.target_size()` into `out_size`.
pub fn build_warp(s: &SaliencyMap, out_size: ImageSize, opts: AxisMapOptions) -> Result<WarpField> {
    if out_size.w() < 8 || out_size.h() < 8 {
        return Err(WarpError::OutputTooSmall(out_size));
    }
    let (sx, sy) = marginalize(s);
    let target = s.target_size();
    Ok(WarpField {
        tx: inverse_axis_map_with(&sx, target.w() as usize, out_size.w() as usize, opts)?,
        ty: inverse_axis_map_with(&sy, target.h() as usize, out_size.h() as usize, opts)?,
    })
}

/// Maps points from warped-image coordinates back to the original image.
pub fn unwarp_points(pts: &[Point2], wf: &WarpField) -> Result<Vec<Point2>> {
    pts.iter()
        .map(|p| Ok(Point2::new(wf.tx.unwarp(p.x)?, wf.ty.unwarp(p.y)?)))
        .collect()
}

/// Maps points from the original image into warped coordinates.
pub fn warp_points(pts: &[Point2], wf: &WarpField) -> Result<Vec<Point2>> {
    pts.iter()
        .map(|p| Ok(Point2::new(wf.tx.warp(p.x)?, wf.ty.warp(p.y)?)))
        .collect()
}

/// Maps boxes from warped coordinates back to the original image.
///
/// Monotone axis maps send the box's corner pair to the corners of the mapped
/// box, so two point lookups per box suffice.
pub fn unwarp_boxes(boxes: &[BBox], wf: &WarpField) -> Result<Vec<BBox>> {
    boxes
        .iter()
        .map(|b| {
            b.with_corners(wf.tx.unwarp(b.x1)?, wf.ty.unwarp(b.y1)?, wf.tx.unwarp(b.x2)?, wf.ty.unwarp(b.y2)?)
                .map_err(WarpError::from)
        })
        .collect()
}

pub fn warp_boxes(boxes: &[BBox], wf: &WarpField) -> Result<Vec<BBox>> {
    boxes
        .iter()
        .map(|b| {
            b.with_corners(wf.tx.warp(b.x1)?, wf.ty.warp(b.y1)?, wf.tx.warp(b.x2)?, wf.ty.warp(b.y2)?)
                .map_err(WarpError::from)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{PlaneKind, PlaneQuad};
    use crate::saliency::{two_plane_saliency, WarpParams};

    fn size(w: u32, h: u32) -> ImageSize {
        ImageSize::new(w, h).unwrap()
    }

    #[test]
    fn marginals_of_constant_map() {
        let m = SaliencyMap::constant(size(8, 12), size(64, 48), 0.5).unwrap();
        let (sx, sy) = marginalize(&m);
        assert_eq!(sx, vec![6.0; 8]);
        assert_eq!(sy, vec![4.0; 12]);
    }

    #[test]
    fn marginals_locate_a_spike() {
        let g = size(8, 8);
        let mut v = vec![1e-4; 64];
        v[2 * 8 + 3] = 1.0;
        let m = SaliencyMap::new(v, g, size(64, 64), [0; 32]).unwrap();
        let (sx, sy) = marginalize(&m);
        let argmax = |a: &[f64]| a.iter().enumerate().max_by(|x, y| x.1.total_cmp(y.1)).unwrap().0;
        assert_eq!(argmax(&sx), 3);
        assert_eq!(argmax(&sy), 2);
    }

    #[test]
    fn axis_map_rejects_bad_values() {
        assert!(matches!(AxisMap::new(vec![0.0, 2.0, 1.0, 3.0], 4), Err(WarpError::MonotonicityViolation { index: 1, .. })));
        assert!(matches!(AxisMap::new(vec![0.0, 1.0, 1.0, 3.0], 4), Err(WarpError::FlatSegment { index: 1 })));
        assert!(matches!(AxisMap::new(vec![0.0, 4.0], 4), Err(WarpError::ValueOutOfRange { .. })));
        assert!(AxisMap::new(vec![0.0], 4).is_err());
    }

    #[test]
    fn constant_saliency_builds_uniform_downsample() {
        let m = SaliencyMap::constant(size(96, 60), size(1920, 1200), 1.0).unwrap();
        let wf = build_warp(&m, size(960, 600), AxisMapOptions::new(0.06)).unwrap();
        let expected = WarpField::uniform(size(1920, 1200), size(960, 600)).unwrap();
        for (a, b) in wf.tx().values().iter().zip(expected.tx().values()) {
            assert!((a - b).abs() < 1e-9);
        }
        for (a, b) in wf.ty().values().iter().zip(expected.ty().values()) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn horizontal_variation_leaves_rows_uniform() {
        let g = size(32, 20);
        let v: Vec<f64> = (0..20).flat_map(|_| (0..32).map(|i| 1.0 + i as f64 * 0.1)).collect();
        let m = SaliencyMap::new(v, g, size(320, 200), [0; 32]).unwrap();
        let wf = build_warp(&m, size(160, 100), AxisMapOptions::new(0.06)).unwrap();
        let uniform = AxisMap::uniform(200, 100).unwrap();
        for (a, b) in wf.ty().values().iter().zip(uniform.values()) {
            assert!((a - b).abs() < 1e-9);
        }
        assert!(wf.tx().values().iter().zip(uniform.values()).any(|(a, b)| (a - b).abs() > 0.1));
    }

    #[test]
    fn horizon_rows_are_magnified() {
        let s = size(1920, 1200);
        let p = WarpParams::with_defaults(Point2::new(960.0, 600.0)).unwrap();
        let sal = two_plane_saliency(&p, s, size(96, 60)).unwrap();
        let wf = build_warp(&sal, size(960, 600), AxisMapOptions::new(0.06)).unwrap();
        let ty = wf.ty().values();
        // the ground plane's far edge sits between the horizon and the bottom
        let far_edge = p.quad(PlaneKind::Ground, s).unwrap().corners()[PlaneQuad::FAR_LEFT].y;
        let (densest, spacing) = ty
            .windows(2)
            .filter(|w| w[0] >= far_edge)
            .map(|w| (w[0], w[1] - w[0]))
            .fold((0.0, f64::MAX), |best, cur| if cur.1 < best.1 { cur } else { best });
        let bottom = ty[599] - ty[598];
        assert!(spacing < 0.5 * bottom, "{spacing} vs {bottom}");
        assert!(densest - far_edge < 100.0, "densest row {densest}, far edge {far_edge}");
    }

    #[test]
    fn point_examples() {
        let id = WarpField::identity(size(64, 48)).unwrap();
        let p = Point2::new(10.5, 20.25);
        assert_eq!(unwarp_points(&[p], &id).unwrap()[0], p);
        assert_eq!(warp_points(&[p], &id).unwrap()[0], p);

        let half = WarpField::uniform(size(64, 48), size(32, 24)).unwrap();
        let u = unwarp_points(&[Point2::new(5.0, 5.0)], &half).unwrap()[0];
        assert!((u.x - 10.0).abs() < 0.51 && (u.y - 10.0).abs() < 0.51);
        let w = warp_points(&[Point2::new(10.0, 10.0)], &half).unwrap()[0];
        assert!((w.x - 5.0).abs() < 0.51 && (w.y - 5.0).abs() < 0.51);
    }

    #[test]
    fn out_of_bounds_points() {
        let half = WarpField::uniform(size(64, 48), size(32, 24)).unwrap();
        assert!(matches!(unwarp_points(&[Point2::new(32.0, 1.0)], &half), Err(WarpError::OutOfBounds { .. })));
        assert!(matches!(warp_points(&[Point2::new(1.0, -0.5)], &half), Err(WarpError::OutOfBounds { .. })));
    }

    #[test]
    fn box_examples() {
        let b = BBox::new(2.0, 2.0, 4.0, 4.0, 0.7, 3).unwrap();
        let id = WarpField::identity(size(64, 48)).unwrap();
        assert_eq!(unwarp_boxes(&[b], &id).unwrap(), vec![b]);

        let half = WarpField::uniform(size(64, 48), size(32, 24)).unwrap();
        let u = unwarp_boxes(&[b], &half).unwrap()[0];
        for (got, want) in [(u.x1, 4.0), (u.y1, 4.0), (u.x2, 8.0), (u.y2, 8.0)] {
            assert!((got - want).abs() < 0.51, "{u:?}");
        }
        assert_eq!((u.score, u.class_id), (0.7, 3));
    }

    #[test]
    fn field_json_round_trip() {
        let wf = WarpField::uniform(size(64, 48), size(32, 24)).unwrap();
        let back = WarpField::from_json(&wf.to_json()).unwrap();
        assert_eq!(back, wf);
        let v: serde_json::Value = serde_json::from_str(&wf.to_json()).unwrap();
        assert_eq!(v["in_size"], serde_json::json!([64, 48]));
        assert!(WarpField::from_json(r#"{"tx":[0,1],"ty":[0,1],"in_size":[2,2],"extra":1}"#).is_err());
    }
}
