//! Plane quadrilaterals parameterized by a vanishing point, four-point
//! homographies, and vanishing points from annotated lines.
//!
//! Image coordinates have the origin at the top-left corner with `y` pointing
//! down. A frame of size `(w, h)` spans `[0, w] × [0, h]`.

use std::f64::consts::FRAC_PI_2;

use nalgebra::{Matrix2, Matrix3, SMatrix, Vector2, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Margin kept between a plane angle and ±π/2 so `tan` stays finite.
pub const THETA_MARGIN: f64 = 1e-3;

/// Minimum triangle area (px²) for any three corners of a [`PlaneQuad`].
pub const MIN_CORNER_TRIANGLE_AREA: f64 = 1e-6;

/// Angular tolerance under which two lines count as parallel.
pub const PARALLEL_TOLERANCE_RAD: f64 = 1e-6;

const MIN_SEGMENT_LENGTH: f64 = 1e-9;
const MIN_HOMOGENEOUS_W: f64 = 1e-12;
// |det| over the product of column norms; 1 for orthogonal columns and
// independent of how each column is scaled
const MIN_HADAMARD_RATIO: f64 = 1e-12;
const CORNER_RESIDUAL_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("all line segments are mutually parallel")]
    AllParallel,
    #[error("degenerate line segment: endpoints coincide")]
    DegenerateSegment,
    #[error("at least two line segments are required, got {0}")]
    TooFewLines(usize),
    #[error("degenerate quadrilateral: {0}")]
    DegenerateQuad(String),
    #[error("point maps to infinity under the homography")]
    AtInfinity,
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("image size must be at least 2x2, got {w}x{h}")]
    InvalidSize { w: u32, h: u32 },
}

pub type Result<T> = std::result::Result<T, GeometryError>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn distance(&self, other: &Point2) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    /// `t · self + (1 − t) · other`
    pub fn lerp_towards(&self, other: &Point2, t: f64) -> Point2 {
        Point2::new(t * self.x + (1.0 - t) * other.x, t * self.y + (1.0 - t) * other.y)
    }
}

/// Pixel dimensions of an image, a BEV rectangle or a saliency grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "[u32; 2]", into = "[u32; 2]")]
pub struct ImageSize {
    w: u32,
    h: u32,
}

impl ImageSize {
    pub fn new(w: u32, h: u32) -> Result<Self> {
        if w < 2 || h < 2 {
            return Err(GeometryError::InvalidSize { w, h });
        }
        Ok(Self { w, h })
    }

    pub fn w(&self) -> u32 {
        self.w
    }

    pub fn h(&self) -> u32 {
        self.h
    }

    pub fn wf(&self) -> f64 {
        f64::from(self.w)
    }

    pub fn hf(&self) -> f64 {
        f64::from(self.h)
    }
}

impl TryFrom<[u32; 2]> for ImageSize {
    type Error = GeometryError;

    fn try_from(v: [u32; 2]) -> Result<Self> {
        ImageSize::new(v[0], v[1])
    }
}

impl From<ImageSize> for [u32; 2] {
    fn from(s: ImageSize) -> Self {
        [s.w, s.h]
    }
}

impl std::fmt::Display for ImageSize {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}x{}", self.w, self.h)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlaneKind {
    Ground,
    Top,
}

/// Four corners of a planar region as seen by the camera.
///
/// Corner order is fixed: near-left, near-right, far-left, far-right. "Near"
/// is the edge closest to the camera; for the ground plane that is the bottom
/// image edge, for the top plane the top image edge. Corners may lie outside
/// the image.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlaneQuad {
    corners: [Point2; 4],
    kind: PlaneKind,
}

impl PlaneQuad {
    pub const NEAR_LEFT: usize = 0;
    pub const NEAR_RIGHT: usize = 1;
    pub const FAR_LEFT: usize = 2;
    pub const FAR_RIGHT: usize = 3;

    pub fn new(corners: [Point2; 4], kind: PlaneKind) -> Result<Self> {
        if corners.iter().any(|c| !c.is_finite()) {
            return Err(GeometryError::NonFinite("quad corners"));
        }
        for (i, j, k) in [(0, 1, 2), (0, 1, 3), (0, 2, 3), (1, 2, 3)] {
            let area = triangle_area(&corners[i], &corners[j], &corners[k]);
            if area <= MIN_CORNER_TRIANGLE_AREA {
                return Err(GeometryError::DegenerateQuad(format!(
                    "corners {i}, {j}, {k} are collinear (area {area:e})"
                )));
            }
        }
        Ok(Self { corners, kind })
    }

    /// The BEV rectangle of `size` in the canonical corner order: near edge at
    /// `y = h`, far edge at `y = 0`.
    pub fn bev_rectangle(size: ImageSize, kind: PlaneKind) -> Self {
        let (w, h) = (size.wf(), size.hf());
        Self {
            corners: [
                Point2::new(0.0, h),
                Point2::new(w, h),
                Point2::new(0.0, 0.0),
                Point2::new(w, 0.0),
            ],
            kind,
        }
    }

    pub fn corners(&self) -> &[Point2; 4] {
        &self.corners
    }

    pub fn kind(&self) -> PlaneKind {
        self.kind
    }

    pub fn centroid(&self) -> Point2 {
        let (sx, sy) = self
            .corners
            .iter()
            .fold((0.0, 0.0), |(sx, sy), c| (sx + c.x, sy + c.y));
        Point2::new(sx / 4.0, sy / 4.0)
    }
}

fn triangle_area(a: &Point2, b: &Point2, c: &Point2) -> f64 {
    0.5 * ((b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y)).abs()
}

/// Clamps a plane angle into `[−π/2 + margin, π/2 − margin]`.
pub fn clamp_theta(theta: f64) -> f64 {
    theta.clamp(-FRAC_PI_2 + THETA_MARGIN, FRAC_PI_2 - THETA_MARGIN)
}

/// Builds the quadrilateral of one plane of the prior.
///
/// The far corners are placed on the segments from the vanishing point `v`
/// to points on the left and right image borders selected by `theta_a` and
/// `theta_b`; `alpha` picks the position along each segment (`0` is `v`
/// itself, `1` the border point). The ground plane opens downwards from the
/// horizon, the top plane upwards. Out-of-range angles and weights are
/// clamped.
pub fn plane_quad(
    v: Point2,
    theta_a: f64,
    theta_b: f64,
    alpha_a: f64,
    alpha_b: f64,
    kind: PlaneKind,
    size: ImageSize,
) -> Result<PlaneQuad> {
    if !v.is_finite() {
        return Err(GeometryError::NonFinite("vanishing point"));
    }
    if ![theta_a, theta_b, alpha_a, alpha_b].iter().all(|x| x.is_finite()) {
        return Err(GeometryError::NonFinite("plane angles or weights"));
    }
    let (w, h) = (size.wf(), size.hf());
    let (ta, tb) = (clamp_theta(theta_a).tan(), clamp_theta(theta_b).tan());
    let (aa, ab) = (alpha_a.clamp(0.0, 1.0), alpha_b.clamp(0.0, 1.0));

    let sign = match kind {
        PlaneKind::Ground => 1.0,
        PlaneKind::Top => -1.0,
    };
    let edge_left = Point2::new(0.0, v.y + sign * v.x * ta);
    let edge_right = Point2::new(w, v.y + sign * (w - v.x) * tb);
    let far_left = edge_left.lerp_towards(&v, aa);
    let far_right = edge_right.lerp_towards(&v, ab);
    let (near_left, near_right) = match kind {
        PlaneKind::Ground => (Point2::new(0.0, h), Point2::new(w, h)),
        PlaneKind::Top => (Point2::new(0.0, 0.0), Point2::new(w, 0.0)),
    };
    PlaneQuad::new([near_left, near_right, far_left, far_right], kind)
}

/// A projective 3×3 transform, scaled so its largest-magnitude entry is 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Homography {
    m: Matrix3<f64>,
}

impl Homography {
    pub fn identity() -> Self {
        Self {
            m: Matrix3::identity(),
        }
    }

    /// Wraps `m` after scale normalization. Fails if `m` is singular.
    pub fn from_matrix(m: Matrix3<f64>) -> Result<Self> {
        if m.iter().any(|x| !x.is_finite()) {
            return Err(GeometryError::NonFinite("homography"));
        }
        let m = normalize_scale(&m);
        let col_norms: f64 = m.column_iter().map(|c| c.norm()).product();
        if !(m.determinant().abs() > MIN_HADAMARD_RATIO * col_norms) {
            return Err(GeometryError::DegenerateQuad(
                "homography is singular".to_string(),
            ));
        }
        Ok(Self { m })
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.m
    }

    pub fn inverse(&self) -> Result<Self> {
        let inv = self
            .m
            .try_inverse()
            .ok_or_else(|| GeometryError::DegenerateQuad("homography is singular".to_string()))?;
        Self::from_matrix(inv)
    }

    /// Homogeneous image of `p` without the perspective division.
    pub fn apply_homogeneous(&self, p: Point2) -> Vector3<f64> {
        self.m * Vector3::new(p.x, p.y, 1.0)
    }

    pub fn apply(&self, p: Point2) -> Result<Point2> {
        apply_homography(self, p)
    }
}

fn normalize_scale(m: &Matrix3<f64>) -> Matrix3<f64> {
    let pivot = m
        .iter()
        .copied()
        .fold(0.0_f64, |best, x| if x.abs() > best.abs() { x } else { best });
    if pivot == 0.0 {
        *m
    } else {
        m / pivot
    }
}

pub fn apply_homography(h: &Homography, p: Point2) -> Result<Point2> {
    let q = h.apply_homogeneous(p);
    if q.z.abs() <= MIN_HOMOGENEOUS_W {
        return Err(GeometryError::AtInfinity);
    }
    Ok(Point2::new(q.x / q.z, q.y / q.z))
}

/// Estimates the homography taking the camera-view quad `src` onto the BEV
/// rectangle of size `bev`, with the far edge at BEV row `y = 0`.
///
/// Solves the four-point DLT on Hartley-normalized coordinates.
pub fn homography_from_quad(src: &PlaneQuad, bev: ImageSize) -> Result<Homography> {
    let dst = PlaneQuad::bev_rectangle(bev, src.kind());
    let h = dlt(src.corners(), dst.corners())?;
    for (s, d) in src.corners().iter().zip(dst.corners()) {
        let mapped = apply_homography(&h, *s)?;
        let residual = mapped.distance(d);
        if !(residual <= CORNER_RESIDUAL_TOLERANCE) {
            return Err(GeometryError::DegenerateQuad(format!(
                "corner residual {residual:e} px after DLT"
            )));
        }
    }
    Ok(h)
}

/// Similarity that moves the centroid of `pts` to the origin and scales the
/// mean distance from it to √2.
fn hartley_transform(pts: &[Point2; 4]) -> Matrix3<f64> {
    let n = pts.len() as f64;
    let cx = pts.iter().map(|p| p.x).sum::<f64>() / n;
    let cy = pts.iter().map(|p| p.y).sum::<f64>() / n;
    let mean_dist = pts.iter().map(|p| (p.x - cx).hypot(p.y - cy)).sum::<f64>() / n;
    let s = if mean_dist > 0.0 {
        std::f64::consts::SQRT_2 / mean_dist
    } else {
        1.0
    };
    Matrix3::new(s, 0.0, -s * cx, 0.0, s, -s * cy, 0.0, 0.0, 1.0)
}

fn dlt(src: &[Point2; 4], dst: &[Point2; 4]) -> Result<Homography> {
    let ts = hartley_transform(src);
    let td = hartley_transform(dst);
    let project = |t: &Matrix3<f64>, p: &Point2| {
        let v = t * Vector3::new(p.x, p.y, 1.0);
        (v.x, v.y)
    };

    // Eight equations; the ninth row stays zero so the SVD is square and
    // exposes the null vector.
    let mut a = SMatrix::<f64, 9, 9>::zeros();
    for k in 0..4 {
        let (x, y) = project(&ts, &src[k]);
        let (u, v) = project(&td, &dst[k]);
        let r = 2 * k;
        a[(r, 0)] = -x;
        a[(r, 1)] = -y;
        a[(r, 2)] = -1.0;
        a[(r, 6)] = u * x;
        a[(r, 7)] = u * y;
        a[(r, 8)] = u;
        a[(r + 1, 3)] = -x;
        a[(r + 1, 4)] = -y;
        a[(r + 1, 5)] = -1.0;
        a[(r + 1, 6)] = v * x;
        a[(r + 1, 7)] = v * y;
        a[(r + 1, 8)] = v;
    }
    let svd = a.svd(false, true);
    let v_t = svd
        .v_t
        .ok_or_else(|| GeometryError::DegenerateQuad("SVD did not converge".to_string()))?;
    let (smallest, _) = svd
        .singular_values
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |(bi, bv), (i, &s)| {
            if s < bv {
                (i, s)
            } else {
                (bi, bv)
            }
        });
    let h = v_t.row(smallest);
    let hn = Matrix3::new(h[0], h[1], h[2], h[3], h[4], h[5], h[6], h[7], h[8]);
    let td_inv = td
        .try_inverse()
        .ok_or_else(|| GeometryError::DegenerateQuad("target points coincide".to_string()))?;
    Homography::from_matrix(td_inv * hn * ts)
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(try_from = "[[f64; 2]; 2]")]
pub struct LineSegment {
    a: Point2,
    b: Point2,
}

impl LineSegment {
    pub fn new(a: Point2, b: Point2) -> Result<Self> {
        if !a.is_finite() || !b.is_finite() {
            return Err(GeometryError::NonFinite("line segment"));
        }
        if a.distance(&b) <= MIN_SEGMENT_LENGTH {
            return Err(GeometryError::DegenerateSegment);
        }
        Ok(Self { a, b })
    }

    pub fn a(&self) -> Point2 {
        self.a
    }

    pub fn b(&self) -> Point2 {
        self.b
    }

    /// Unit normal `n` and offset `c` with `n · p = c` on the line.
    fn normal_form(&self) -> (Vector2<f64>, f64) {
        let d = Vector2::new(self.b.x - self.a.x, self.b.y - self.a.y).normalize();
        let n = Vector2::new(-d.y, d.x);
        (n, n.x * self.a.x + n.y * self.a.y)
    }

    fn direction_angle(&self) -> f64 {
        (self.b.y - self.a.y).atan2(self.b.x - self.a.x)
    }
}

impl TryFrom<[[f64; 2]; 2]> for LineSegment {
    type Error = GeometryError;

    fn try_from(v: [[f64; 2]; 2]) -> Result<Self> {
        LineSegment::new(Point2::new(v[0][0], v[0][1]), Point2::new(v[1][0], v[1][1]))
    }
}

impl From<LineSegment> for [[f64; 2]; 2] {
    fn from(s: LineSegment) -> Self {
        [[s.a.x, s.a.y], [s.b.x, s.b.y]]
    }
}

impl Serialize for LineSegment {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        <[[f64; 2]; 2]>::from(*self).serialize(s)
    }
}

/// Line annotations file: `{"lines": [[[x1,y1],[x2,y2]], ...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LineAnnotations {
    pub lines: Vec<LineSegment>,
}

fn parallel(a: &LineSegment, b: &LineSegment) -> bool {
    let diff = (a.direction_angle() - b.direction_angle()).rem_euclid(std::f64::consts::PI);
    diff.min(std::f64::consts::PI - diff) <= PARALLEL_TOLERANCE_RAD
}

/// Vanishing point of a set of image lines.
///
/// Two lines give their exact intersection. More lines give the point
/// minimizing the sum of squared perpendicular distances to every line.
pub fn vp_from_lines(lines: &[LineSegment]) -> Result<Point2> {
    if lines.len() < 2 {
        return Err(GeometryError::TooFewLines(lines.len()));
    }
    let any_crossing = lines
        .iter()
        .enumerate()
        .any(|(i, a)| lines[i + 1..].iter().any(|b| !parallel(a, b)));
    if !any_crossing {
        return Err(GeometryError::AllParallel);
    }

    let (normal, rhs) = if lines.len() == 2 {
        let (n0, c0) = lines[0].normal_form();
        let (n1, c1) = lines[1].normal_form();
        (
            Matrix2::new(n0.x, n0.y, n1.x, n1.y),
            Vector2::new(c0, c1),
        )
    } else {
        lines.iter().fold(
            (Matrix2::zeros(), Vector2::zeros()),
            |(ata, atb), line| {
                let (n, c) = line.normal_form();
                (ata + n * n.transpose(), atb + n * c)
            },
        )
    };
    let p = normal
        .lu()
        .solve(&rhs)
        .ok_or(GeometryError::AllParallel)?;
    let p = Point2::new(p.x, p.y);
    if !p.is_finite() {
        return Err(GeometryError::AllParallel);
    }
    Ok(p)
}
