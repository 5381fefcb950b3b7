//! Saliency maps built from the two-plane perspective prior.
//!
//! Each plane gets an exponential profile over bird's-eye-view (BEV) rows.
//! The ground profile peaks at the far edge of the plane and the top profile
//! at the near edge. A plane's homography carries its profile into the camera
//! view; the two views are summed with weight `λ` on the top plane.
//!
//! Maps live on a reduced grid of nodes. Node `(i, j)` of a `gw × gh` grid
//! sits at image position `(i·w/(gw−1), j·h/(gh−1))`, so the first and last
//! nodes lie on the image borders.

mod cache;

pub use cache::{
    decode_cache_file, encode_cache_file, CacheOutcome, CacheStore, RefreshSchedule,
    StreamingSaliency, CACHE_MAGIC,
};

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::geometry::{
    homography_from_quad, plane_quad, GeometryError, Homography, ImageSize, PlaneKind, PlaneQuad,
    Point2, THETA_MARGIN,
};

/// Value given to grid nodes that fall outside a plane.
pub const SALIENCY_FLOOR: f64 = 1e-4;

/// Smallest saliency grid accepted in either dimension.
pub const MIN_GRID: u32 = 8;

#[derive(Debug, Error)]
pub enum SaliencyError {
    #[error("invalid parameter: {0}")]
    BadParam(String),
    #[error("saliency grid must be at least {MIN_GRID}x{MIN_GRID}, got {0}")]
    GridTooSmall(ImageSize),
    #[error("saliency values must be finite and positive")]
    NonPositive,
    #[error("grid has {got} values, expected {expected}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("corrupt cache file: {0}")]
    CacheCorrupt(String),
    #[error("cache io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, SaliencyError>;

/// Identifies one scalar of [`WarpParams`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamId {
    Vx,
    Vy,
    /// `0`, `1` ground plane left/right; `2`, `3` top plane left/right.
    Theta(usize),
    Alpha(usize),
    Nu,
    NuHat,
    Lambda,
    KernelSigmaFrac,
}

impl ParamId {
    /// Closed interval the parameter is clamped or validated against.
    pub fn domain(&self) -> (f64, f64) {
        match self {
            ParamId::Vx | ParamId::Vy => (f64::NEG_INFINITY, f64::INFINITY),
            ParamId::Theta(_) => (-FRAC_PI_2 + THETA_MARGIN, FRAC_PI_2 - THETA_MARGIN),
            ParamId::Alpha(_) => (0.0, 1.0),
            ParamId::Nu | ParamId::NuHat => (1.0, f64::INFINITY),
            ParamId::Lambda => (0.0, f64::INFINITY),
            ParamId::KernelSigmaFrac => (0.0, 0.5),
        }
    }
}

impl std::fmt::Display for ParamId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ParamId::Vx => write!(f, "v_x"),
            ParamId::Vy => write!(f, "v_y"),
            ParamId::Theta(i) => write!(f, "theta[{i}]"),
            ParamId::Alpha(i) => write!(f, "alpha[{i}]"),
            ParamId::Nu => write!(f, "nu"),
            ParamId::NuHat => write!(f, "nu_hat"),
            ParamId::Lambda => write!(f, "lambda"),
            ParamId::KernelSigmaFrac => write!(f, "kernel_sigma_frac"),
        }
    }
}

/// Full parameter set of the prior for one vanishing point.
///
/// Angles are clamped to `(−π/2, π/2)` less a small margin and the corner
/// weights to `[0, 1]`; the profile rates, `λ` and the kernel width are
/// validated instead.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawWarpParams", into = "RawWarpParams")]
pub struct WarpParams {
    v: Point2,
    theta: [f64; 4],
    alpha: [f64; 4],
    nu: f64,
    nu_hat: f64,
    lambda: f64,
    kernel_sigma_frac: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawWarpParams {
    v: [f64; 2],
    theta: [f64; 4],
    alpha: [f64; 4],
    nu: f64,
    nu_hat: f64,
    lambda: f64,
    kernel_sigma_frac: f64,
}

impl TryFrom<RawWarpParams> for WarpParams {
    type Error = SaliencyError;

    fn try_from(r: RawWarpParams) -> Result<Self> {
        WarpParams::new(
            Point2::new(r.v[0], r.v[1]),
            r.theta,
            r.alpha,
            r.nu,
            r.nu_hat,
            r.lambda,
            r.kernel_sigma_frac,
        )
    }
}

impl From<WarpParams> for RawWarpParams {
    fn from(p: WarpParams) -> Self {
        RawWarpParams {
            v: [p.v.x, p.v.y],
            theta: p.theta,
            alpha: p.alpha,
            nu: p.nu,
            nu_hat: p.nu_hat,
            lambda: p.lambda,
            kernel_sigma_frac: p.kernel_sigma_frac,
        }
    }
}

impl WarpParams {
    pub const DEFAULT_NU: f64 = 2.0;
    pub const DEFAULT_LAMBDA: f64 = 0.3;
    pub const DEFAULT_THETA: f64 = 0.15;
    pub const DEFAULT_ALPHA: f64 = 0.5;
    pub const DEFAULT_SIGMA_FRAC: f64 = 0.06;

    #[allow(clippy::too_many_arguments)]
    pub fn new(
        v: Point2,
        theta: [f64; 4],
        alpha: [f64; 4],
        nu: f64,
        nu_hat: f64,
        lambda: f64,
        kernel_sigma_frac: f64,
    ) -> Result<Self> {
        if !v.is_finite() {
            return Err(SaliencyError::BadParam("vanishing point must be finite".into()));
        }
        if theta.iter().chain(alpha.iter()).any(|x| !x.is_finite()) {
            return Err(SaliencyError::BadParam("theta and alpha must be finite".into()));
        }
        if !(nu.is_finite() && nu > 1.0) {
            return Err(SaliencyError::BadParam(format!("nu must exceed 1 (got {nu})")));
        }
        if !(nu_hat.is_finite() && nu_hat > 1.0) {
            return Err(SaliencyError::BadParam(format!("nu_hat must exceed 1 (got {nu_hat})")));
        }
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(SaliencyError::BadParam(format!(
                "lambda must be non-negative (got {lambda})"
            )));
        }
        if !(kernel_sigma_frac > 0.0 && kernel_sigma_frac <= 0.5) {
            return Err(SaliencyError::BadParam(format!(
                "kernel_sigma_frac must lie in (0, 0.5] (got {kernel_sigma_frac})"
            )));
        }
        Ok(Self {
            v,
            theta: theta.map(crate::geometry::clamp_theta),
            alpha: alpha.map(|a| a.clamp(0.0, 1.0)),
            nu,
            nu_hat,
            lambda,
            kernel_sigma_frac,
        })
    }

    /// Default initialization around the vanishing point `v`.
    pub fn with_defaults(v: Point2) -> Result<Self> {
        Self::new(
            v,
            [Self::DEFAULT_THETA; 4],
            [Self::DEFAULT_ALPHA; 4],
            Self::DEFAULT_NU,
            Self::DEFAULT_NU,
            Self::DEFAULT_LAMBDA,
            Self::DEFAULT_SIGMA_FRAC,
        )
    }

    pub fn v(&self) -> Point2 {
        self.v
    }

    pub fn theta(&self) -> [f64; 4] {
        self.theta
    }

    pub fn alpha(&self) -> [f64; 4] {
        self.alpha
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn nu_hat(&self) -> f64 {
        self.nu_hat
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn kernel_sigma_frac(&self) -> f64 {
        self.kernel_sigma_frac
    }

    pub fn get(&self, id: ParamId) -> f64 {
        match id {
            ParamId::Vx => self.v.x,
            ParamId::Vy => self.v.y,
            ParamId::Theta(i) => self.theta[i],
            ParamId::Alpha(i) => self.alpha[i],
            ParamId::Nu => self.nu,
            ParamId::NuHat => self.nu_hat,
            ParamId::Lambda => self.lambda,
            ParamId::KernelSigmaFrac => self.kernel_sigma_frac,
        }
    }

    /// Copy with one parameter replaced and the usual clamps reapplied.
    pub fn with(&self, id: ParamId, value: f64) -> Result<Self> {
        let mut raw = RawWarpParams::from(*self);
        match id {
            ParamId::Vx => raw.v[0] = value,
            ParamId::Vy => raw.v[1] = value,
            ParamId::Theta(i) | ParamId::Alpha(i) if i >= 4 => {
                return Err(SaliencyError::BadParam(format!("no parameter {id}")))
            }
            ParamId::Theta(i) => raw.theta[i] = value,
            ParamId::Alpha(i) => raw.alpha[i] = value,
            ParamId::Nu => raw.nu = value,
            ParamId::NuHat => raw.nu_hat = value,
            ParamId::Lambda => raw.lambda = value,
            ParamId::KernelSigmaFrac => raw.kernel_sigma_frac = value,
        }
        raw.try_into()
    }

    pub fn with_vp(&self, v: Point2) -> Result<Self> {
        self.with(ParamId::Vx, v.x)?.with(ParamId::Vy, v.y)
    }

    /// The plane quad for `kind` in a frame of `size`.
    pub fn quad(&self, kind: PlaneKind, size: ImageSize) -> Result<PlaneQuad> {
        let (a, b) = match kind {
            PlaneKind::Ground => (0, 1),
            PlaneKind::Top => (2, 3),
        };
        Ok(plane_quad(
            self.v,
            self.theta[a],
            self.theta[b],
            self.alpha[a],
            self.alpha[b],
            kind,
            size,
        )?)
    }

    fn write_canonical(&self, out: &mut Vec<u8>) {
        let floats = [self.v.x, self.v.y]
            .into_iter()
            .chain(self.theta)
            .chain(self.alpha)
            .chain([self.nu, self.nu_hat, self.lambda, self.kernel_sigma_frac]);
        for f in floats {
            out.extend_from_slice(&f.to_le_bytes());
        }
    }
}

/// Which end of a plane its BEV profile favors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProfileDirection {
    /// Peaks at the far edge (ground plane).
    Far,
    /// Peaks at the near edge (top plane).
    Near,
}

impl From<PlaneKind> for ProfileDirection {
    fn from(kind: PlaneKind) -> Self {
        match kind {
            PlaneKind::Ground => ProfileDirection::Far,
            PlaneKind::Top => ProfileDirection::Near,
        }
    }
}

/// Exponential saliency over BEV rows.
///
/// Index `z` counts rows away from the camera, `z = rows − 1` being the far
/// edge. `Far` evaluates `exp(ν(z/(rows−1) − 1))`, `Near` the mirrored
/// `exp(ν((1 − z/(rows−1)) − 1))`; both reach 1 at their favored end.
pub fn bev_profile(nu: f64, rows: usize, direction: ProfileDirection) -> Result<Vec<f64>> {
    if !(nu.is_finite() && nu > 1.0) {
        return Err(SaliencyError::BadParam(format!("nu must exceed 1 (got {nu})")));
    }
    if rows < MIN_GRID as usize {
        return Err(SaliencyError::BadParam(format!(
            "profile needs at least {MIN_GRID} rows (got {rows})"
        )));
    }
    let last = (rows - 1) as f64;
    Ok((0..rows)
        .map(|z| {
            let depth = z as f64 / last;
            let t = match direction {
                ProfileDirection::Far => depth,
                ProfileDirection::Near => 1.0 - depth,
            };
            (nu * (t - 1.0)).exp()
        })
        .collect())
}

/// Strictly positive saliency samples on a grid of nodes covering an image.
#[derive(Debug, Clone, PartialEq)]
pub struct SaliencyMap {
    values: Vec<f64>,
    grid: ImageSize,
    target_size: ImageSize,
    param_hash: [u8; 32],
}

impl SaliencyMap {
    /// `values` are row-major, `grid.h()` rows of `grid.w()` nodes.
    pub fn new(
        values: Vec<f64>,
        grid: ImageSize,
        target_size: ImageSize,
        param_hash: [u8; 32],
    ) -> Result<Self> {
        check_grid(grid)?;
        let expected = grid.w() as usize * grid.h() as usize;
        if values.len() != expected {
            return Err(SaliencyError::ShapeMismatch {
                expected,
                got: values.len(),
            });
        }
        if !values.iter().all(|v| v.is_finite() && *v > 0.0) {
            return Err(SaliencyError::NonPositive);
        }
        Ok(Self {
            values,
            grid,
            target_size,
            param_hash,
        })
    }

    /// Uniform saliency: the warp built from it is a plain resize.
    pub fn constant(grid: ImageSize, target_size: ImageSize, value: f64) -> Result<Self> {
        let mut hasher = Sha256::new();
        hasher.update(b"constant");
        hasher.update(value.to_le_bytes());
        hash_sizes(&mut hasher, target_size, grid);
        let n = grid.w() as usize * grid.h() as usize;
        Self::new(vec![value; n], grid, target_size, hasher.finalize().into())
    }

    pub fn grid(&self) -> ImageSize {
        self.grid
    }

    pub fn target_size(&self) -> ImageSize {
        self.target_size
    }

    pub fn param_hash(&self) -> &[u8; 32] {
        &self.param_hash
    }

    pub fn param_hash_hex(&self) -> String {
        hex_digest(&self.param_hash)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Node in column `i`, row `j`.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.grid.w() as usize + i]
    }

    pub fn row(&self, j: usize) -> &[f64] {
        let w = self.grid.w() as usize;
        &self.values[j * w..(j + 1) * w]
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::MIN, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::MAX, f64::min)
    }
}

pub(crate) fn hex_digest(d: &[u8; 32]) -> String {
    d.iter().map(|b| format!("{b:02x}")).collect()
}

fn check_grid(grid: ImageSize) -> Result<()> {
    if grid.w() < MIN_GRID || grid.h() < MIN_GRID {
        return Err(SaliencyError::GridTooSmall(grid));
    }
    Ok(())
}

fn hash_sizes(hasher: &mut Sha256, size: ImageSize, grid: ImageSize) {
    for d in [size.w(), size.h(), grid.w(), grid.h()] {
        hasher.update(d.to_le_bytes());
    }
}

/// Image position of grid node `(i, j)`.
pub fn grid_node_position(i: usize, j: usize, grid: ImageSize, size: ImageSize) -> Point2 {
    Point2::new(
        i as f64 * size.wf() / (grid.wf() - 1.0),
        j as f64 * size.hf() / (grid.hf() - 1.0),
    )
}

/// BEV profile laid out on a raster with one row per grid row.
struct BevRaster {
    profile: Vec<f64>,
    bev: ImageSize,
}

impl BevRaster {
    fn new(profile: Vec<f64>, bev: ImageSize) -> Self {
        Self { profile, bev }
    }

    /// Node value; raster row 0 is the far edge.
    fn node(&self, r: usize) -> f64 {
        self.profile[self.profile.len() - 1 - r]
    }

    /// Sample at a BEV point, clamped onto the rectangle. The raster is
    /// constant along BEV columns, so only the row blend remains of the
    /// bilinear lookup.
    fn sample(&self, p: Point2) -> f64 {
        let rows = self.profile.len();
        let r = (p.y / self.bev.hf()).clamp(0.0, 1.0) * (rows - 1) as f64;
        let r0 = (r.floor() as usize).min(rows - 2);
        let fr = r - r0 as f64;
        self.node(r0) * (1.0 - fr) + self.node(r0 + 1) * fr
    }

    fn contains(&self, p: Point2) -> bool {
        let tol_x = 1e-9 * self.bev.wf();
        let tol_y = 1e-9 * self.bev.hf();
        p.x >= -tol_x && p.x <= self.bev.wf() + tol_x && p.y >= -tol_y && p.y <= self.bev.hf() + tol_y
    }
}

/// Camera-view saliency of a single plane given its quad directly.
///
/// Every grid node inside the quad is sent through the plane homography and
/// samples the BEV profile of rate `nu`. Outside the quad the value fades
/// linearly from that of the nearest quad boundary point down to
/// [`SALIENCY_FLOOR`] over one grid cell (in image pixels), so the map moves
/// continuously with the quad. Nodes farther out, including everything
/// across the plane's horizon, get the floor.
pub fn plane_saliency_from_quad(
    quad: &PlaneQuad,
    nu: f64,
    size: ImageSize,
    grid: ImageSize,
) -> Result<Vec<f64>> {
    check_grid(grid)?;
    let profile = bev_profile(nu, grid.h() as usize, quad.kind().into())?;
    let homography = homography_from_quad(quad, size)?;
    let raster = BevRaster::new(profile, size);
    Ok(sample_through(&homography, quad, &raster, size, grid))
}

/// Closest point to `p` on the boundary of `quad` and its distance.
fn nearest_on_boundary(quad: &PlaneQuad, p: Point2) -> (Point2, f64) {
    let c = quad.corners();
    let ring = [
        PlaneQuad::NEAR_LEFT,
        PlaneQuad::NEAR_RIGHT,
        PlaneQuad::FAR_RIGHT,
        PlaneQuad::FAR_LEFT,
        PlaneQuad::NEAR_LEFT,
    ];
    let mut best = (c[0], f64::INFINITY);
    for w in ring.windows(2) {
        let (a, b) = (c[w[0]], c[w[1]]);
        let (dx, dy) = (b.x - a.x, b.y - a.y);
        let t = (((p.x - a.x) * dx + (p.y - a.y) * dy) / (dx * dx + dy * dy)).clamp(0.0, 1.0);
        let q = Point2::new(a.x + t * dx, a.y + t * dy);
        let d = q.distance(&p);
        if d < best.1 {
            best = (q, d);
        }
    }
    best
}

fn sample_through(
    homography: &Homography,
    quad: &PlaneQuad,
    raster: &BevRaster,
    size: ImageSize,
    grid: ImageSize,
) -> Vec<f64> {
    // Points on the camera side of the plane's horizon share the sign of the
    // homogeneous coordinate with the quad interior.
    let inside_sign = homography.apply_homogeneous(quad.centroid()).z.signum();
    let to_bev = |p: Point2| {
        let q = homography.apply_homogeneous(p);
        (q.z * inside_sign > 1e-12).then(|| Point2::new(q.x / q.z, q.y / q.z))
    };
    let fade = (size.wf() / (grid.wf() - 1.0)).max(size.hf() / (grid.hf() - 1.0));
    let (gw, gh) = (grid.w() as usize, grid.h() as usize);
    let mut values = Vec::with_capacity(gw * gh);
    for j in 0..gh {
        for i in 0..gw {
            let node = grid_node_position(i, j, grid, size);
            let value = match to_bev(node) {
                Some(b) if raster.contains(b) => raster.sample(b),
                _ => {
                    let (edge, d) = nearest_on_boundary(quad, node);
                    let t = d / fade;
                    if t >= 1.0 {
                        SALIENCY_FLOOR
                    } else {
                        let at_edge = to_bev(edge).map_or(SALIENCY_FLOOR, |b| raster.sample(b));
                        at_edge * (1.0 - t) + SALIENCY_FLOOR * t
                    }
                }
            };
            values.push(value.max(SALIENCY_FLOOR));
        }
    }
    values
}

fn single_plane_hash(params: &WarpParams, kind: PlaneKind, size: ImageSize, grid: ImageSize) -> [u8; 32] {
    let mut bytes = vec![match kind {
        PlaneKind::Ground => 1u8,
        PlaneKind::Top => 2u8,
    }];
    params.write_canonical(&mut bytes);
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    hash_sizes(&mut hasher, size, grid);
    hasher.finalize().into()
}

/// Camera-view saliency of the ground or top plane of `params`.
pub fn plane_saliency(
    params: &WarpParams,
    kind: PlaneKind,
    size: ImageSize,
    grid: ImageSize,
) -> Result<SaliencyMap> {
    let nu = match kind {
        PlaneKind::Ground => params.nu,
        PlaneKind::Top => params.nu_hat,
    };
    let values = plane_saliency_from_quad(&params.quad(kind, size)?, nu, size, grid)?;
    SaliencyMap::new(values, grid, size, single_plane_hash(params, kind, size, grid))
}

/// Cell-wise `ground + λ · top`.
pub fn combine_planes(ground: &[f64], top: &[f64], lambda: f64) -> Vec<f64> {
    ground.iter().zip(top).map(|(g, t)| g + lambda * t).collect()
}

/// Two-plane saliency `S_ground + λ · S_top`.
pub fn two_plane_saliency(params: &WarpParams, size: ImageSize, grid: ImageSize) -> Result<SaliencyMap> {
    let ground = plane_saliency(params, PlaneKind::Ground, size, grid)?;
    let values = if params.lambda == 0.0 {
        ground.values
    } else {
        let top = plane_saliency(params, PlaneKind::Top, size, grid)?;
        combine_planes(&ground.values, &top.values, params.lambda)
    };
    let source = SaliencySource::Single(*params);
    SaliencyMap::new(values, grid, size, source.param_hash(size, grid))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MultiVpEntry {
    pub params: WarpParams,
    pub weight: f64,
}

/// Weighted set of priors, one per vanishing point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<MultiVpEntry>", into = "Vec<MultiVpEntry>")]
pub struct MultiVpConfig {
    entries: Vec<MultiVpEntry>,
}

impl MultiVpConfig {
    pub fn new(entries: Vec<MultiVpEntry>) -> Result<Self> {
        if entries.is_empty() {
            return Err(SaliencyError::BadParam("multi-VP config needs at least one entry".into()));
        }
        if entries.iter().any(|e| !(e.weight.is_finite() && e.weight >= 0.0)) {
            return Err(SaliencyError::BadParam("multi-VP weights must be non-negative".into()));
        }
        if entries.iter().map(|e| e.weight).sum::<f64>() <= 0.0 {
            return Err(SaliencyError::BadParam("multi-VP weights must not all be zero".into()));
        }
        Ok(Self { entries })
    }

    /// Equal weights `1/N`.
    pub fn uniform(params: Vec<WarpParams>) -> Result<Self> {
        let w = 1.0 / params.len().max(1) as f64;
        Self::new(
            params
                .into_iter()
                .map(|params| MultiVpEntry { params, weight: w })
                .collect(),
        )
    }

    pub fn entries(&self) -> &[MultiVpEntry] {
        &self.entries
    }

    /// Kernel width used when warping with this mixture: the first entry's.
    pub fn kernel_sigma_frac(&self) -> f64 {
        self.entries[0].params.kernel_sigma_frac
    }
}

impl TryFrom<Vec<MultiVpEntry>> for MultiVpConfig {
    type Error = SaliencyError;

    fn try_from(entries: Vec<MultiVpEntry>) -> Result<Self> {
        MultiVpConfig::new(entries)
    }
}

impl From<MultiVpConfig> for Vec<MultiVpEntry> {
    fn from(c: MultiVpConfig) -> Self {
        c.entries
    }
}

/// Weighted sum of the two-plane saliency of every entry.
pub fn multi_vp_saliency(cfg: &MultiVpConfig, size: ImageSize, grid: ImageSize) -> Result<SaliencyMap> {
    check_grid(grid)?;
    let n = grid.w() as usize * grid.h() as usize;
    let mut acc = vec![0.0; n];
    for entry in &cfg.entries {
        if entry.weight == 0.0 {
            continue;
        }
        let map = two_plane_saliency(&entry.params, size, grid)?;
        for (a, v) in acc.iter_mut().zip(map.values()) {
            *a += entry.weight * v;
        }
    }
    let source = SaliencySource::Multi(cfg.clone());
    SaliencyMap::new(acc, grid, size, source.param_hash(size, grid))
}

/// Anything a saliency map can be built from; also the cache key.
#[derive(Debug, Clone, PartialEq)]
pub enum SaliencySource {
    Single(WarpParams),
    Multi(MultiVpConfig),
}

impl SaliencySource {
    pub fn build(&self, size: ImageSize, grid: ImageSize) -> Result<SaliencyMap> {
        match self {
            SaliencySource::Single(p) => two_plane_saliency(p, size, grid),
            SaliencySource::Multi(c) => multi_vp_saliency(c, size, grid),
        }
    }

    /// SHA-256 over a little-endian encoding of every parameter and size.
    pub fn param_hash(&self, size: ImageSize, grid: ImageSize) -> [u8; 32] {
        let mut bytes = Vec::new();
        match self {
            SaliencySource::Single(p) => {
                bytes.push(0u8);
                p.write_canonical(&mut bytes);
            }
            SaliencySource::Multi(c) => {
                bytes.push(3u8);
                bytes.extend_from_slice(&(c.entries.len() as u32).to_le_bytes());
                for e in &c.entries {
                    bytes.extend_from_slice(&e.weight.to_le_bytes());
                    e.params.write_canonical(&mut bytes);
                }
            }
        }
        let mut hasher = Sha256::new();
        hasher.update(&bytes);
        hash_sizes(&mut hasher, size, grid);
        hasher.finalize().into()
    }

    pub fn kernel_sigma_frac(&self) -> f64 {
        match self {
            SaliencySource::Single(p) => p.kernel_sigma_frac,
            SaliencySource::Multi(c) => c.kernel_sigma_frac(),
        }
    }
}
