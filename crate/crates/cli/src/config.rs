//! Run configuration, read from a strict JSON file.
//!
//! ```json
//! {
//!   "version": 1,
//!   "image_size": [1920, 1200],
//!   "scale": 0.5,
//!   "grid": [96, 60],
//!   "prior": {"mode": "fixed", "vp": [960, 560]},
//!   "shape": {"nu": 2.0, "lambda": 0.3},
//!   "n_v": 30,
//!   "stream": {"fps": 30, "latency": {"kind": "constant", "mean_ms": 40}}
//! }
//! ```
//!
//! Only `version` and `prior` are required. Unknown keys anywhere are an
//! error, so a misspelt `nu_hat` does not silently fall back to a default.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use twoplane::eval::{LatencyKind, LatencyModel, MockConfig, MockDetector};
use twoplane::saliency::{MultiVpConfig, MultiVpEntry, SaliencySource};
use twoplane::warp::AxisMapOptions;
use twoplane::{ImageSize, Point2, WarpParams};

use crate::failure::{Failure, Outcome, ResultExt};

pub const CONFIG_VERSION: u32 = 1;

const DEFAULT_IMAGE_SIZE: [u32; 2] = [1920, 1200];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub version: u32,
    /// Frame size the prior is laid out in. Left out, `warp` uses the size
    /// of its input image and everything else 1920×1200.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_size: Option<[u32; 2]>,
    /// Output size relative to the input, the same on both axes.
    #[serde(default = "default_scale")]
    pub scale: f64,
    #[serde(default = "default_grid")]
    pub grid: [u32; 2],
    pub prior: Prior,
    #[serde(default)]
    pub shape: Shape,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cache_dir: Option<PathBuf>,
    /// In `per_frame` mode, a new vanishing point is taken every `n_v` frames.
    #[serde(default = "default_n_v")]
    pub n_v: u64,
    #[serde(default = "default_true")]
    pub endpoint_rescale: bool,
    #[serde(default)]
    pub stream: StreamSettings,
}

/// Where the vanishing point comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum Prior {
    Fixed { vp: [f64; 2] },
    /// The mean of the listed points.
    Average { vps: Vec<[f64; 2]> },
    /// One point per frame; frame `k` uses the point of the last refresh
    /// frame at or before it.
    PerFrame { vps: Vec<[f64; 2]> },
    /// Weighted mixture of priors that share `shape`.
    Multi { entries: Vec<WeightedVp> },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightedVp {
    pub vp: [f64; 2],
    pub weight: f64,
}

/// Everything in [`WarpParams`] except the vanishing point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Shape {
    pub theta: [f64; 4],
    pub alpha: [f64; 4],
    pub nu: f64,
    pub nu_hat: f64,
    pub lambda: f64,
    pub kernel_sigma_frac: f64,
}

impl Default for Shape {
    fn default() -> Self {
        Self {
            theta: [WarpParams::DEFAULT_THETA; 4],
            alpha: [WarpParams::DEFAULT_ALPHA; 4],
            nu: WarpParams::DEFAULT_NU,
            nu_hat: WarpParams::DEFAULT_NU,
            lambda: WarpParams::DEFAULT_LAMBDA,
            kernel_sigma_frac: WarpParams::DEFAULT_SIGMA_FRAC,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StreamSettings {
    pub fps: f64,
    pub latency: LatencySettings,
    pub mock: MockConfig,
    /// Seeds both the mock detector and Gaussian latency.
    pub seed: u64,
    /// Run the mock detector on the warped frame instead of the original.
    pub warp: bool,
}

impl Default for StreamSettings {
    fn default() -> Self {
        Self {
            fps: 30.0,
            latency: LatencySettings::default(),
            mock: MockConfig::default(),
            seed: 0,
            warp: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatencySettings {
    pub kind: LatencyKind,
    pub mean_ms: f64,
    #[serde(default)]
    pub std_ms: f64,
}

impl Default for LatencySettings {
    fn default() -> Self {
        Self {
            kind: LatencyKind::Constant,
            mean_ms: 40.0,
            std_ms: 0.0,
        }
    }
}

fn default_scale() -> f64 {
    0.5
}

fn default_grid() -> [u32; 2] {
    [96, 60]
}

fn default_n_v() -> u64 {
    1
}

fn default_true() -> bool {
    true
}

fn point(p: [f64; 2]) -> Point2 {
    Point2::new(p[0], p[1])
}

impl Config {
    pub fn from_json(text: &str) -> Outcome<Self> {
        let cfg: Config = serde_json::from_str(text).or_invalid("config")?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Outcome<Self> {
        let text = std::fs::read_to_string(path).or_io(format!("reading {}", path.display()))?;
        Self::from_json(&text).map_err(|f| match f {
            Failure::Invalid(e) => Failure::Invalid(e.context(path.display().to_string())),
            io => io,
        })
    }

    /// Canonical form: every field spelled out, defaults included.
    pub fn to_canonical_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Checks every bound the library would check later, so a bad file fails
    /// before any work is done.
    pub fn validate(&self) -> Outcome<()> {
        if self.version != CONFIG_VERSION {
            return Err(Failure::invalid(format!(
                "unsupported config version {} (expected {CONFIG_VERSION})",
                self.version
            )));
        }
        if !(self.scale > 0.0 && self.scale <= 1.0) {
            return Err(Failure::invalid(format!("scale must lie in (0, 1], got {}", self.scale)));
        }
        if let Some(s) = self.image_size {
            ImageSize::try_from(s).or_invalid("image_size")?;
        }
        self.grid_size()?;
        if self.n_v == 0 {
            return Err(Failure::invalid("n_v must be at least 1"));
        }
        match &self.prior {
            Prior::Fixed { vp } => {
                self.params(point(*vp))?;
            }
            Prior::Average { vps } | Prior::PerFrame { vps } => {
                if vps.is_empty() {
                    return Err(Failure::invalid("prior needs at least one vanishing point"));
                }
                for vp in vps {
                    self.params(point(*vp))?;
                }
            }
            Prior::Multi { .. } => {
                self.multi()?;
            }
        }
        let s = &self.stream;
        if !(s.fps.is_finite() && s.fps > 0.0) {
            return Err(Failure::invalid(format!("stream.fps must be positive, got {}", s.fps)));
        }
        self.latency(0)?;
        MockDetector::new(s.mock, 0).or_invalid("stream.mock")?;
        Ok(())
    }

    pub fn params(&self, vp: Point2) -> Outcome<WarpParams> {
        let s = &self.shape;
        WarpParams::new(vp, s.theta, s.alpha, s.nu, s.nu_hat, s.lambda, s.kernel_sigma_frac).or_invalid("shape")
    }

    fn multi(&self) -> Outcome<MultiVpConfig> {
        let Prior::Multi { entries } = &self.prior else {
            unreachable!("only called for multi priors")
        };
        let entries = entries
            .iter()
            .map(|e| {
                Ok(MultiVpEntry {
                    params: self.params(point(e.vp))?,
                    weight: e.weight,
                })
            })
            .collect::<Outcome<Vec<_>>>()?;
        MultiVpConfig::new(entries).or_invalid("prior")
    }

    /// Saliency source for frame `k` of a sequence (or of a single image,
    /// with `k = 0`).
    pub fn source_for_frame(&self, k: usize) -> Outcome<SaliencySource> {
        match &self.prior {
            Prior::Fixed { vp } => Ok(SaliencySource::Single(self.params(point(*vp))?)),
            Prior::Average { vps } => {
                let n = vps.len() as f64;
                let (sx, sy) = vps.iter().fold((0.0, 0.0), |(x, y), v| (x + v[0], y + v[1]));
                Ok(SaliencySource::Single(self.params(Point2::new(sx / n, sy / n))?))
            }
            Prior::PerFrame { vps } => {
                let r = self.refresh_frame(k);
                let vp = vps.get(r).ok_or_else(|| {
                    Failure::invalid(format!("prior lists {} vanishing points, frame {r} has none", vps.len()))
                })?;
                Ok(SaliencySource::Single(self.params(point(*vp))?))
            }
            Prior::Multi { .. } => Ok(SaliencySource::Multi(self.multi()?)),
        }
    }

    /// The frame whose vanishing point frame `k` uses.
    pub fn refresh_frame(&self, k: usize) -> usize {
        match self.prior {
            Prior::PerFrame { .. } => k - k % self.n_v as usize,
            _ => 0,
        }
    }

    pub fn image_size(&self) -> ImageSize {
        ImageSize::try_from(self.image_size.unwrap_or(DEFAULT_IMAGE_SIZE)).expect("validated")
    }

    pub fn grid_size(&self) -> Outcome<ImageSize> {
        let g = ImageSize::try_from(self.grid).or_invalid("grid")?;
        if g.w() < twoplane::saliency::MIN_GRID || g.h() < twoplane::saliency::MIN_GRID {
            return Err(Failure::invalid(format!(
                "grid must be at least {0}x{0}, got {g}",
                twoplane::saliency::MIN_GRID
            )));
        }
        Ok(g)
    }

    /// `scale` times `input`, rounded, on both axes.
    pub fn output_size(&self, input: ImageSize) -> Outcome<ImageSize> {
        let w = (self.scale * input.wf()).round() as u32;
        let h = (self.scale * input.hf()).round() as u32;
        ImageSize::new(w, h).or_invalid(format!("output size for scale {}", self.scale))
    }

    pub fn axis_options(&self, sigma_frac: f64) -> AxisMapOptions {
        let opts = AxisMapOptions::new(sigma_frac);
        if self.endpoint_rescale {
            opts
        } else {
            opts.without_endpoint_rescale()
        }
    }

    pub fn latency(&self, seed: u64) -> Outcome<LatencyModel> {
        let l = &self.stream.latency;
        LatencyModel {
            kind: l.kind,
            mean_ms: l.mean_ms,
            std_ms: l.std_ms,
            seed,
        }
        .validated()
        .or_invalid("stream.latency")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{"version": 1, "prior": {"mode": "fixed", "vp": [960, 560]}}"#;

    fn message(f: Failure) -> String {
        match f {
            Failure::Invalid(e) => format!("{e:#}"),
            Failure::Io(e) => panic!("unexpected io failure: {e:#}"),
        }
    }

    #[test]
    fn minimal_config_gets_defaults() {
        let c = Config::from_json(MINIMAL).unwrap();
        assert_eq!(c.scale, 0.5);
        assert_eq!(c.grid, [96, 60]);
        assert_eq!(c.shape, Shape::default());
        assert_eq!(c.image_size(), ImageSize::new(1920, 1200).unwrap());
        assert!(c.endpoint_rescale);
    }

    #[test]
    fn canonical_form_round_trips() {
        let c = Config::from_json(MINIMAL).unwrap();
        let canon = c.to_canonical_json();
        let again = Config::from_json(&canon).unwrap();
        assert_eq!(again, c);
        assert_eq!(again.to_canonical_json(), canon);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let typo = r#"{"version": 1, "prior": {"mode": "fixed", "vp": [1, 2]}, "shape": {"nuhat": 3}}"#;
        assert!(message(Config::from_json(typo).unwrap_err()).contains("nuhat"));
        let extra = r#"{"version": 1, "prior": {"mode": "fixed", "vp": [1, 2], "vps": []}}"#;
        assert!(Config::from_json(extra).is_err());
    }

    #[test]
    fn bounds_are_named() {
        let nu = r#"{"version": 1, "prior": {"mode": "fixed", "vp": [1, 2]}, "shape": {"nu": 0.5}}"#;
        assert!(message(Config::from_json(nu).unwrap_err()).contains("nu must exceed 1"));
        let scale = r#"{"version": 1, "prior": {"mode": "fixed", "vp": [1, 2]}, "scale": 1.5}"#;
        assert!(message(Config::from_json(scale).unwrap_err()).contains("scale"));
        let version = r#"{"version": 2, "prior": {"mode": "fixed", "vp": [1, 2]}}"#;
        assert!(message(Config::from_json(version).unwrap_err()).contains("version"));
        let grid = r#"{"version": 1, "prior": {"mode": "fixed", "vp": [1, 2]}, "grid": [4, 60]}"#;
        assert!(Config::from_json(grid).is_err());
    }

    #[test]
    fn average_mode_uses_the_mean() {
        let c = Config::from_json(
            r#"{"version": 1, "prior": {"mode": "average", "vps": [[900, 500], [1000, 600]]}}"#,
        )
        .unwrap();
        let SaliencySource::Single(p) = c.source_for_frame(7).unwrap() else {
            panic!("expected a single prior")
        };
        assert_eq!(p.v(), Point2::new(950.0, 550.0));
    }

    #[test]
    fn per_frame_mode_refreshes_every_n_v() {
        let c = Config::from_json(
            r#"{"version": 1, "n_v": 2, "prior": {"mode": "per_frame", "vps": [[900, 500], [0, 0], [1000, 600]]}}"#,
        )
        .unwrap();
        let vp = |k| match c.source_for_frame(k).unwrap() {
            SaliencySource::Single(p) => p.v(),
            SaliencySource::Multi(_) => unreachable!(),
        };
        assert_eq!(vp(1), Point2::new(900.0, 500.0));
        assert_eq!(vp(3), Point2::new(1000.0, 600.0));
        assert!(c.source_for_frame(4).is_err());
    }

    #[test]
    fn output_size_scales_both_axes() {
        let c = Config::from_json(MINIMAL).unwrap();
        let out = c.output_size(ImageSize::new(1920, 1200).unwrap()).unwrap();
        assert_eq!((out.w(), out.h()), (960, 600));
    }
}
