//! Separable inverse transform along one axis.
//!
//! For an output position `x` (in saliency-sample units) the inverse map is
//! the saliency-weighted Gaussian mean of input positions,
//!
//! ```text
//! T⁻¹(x) = ∫ S(x') k(x', x) x' dx' / ∫ S(x') k(x', x) dx'
//! ```
//!
//! with `S` piecewise constant over unit cells centred on the samples and
//! extended past both ends by repeating the end values. The kernel is cut at
//! 3σ, and each cell's contribution is integrated in closed form, so a
//! constant `S` gives `T⁻¹(x) = x` up to rounding.

use super::{AxisMap, WarpError};

/// Truncation radius of the Gaussian kernel, in standard deviations.
pub const KERNEL_RADIUS_SIGMAS: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxisMapOptions {
    /// Kernel standard deviation as a fraction of the input axis length.
    pub sigma_frac: f64,
    /// Stretch the map so its first and last values hit the first and last
    /// input pixel exactly.
    pub endpoint_rescale: bool,
}

impl AxisMapOptions {
    pub fn new(sigma_frac: f64) -> Self {
        Self {
            sigma_frac,
            endpoint_rescale: true,
        }
    }

    pub fn without_endpoint_rescale(mut self) -> Self {
        self.endpoint_rescale = false;
        self
    }
}

/// Kernel width in saliency-sample units for a marginal of `n` samples
/// spanning `in_len` pixels.
pub fn kernel_sigma_samples(sigma_frac: f64, n: usize, in_len: usize) -> f64 {
    sigma_frac * in_len as f64 * (n - 1) as f64 / (in_len - 1) as f64
}

/// Weighted-mean evaluator over an edge-extended, piecewise-constant marginal.
pub(crate) struct KernelMean<'a> {
    s: &'a [f64],
    sigma: f64,
    radius: f64,
    erf_scale: f64,
    mass_scale: f64,
}

impl<'a> KernelMean<'a> {
    pub(crate) fn new(s: &'a [f64], sigma: f64) -> Self {
        Self {
            s,
            sigma,
            radius: KERNEL_RADIUS_SIGMAS * sigma,
            erf_scale: 1.0 / (sigma * std::f64::consts::SQRT_2),
            mass_scale: sigma * (std::f64::consts::PI / 2.0).sqrt(),
        }
    }

    fn value(&self, k: i64) -> f64 {
        let last = self.s.len() as i64 - 1;
        self.s[k.clamp(0, last) as usize]
    }

    /// `T⁻¹(x)` in sample units.
    pub(crate) fn eval(&self, x: f64) -> f64 {
        let lo = x - self.radius;
        let hi = x + self.radius;
        let first = (lo + 0.5).floor() as i64;
        let last = (hi + 0.5).ceil() as i64;
        let gauss = |u: f64| (-0.5 * (u / self.sigma).powi(2)).exp();
        let var = self.sigma * self.sigma;

        let mut num = 0.0;
        let mut den = 0.0;
        for k in first..=last {
            let a = (k as f64 - 0.5).max(lo);
            let b = (k as f64 + 0.5).min(hi);
            if b <= a {
                continue;
            }
            let (ua, ub) = (a - x, b - x);
            let s = self.value(k);
            // ∫ g(u) du and ∫ u g(u) du over [ua, ub]
            let mass = self.mass_scale * (libm::erf(ub * self.erf_scale) - libm::erf(ua * self.erf_scale));
            let moment = var * (gauss(ua) - gauss(ub));
            den += s * mass;
            num += s * moment;
        }
        x + num / den
    }
}

/// Builds the inverse map from output positions to input pixel coordinates.
///
/// `s` is the saliency marginal along the axis; its first and last samples
/// sit on the first and last input pixel. Output positions are spread
/// uniformly over the same span.
pub fn inverse_axis_map(
    s: &[f64],
    in_len: usize,
    out_len: usize,
    sigma_frac: f64,
) -> Result<AxisMap, WarpError> {
    inverse_axis_map_with(s, in_len, out_len, AxisMapOptions::new(sigma_frac))
}

pub fn inverse_axis_map_with(
    s: &[f64],
    in_len: usize,
    out_len: usize,
    opts: AxisMapOptions,
) -> Result<AxisMap, WarpError> {
    if s.len() < 2 || in_len < 2 || out_len < 2 {
        return Err(WarpError::AxisTooShort);
    }
    if !(opts.sigma_frac > 0.0 && opts.sigma_frac <= 0.5) {
        return Err(WarpError::BadSigma(opts.sigma_frac));
    }
    if let Some(i) = s.iter().position(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(WarpError::NonPositiveSaliency { index: i, value: s[i] });
    }

    let n = s.len();
    let sigma = kernel_sigma_samples(opts.sigma_frac, n, in_len);
    let kernel = KernelMean::new(s, sigma);
    let span = (n - 1) as f64;
    let step = span / (out_len - 1) as f64;
    let in_last = (in_len - 1) as f64;

    let raw: Vec<f64> = (0..out_len).map(|i| kernel.eval(i as f64 * step)).collect();
    let values = if opts.endpoint_rescale {
        let (t0, t1) = (raw[0], raw[out_len - 1]);
        let scale = in_last / (t1 - t0);
        let mut v: Vec<f64> = raw.iter().map(|t| ((t - t0) * scale).clamp(0.0, in_last)).collect();
        v[0] = 0.0;
        v[out_len - 1] = in_last;
        v
    } else {
        let scale = in_last / span;
        raw.iter().map(|t| (t * scale).clamp(0.0, in_last)).collect()
    };
    AxisMap::new(values, in_len)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_saliency_is_identity() {
        let m = inverse_axis_map(&[0.7; 64], 64, 64, 0.06).unwrap();
        for (i, v) in m.values().iter().enumerate() {
            assert!((v - i as f64).abs() < 1e-6, "{i}: {v}");
        }
        // also without the rescale step
        let m = inverse_axis_map_with(&[0.7; 64], 64, 64, AxisMapOptions::new(0.06).without_endpoint_rescale())
            .unwrap();
        for (i, v) in m.values().iter().enumerate() {
            assert!((v - i as f64).abs() < 1e-9, "{i}: {v}");
        }
    }

    #[test]
    fn constant_saliency_downsample_is_uniform() {
        let m = inverse_axis_map(&[1.0; 96], 1920, 960, 0.06).unwrap();
        for (i, v) in m.values().iter().enumerate() {
            let expected = i as f64 * 1919.0 / 959.0;
            assert!((v - expected).abs() < 1e-9, "{i}: {v} vs {expected}");
        }
    }

    #[test]
    fn doubling_saliency_changes_nothing() {
        let s: Vec<f64> = (0..64).map(|i| 1.0 + (i as f64 * 0.37).sin().abs()).collect();
        let s2: Vec<f64> = s.iter().map(|v| 2.0 * v).collect();
        let a = inverse_axis_map(&s, 64, 64, 0.06).unwrap();
        let b = inverse_axis_map(&s2, 64, 64, 0.06).unwrap();
        assert_eq!(a.values(), b.values());
    }

    #[test]
    fn rejects_non_positive_saliency() {
        let mut s = vec![1.0; 16];
        s[3] = 0.0;
        assert!(matches!(
            inverse_axis_map(&s, 16, 16, 0.06),
            Err(WarpError::NonPositiveSaliency { index: 3, .. })
        ));
        s[3] = f64::NAN;
        assert!(inverse_axis_map(&s, 16, 16, 0.06).is_err());
        assert!(matches!(inverse_axis_map(&[1.0; 16], 16, 16, 0.0), Err(WarpError::BadSigma(_))));
    }

    #[test]
    fn salient_region_is_magnified() {
        let n = 64;
        let x0 = 0.75 * n as f64;
        let bump = 0.05 * n as f64;
        let s: Vec<f64> = (0..n)
            .map(|i| 0.1 + (-0.5 * ((i as f64 - x0) / bump).powi(2)).exp())
            .collect();
        let m = inverse_axis_map(&s, n, n, 0.06).unwrap();
        let v = m.values();
        let (argmin, _) = v
            .windows(2)
            .map(|w| w[1] - w[0])
            .enumerate()
            .fold((0, f64::MAX), |best, (i, d)| if d < best.1 { (i, d) } else { best });
        // output index whose image is the bump centre
        let image = v.iter().position(|&t| t >= x0).unwrap();
        assert!((argmin as i64 - image as i64).abs() <= 2, "min spacing at {argmin}, bump image {image}");
    }
}
