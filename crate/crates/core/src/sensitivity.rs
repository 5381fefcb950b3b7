//! Finite-difference sensitivities of warp objectives.
//!
//! Central differences at steps `h` and `h/2` give a gradient estimate and
//! a Richardson gap, a cheap check that the objective is smooth in the
//! chosen parameter direction.

use thiserror::Error;

use crate::geometry::ImageSize;
use crate::saliency::{two_plane_saliency, ParamId, SaliencyError, WarpParams};
use crate::warp::{build_warp, warp_image, AxisMapOptions, Image, WarpError};

#[derive(Debug, Error)]
pub enum SensitivityError {
    #[error("step {0} outside [1e-6, 1e-2]")]
    BadStep(f64),
    #[error("{param} = {value} is within {margin} of its bound")]
    ClampBoundary { param: ParamId, value: f64, margin: f64 },
    #[error("empty parameter direction")]
    EmptyDirection,
    #[error("reference image does not match the warp output")]
    ReferenceMismatch,
    #[error(transparent)]
    Saliency(#[from] SaliencyError),
    #[error(transparent)]
    Warp(#[from] WarpError),
}

/// Scalar objective evaluated on the saliency map or the warp it induces.
#[derive(Debug, Clone)]
pub enum Objective {
    /// Sum of the horizontal axis map values.
    SumTx,
    /// Sum of all saliency cells.
    SumS,
    /// Squared L2 distance between the warped `image` and `reference`.
    WarpL2 { image: Image, reference: Image },
}

/// Frame geometry the objective is evaluated in.
#[derive(Debug, Clone, Copy)]
pub struct EvalContext {
    pub size: ImageSize,
    pub grid: ImageSize,
    pub out_size: ImageSize,
    pub endpoint_rescale: bool,
}

impl EvalContext {
    fn axis_options(&self, params: &WarpParams) -> AxisMapOptions {
        AxisMapOptions {
            sigma_frac: params.kernel_sigma_frac(),
            endpoint_rescale: self.endpoint_rescale,
        }
    }
}

pub fn evaluate(params: &WarpParams, ctx: &EvalContext, objective: &Objective) -> Result<f64, SensitivityError> {
    let sal = two_plane_saliency(params, ctx.size, ctx.grid)?;
    if let Objective::SumS = objective {
        return Ok(sal.sum());
    }
    let wf = build_warp(&sal, ctx.out_size, ctx.axis_options(params))?;
    match objective {
        Objective::SumTx => Ok(wf.tx().values().iter().sum()),
        Objective::WarpL2 { image, reference } => {
            let out = warp_image(image, &wf);
            if out.size() != reference.size() || out.channels() != reference.channels() {
                return Err(SensitivityError::ReferenceMismatch);
            }
            Ok((0..out.channels())
                .flat_map(|c| out.plane(c).iter().zip(reference.plane(c)))
                .map(|(a, b)| f64::from(a - b).powi(2))
                .sum())
        }
        Objective::SumS => unreachable!("handled above"),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sensitivity {
    /// Richardson-extrapolated derivative `(4·g(h/2) − g(h)) / 3`.
    pub gradient: f64,
    pub g_step: f64,
    pub g_half_step: f64,
    /// `|g(h) − g(h/2)| / max(|g(h/2)|, 1e-8)`
    pub richardson_gap: f64,
}

/// Directional derivative of `objective` along `Σ cᵢ · eᵢ`, where `eᵢ` is
/// the unit change of parameter `ParamId` `i`.
pub fn directional_sensitivity(
    params: &WarpParams,
    ctx: &EvalContext,
    objective: &Objective,
    direction: &[(ParamId, f64)],
    step: f64,
) -> Result<Sensitivity, SensitivityError> {
    if !(1e-6..=1e-2).contains(&step) {
        return Err(SensitivityError::BadStep(step));
    }
    if direction.is_empty() {
        return Err(SensitivityError::EmptyDirection);
    }
    for &(id, c) in direction {
        let (lo, hi) = id.domain();
        let value = params.get(id);
        let margin = 2.0 * step * c.abs();
        if value - margin <= lo || value + margin >= hi {
            return Err(SensitivityError::ClampBoundary { param: id, value, margin });
        }
    }
    let shifted = |t: f64| -> Result<f64, SensitivityError> {
        let mut p = *params;
        for &(id, c) in direction {
            p = p.with(id, params.get(id) + t * c)?;
        }
        evaluate(&p, ctx, objective)
    };
    let central = |h: f64| -> Result<f64, SensitivityError> { Ok((shifted(h)? - shifted(-h)?) / (2.0 * h)) };
    let g_step = central(step)?;
    let g_half_step = central(step / 2.0)?;
    Ok(Sensitivity {
        gradient: (4.0 * g_half_step - g_step) / 3.0,
        g_step,
        g_half_step,
        richardson_gap: (g_step - g_half_step).abs() / g_half_step.abs().max(1e-8),
    })
}

/// Sensitivity with respect to a single parameter.
pub fn param_sensitivity(
    params: &WarpParams,
    ctx: &EvalContext,
    objective: &Objective,
    param: ParamId,
    step: f64,
) -> Result<Sensitivity, SensitivityError> {
    directional_sensitivity(params, ctx, objective, &[(param, 1.0)], step)
}
