//! Extremal profiles A(1 + B r^σ)^{-β}, their canonical normalization and the
//! fields generated from them (samples, translates, tangent directions).

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{CknError, Result};
use crate::field::{translated_profile, AnalyticShape, AxisymField, Field, RadialProfile};
use crate::grid::{AngularRef, GridRef, RadialGrid};
use crate::params::CknParams;
use crate::special::beta;

/// One element of the extremal family: amplitude A, scale λ (so B = λ^σ) and an
/// optional shift x₀ along e₁, giving x ↦ A (1 + (λ|x + x₀e₁|)^σ)^{-β}.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bubble {
    pub amplitude: f64,
    pub scale: f64,
    #[serde(default)]
    pub axial_shift: f64,
}

impl Bubble {
    pub fn new(amplitude: f64, scale: f64, axial_shift: f64) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(CknError::InvariantViolation(format!("bubble scale {scale} must be > 0")));
        }
        Ok(Bubble {
            amplitude,
            scale,
            axial_shift,
        })
    }

    /// The normalized bubble λ^{(n-p-pa)/p} V(λx) with V = A_{p,a,b}(1 + |x|^σ)^{-β}.
    pub fn canonical(params: &CknParams, scale: f64) -> Result<Self> {
        let a = bubble_normalization(params)?;
        Bubble::new(a * scale.powf(params.dilation_weight()), scale, 0.0)
    }

    /// Same bubble with the canonical amplitude for its scale.
    pub fn with_canonical_amplitude(&self, params: &CknParams) -> Result<Self> {
        let mut b = Bubble::canonical(params, self.scale)?;
        b.axial_shift = self.axial_shift;
        Ok(b)
    }

    pub fn b(&self, params: &CknParams) -> f64 {
        self.scale.powf(params.sigma())
    }

    pub fn shape(&self, params: &CknParams) -> AnalyticShape {
        AnalyticShape::Bubble {
            amplitude: self.amplitude,
            b: self.b(params),
            sigma: params.sigma(),
            power: params.profile_power(),
        }
    }

    /// d/dλ at λ = 1 of μ^{(n-p-pa)/p} times this bubble dilated by μ about its centre.
    pub fn dilation_shape(&self, params: &CknParams) -> AnalyticShape {
        AnalyticShape::BubbleDilation {
            amplitude: self.amplitude,
            b: self.b(params),
            sigma: params.sigma(),
            power: params.profile_power(),
            weight: params.dilation_weight(),
        }
    }

    /// Samples the bubble; radial when unshifted and no angular rule is given.
    pub fn field(&self, params: &CknParams, grid: &GridRef, angular: Option<&AngularRef>) -> Result<Field> {
        shape_field(&self.shape(params), self.axial_shift, params, grid, angular)
    }

    /// Tangent generator of dilations, on the same footing as [`Bubble::field`].
    pub fn dilation_field(&self, params: &CknParams, grid: &GridRef, angular: Option<&AngularRef>) -> Result<Field> {
        shape_field(&self.dilation_shape(params), self.axial_shift, params, grid, angular)
    }

    /// ∂_{x₁} of the bubble on the (r, ψ) grid.
    pub fn axial_derivative(&self, params: &CknParams, grid: &GridRef, angular: &AngularRef) -> AxisymField {
        let shape = self.shape(params);
        let x0 = self.axial_shift;
        AxisymField::from_fn(grid.clone(), angular.clone(), |r, psi| {
            let (c, s) = (psi.cos(), psi.sin());
            let dist = (r * r + 2.0 * r * x0 * c + x0 * x0).max(0.0).sqrt();
            if dist == 0.0 {
                return (0.0, 0.0, 0.0);
            }
            let (_, d1, d2) = shape.eval2(dist);
            let num = r * c + x0;
            let ds_dr = (r + x0 * c) / dist;
            let ds_dpsi = -r * x0 * s / dist;
            let value = d1 * num / dist;
            let derive = |ds: f64, dnum: f64| d2 * ds * num / dist + d1 * (dnum * dist - num * ds) / (dist * dist);
            (value, derive(ds_dr, c), derive(ds_dpsi, -r * s))
        })
    }
}

fn shape_field(
    shape: &AnalyticShape,
    shift: f64,
    params: &CknParams,
    grid: &GridRef,
    angular: Option<&AngularRef>,
) -> Result<Field> {
    let profile = RadialProfile::from_shape(grid.clone(), shape.clone());
    if shift != 0.0 && params.a > 0.0 {
        return Err(CknError::TranslationForbidden(params.a));
    }
    match angular {
        None if shift == 0.0 => Ok(Field::Radial(profile)),
        None => Err(CknError::GridMismatch("a shifted bubble needs an angular rule".into())),
        Some(ang) => Ok(Field::Axisym(translated_profile(&profile, shift, grid.clone(), ang.clone()))),
    }
}

/// Samples A(1 + B r^σ)^{-β} with its analytic derivative.
pub fn sample_bubble(params: &CknParams, bubble: &Bubble, grid: &GridRef) -> Result<RadialProfile> {
    if !(bubble.scale > 0.0) {
        return Err(CknError::InvariantViolation("bubble scale must be positive".into()));
    }
    Ok(RadialProfile::from_shape(grid.clone(), bubble.shape(params)))
}

/// The two radial energies of (1 + r^σ)^{-β}: (∫|x|^{-pa}|∇V|^p, ∫|x|^{-qb}V^q) / |S^{n-1}|.
pub fn unit_profile_energies(params: &CknParams) -> (f64, f64) {
    let n = params.n as f64;
    let (p, q) = (params.p, params.q);
    let sigma = params.sigma();
    let bp = params.profile_power();
    let m = (n - params.b * q) / sigma;
    let q_int = beta(m, bp * q - m) / sigma;
    let m1 = params.gap() / sigma + p;
    let g_int = (bp * sigma).powf(p) * beta(m1, p * (bp + 1.0) - m1) / sigma;
    (g_int, q_int)
}

/// A_{p,a,b} > 0 such that both energies of A(1 + |x|^σ)^{-β} coincide (and equal S^{pq/(q-p)}).
pub fn bubble_normalization(params: &CknParams) -> Result<f64> {
    let (g, q) = unit_profile_energies(params);
    let a = (g / q).powf(1.0 / (params.q - params.p));
    if !(a.is_finite() && a > 0.0) {
        return Err(CknError::RootFindFailure(format!(
            "normalization for {:?} is not a positive finite number",
            params.key()
        )));
    }
    Ok(a)
}

/// A grid suited to the parameters, shared behind an `Arc`.
pub fn default_grid(params: &CknParams) -> GridRef {
    Arc::new(RadialGrid::for_params(params))
}
