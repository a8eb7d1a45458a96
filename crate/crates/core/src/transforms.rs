//! Radial power maps u ↦ e^{1/q} u(r^e θ): the Horiuchi map (e = k) sending the
//! weights (a, b) to (0, b − a), and the hat map (e = h) between two weight pairs
//! with the same γ. Both act on samples exactly by re-mapping the log grid.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{CknError, Result};
use crate::field::{AxisymField, Field, RadialProfile};
use crate::functionals::{lq_energy, polar_grad_energy};
use crate::grid::{GridRef, RadialGrid};
use crate::params::{CknParams, HatParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Forward,
    Inverse,
}

/// Residuals of the change-of-variables identities for one field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformReport {
    /// Relative mismatch of the q-energy identity.
    pub q_norm_residual: f64,
    /// Relative mismatch of the gradient identity with the k-modified functional.
    pub grad_identity_residual: f64,
    /// (k-modified − plain) functional of the image, scaled like the identity; ≥ 0.
    pub grad_drop_gap: f64,
    /// Both sides of the gradient identity and of the q identity.
    pub grad_lhs: f64,
    pub grad_rhs: f64,
    pub q_lhs: f64,
    pub q_rhs: f64,
    pub direction: Direction,
}

fn map_grid(grid: &GridRef, e: f64) -> GridRef {
    // undo a previous map exactly when this one inverts it
    let spec = grid.spec();
    if let Some(&last) = spec.rescalings.last() {
        if last == e || last / e == 1.0 {
            let mut base = spec.clone();
            base.rescalings.pop();
            if let Ok(g) = RadialGrid::from_spec(&base) {
                return Arc::new(g);
            }
        }
    }
    Arc::new(grid.rescaled(1.0 / e))
}

/// r ↦ e^{1/q} u(r^e): node i of the image sits at t_i / e and reuses sample i.
pub fn power_map(u: &Field, e: f64, q: f64) -> Field {
    if e == 1.0 {
        return u.clone();
    }
    let scale = e.powf(1.0 / q);
    let src = u.grid();
    let grid = map_grid(src, e);
    // ∂_r ū(r̄) = scale · e · r̄^{e-1} u'(r̄^e) = scale · e · (r / r̄) u'(r)
    let jac: Vec<f64> = src
        .nodes()
        .iter()
        .zip(grid.nodes())
        .map(|(r, rb)| scale * e * r / rb)
        .collect();
    match u {
        Field::Radial(p) => Field::Radial(RadialProfile {
            grid: grid.clone(),
            values: p.values.iter().map(|v| scale * v).collect(),
            derivative: p.derivative.iter().zip(&jac).map(|(d, j)| d * j).collect(),
            analytic: p.analytic.as_ref().map(|s| s.power_mapped(e, scale)),
        }),
        Field::Axisym(f) => {
            let m = f.angular.len();
            let mut grad_r = Vec::with_capacity(f.grad_r.len());
            for (i, j) in jac.iter().enumerate() {
                for k in 0..m {
                    grad_r.push(f.grad_r[i * m + k] * j);
                }
            }
            Field::Axisym(AxisymField {
                grid,
                angular: f.angular.clone(),
                values: f.values.iter().map(|v| scale * v).collect(),
                grad_r,
                grad_psi: f.grad_psi.iter().map(|v| scale * v).collect(),
            })
        }
    }
}

/// ū(rθ) = k^{1/q} u(r^k θ) (forward) or its inverse.
pub fn horiuchi_map(u: &Field, params: &CknParams, direction: Direction) -> Result<Field> {
    params.unweighted_partner()?;
    Ok(match direction {
        Direction::Forward => power_map(u, params.k, params.q),
        Direction::Inverse => power_map(u, 1.0 / params.k, params.q),
    })
}

/// û(rθ) = h^{1/q} u(r^h θ) (forward) or its inverse.
pub fn hat_map(u: &Field, hp: &HatParams, direction: Direction) -> Result<Field> {
    let q = hp.target.q;
    Ok(match direction {
        Direction::Forward => power_map(u, hp.h, q),
        Direction::Inverse => power_map(u, 1.0 / hp.h, q),
    })
}

pub(crate) fn relative_gap(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

/// Evaluates both sides of the q-energy identity and the gradient identity of the
/// Horiuchi map; also records how much the k²→1 drop loses.
pub fn transform_identity_check(u: &Field, params: &CknParams) -> Result<TransformReport> {
    if !(params.a > 0.0) {
        return Err(CknError::region(format!(
            "identity check needs a > 0 (got a = {})",
            params.a
        )));
    }
    let partner = params.unweighted_partner()?;
    let (n, p, q, k) = (params.n, params.p, params.q, params.k);
    let bar = horiuchi_map(u, params, Direction::Forward)?;
    let q_lhs = lq_energy(u, n, q, q * params.b)?;
    let q_rhs = lq_energy(&bar, n, q, q * partner.b)?;
    let factor = k.powf(1.0 - p - p / q);
    let grad_lhs = polar_grad_energy(u, n, p, p * params.a, 1.0)?;
    let modified = polar_grad_energy(&bar, n, p, 0.0, k)?;
    let plain = polar_grad_energy(&bar, n, p, 0.0, 1.0)?;
    let grad_rhs = factor * modified;
    Ok(TransformReport {
        q_norm_residual: relative_gap(q_lhs, q_rhs),
        grad_identity_residual: relative_gap(grad_lhs, grad_rhs),
        grad_drop_gap: factor * (modified - plain),
        grad_lhs,
        grad_rhs,
        q_lhs,
        q_rhs,
        direction: Direction::Forward,
    })
}
