use std::path::Path;

use crate::bubble::Bubble;
use crate::error::{CknError, Result};
use crate::field::{translated_profile, AnalyticShape, AxisymField, Field, RadialProfile};
use crate::functionals::d_norm;
use crate::grid::{AngularRef, GridRef};
use crate::manifold::orthogonalize;
use crate::params::CknParams;
use crate::snapshot::load_snapshot;
use crate::stability::{mollify, normalized_bump};

use super::config::FieldSpec;

/// Everything a field spec needs to be sampled.
pub struct FieldContext<'a> {
    pub params: &'a CknParams,
    pub grid: &'a GridRef,
    pub angular: &'a AngularRef,
    /// Directory that relative snapshot paths are resolved against.
    pub base_dir: &'a Path,
}

pub fn build_field(spec: &FieldSpec, cx: &FieldContext) -> Result<Field> {
    let prm = cx.params;
    match spec {
        FieldSpec::Bubble { scale, factor, shift } => {
            let canon = Bubble::canonical(prm, *scale)?;
            let bub = Bubble::new(canon.amplitude * factor, canon.scale, *shift)?;
            let ang = (*shift != 0.0).then_some(cx.angular);
            bub.field(prm, cx.grid, ang)
        }
        FieldSpec::LogGaussian {
            center,
            width,
            amplitude,
        } => Ok(Field::Radial(RadialProfile::from_shape(
            cx.grid.clone(),
            AnalyticShape::LogGaussian {
                amplitude: *amplitude,
                center: *center,
                width: *width,
            },
        ))),
        FieldSpec::Bump {
            center,
            width,
            orthogonalize: orth,
            renormalize,
        } => {
            let z = normalized_bump(prm, cx.grid, *center, *width)?;
            if !orth {
                return Ok(z);
            }
            let canon = Bubble::canonical(prm, 1.0)?;
            let zo = orthogonalize(&z, &canon, prm)?;
            if *renormalize {
                Ok(zo.scaled(d_norm(&z, prm)? / d_norm(&zo, prm)?))
            } else {
                Ok(zo)
            }
        }
        FieldSpec::AxisymBump { center, width, tilt } => {
            let (c, w, tilt) = (*center, *width, *tilt);
            Ok(Field::Axisym(AxisymField::from_fn(
                cx.grid.clone(),
                cx.angular.clone(),
                |r, psi| {
                    let s = r.ln() - c;
                    let g = (-s * s / (2.0 * w * w)).exp();
                    let ang = 1.0 + tilt * psi.cos();
                    (g * ang, -g * s / (w * w * r) * ang, -g * tilt * psi.sin())
                },
            )))
        }
        FieldSpec::TranslatedBump {
            log_shift,
            width_fraction,
            power,
        } => {
            let shift = log_shift.exp();
            let ell = width_fraction * shift;
            let prof = RadialProfile::from_shape(
                cx.grid.clone(),
                AnalyticShape::Bubble {
                    amplitude: 1.0,
                    b: ell.powi(-2),
                    sigma: 2.0,
                    power: *power,
                },
            );
            let f = Field::Axisym(translated_profile(&prof, shift, cx.grid.clone(), cx.angular.clone()));
            let norm = d_norm(&f, prm)?;
            Ok(f.scaled(1.0 / norm))
        }
        FieldSpec::Perturbed {
            center,
            width,
            eps,
            orthogonalize: orth,
        } => {
            let canon = Bubble::canonical(prm, 1.0)?;
            let v = canon.field(prm, cx.grid, None)?;
            let mut z = normalized_bump(prm, cx.grid, *center, *width)?;
            if *orth {
                z = orthogonalize(&z, &canon, prm)?;
            }
            v.add_scaled(*eps, &z)
        }
        FieldSpec::MollifiedBubble { scale, radius } => {
            let v = Bubble::canonical(prm, *scale)?.field(prm, cx.grid, None)?;
            Ok(mollify(&v, *radius))
        }
        FieldSpec::Snapshot { path } => {
            let full = cx.base_dir.join(path);
            let f = load_snapshot(&full)?;
            if !f.grid().same_as(cx.grid) {
                return Err(CknError::GridMismatch(format!(
                    "snapshot {} was saved on a different grid than the experiment's",
                    full.display()
                )));
            }
            Ok(f)
        }
    }
}

pub fn build_fields(specs: &[FieldSpec], cx: &FieldContext) -> Result<Vec<Field>> {
    specs.iter().map(|s| build_field(s, cx)).collect()
}
