//! Projection onto the extremal family: distance in D_a^p, the maximal-pairing
//! bubble P_u, the (μ, ρ) decomposition and the tangent space with its
//! weighted orthogonality.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::bubble::Bubble;
use crate::error::{CknError, Result};
use crate::field::{Field, Measure};
use crate::functionals::{d_norm, weighted_lq_norm};
use crate::grid::{AngularRef, AngularRule, DEFAULT_ANGULAR};
use crate::optimize::{golden_section, nelder_mead, NelderMeadOptions};
use crate::params::CknParams;

/// Relative spread within which restarts count as reproducing the best value.
pub const RESTART_AGREEMENT: f64 = 1e-4;
/// Half-width of the log λ window searched around the moment-matched seed.
pub const PU_WINDOW: f64 = 8.0;

/// Result of the distance minimization, with the restart bookkeeping.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Projection {
    /// Best value found: an upper bound on the true infimum.
    pub distance: f64,
    pub bubble: Bubble,
    pub restarts: usize,
    pub agreeing: usize,
    pub upper_bound: bool,
}

/// (V, μ, ρ) with orthogonality residuals of ρ against the tangent directions.
#[derive(Debug, Clone, PartialEq)]
pub struct DecompositionRecord {
    pub v: Bubble,
    pub mu: f64,
    pub rho: Field,
    pub tangent_residuals: Vec<f64>,
    pub tangent_labels: Vec<&'static str>,
    /// ‖|x|^{-a}∇ρ‖_p.
    pub distance_estimate: f64,
    /// Translation directions of the tangent space that an axisymmetric grid cannot carry.
    pub unrepresented_directions: usize,
}

/// Tangent directions at a bubble.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentBasis {
    pub fields: Vec<Field>,
    pub labels: Vec<&'static str>,
    pub unrepresented: usize,
}

fn translations_allowed(params: &CknParams) -> bool {
    params.a == 0.0 && params.b == 0.0
}

/// Weighted moments used to seed the searches: total q-energy, mean log-radius
/// and mean axial coordinate under the density |x|^{-qb}|u|^q.
fn q_moments(u: &Field, params: &CknParams) -> Result<(f64, f64, f64)> {
    let m = Measure::for_fields(params.n, &[u])?;
    let q = params.q;
    let s = q * params.b;
    let dens = |nd: crate::field::Node| {
        let v = u.at(nd.i, nd.j).value.abs();
        if v == 0.0 {
            0.0
        } else {
            v.powf(q)
        }
    };
    let mass = m.integrate(s, dens);
    if mass == 0.0 {
        return Err(CknError::ZeroField("projection"));
    }
    let log_mean = m.integrate(s, |nd| dens(nd) * nd.r.ln()) / mass;
    let axial = if u.is_radial() {
        0.0
    } else {
        m.integrate(s, |nd| dens(nd) * nd.r * nd.cos_psi) / mass
    };
    Ok((mass, log_mean, axial))
}

/// Mean log-radius of the canonical bubble at λ = 1 under its own q-density.
fn canonical_log_mean(params: &CknParams, grid: &crate::grid::GridRef) -> Result<f64> {
    let v = Bubble::canonical(params, 1.0)?.field(params, grid, None)?;
    Ok(q_moments(&v, params)?.1)
}

/// Moment-matched bubble: scale from the log-radius mean, amplitude from the
/// q-energy, sign from the pairing, shift from the axial mean (a = b = 0 only).
pub fn moment_seed(u: &Field, params: &CknParams) -> Result<Bubble> {
    let (mass, log_mean, axial) = q_moments(u, params)?;
    let m1 = canonical_log_mean(params, u.grid())?;
    let scale = (m1 - log_mean).exp();
    let mut bub = Bubble::canonical(params, scale)?;
    let energy = params.bubble_energy();
    let sign = {
        let v = bub.field(params, u.grid(), None)?;
        let m = Measure::for_fields(params.n, &[u, &v])?;
        let pair = m.integrate(0.0, |nd| u.at(nd.i, nd.j).value * v.at(nd.i, nd.j).value);
        if pair < 0.0 {
            -1.0
        } else {
            1.0
        }
    };
    bub.amplitude *= sign * (mass / energy).powf(1.0 / params.q);
    if translations_allowed(params) && !u.is_radial() {
        bub.axial_shift = -axial;
    }
    Ok(bub)
}

struct DistanceProblem<'a> {
    u: &'a Field,
    params: &'a CknParams,
    measure: Measure,
    angular: Option<AngularRef>,
    shifts: bool,
}

impl DistanceProblem<'_> {
    fn bubble(&self, x: &[f64]) -> Bubble {
        let sigma = self.params.sigma();
        Bubble {
            amplitude: x[0],
            scale: (x[1] / sigma).exp(),
            axial_shift: if self.shifts { x[2] } else { 0.0 },
        }
    }

    /// ‖|x|^{-a}(∇u − ∇v)‖_p^p for the bubble with parameters (A, ln B[, x₀]).
    fn energy(&self, x: &[f64]) -> f64 {
        let p = self.params.p;
        let s = p * self.params.a;
        let bub = self.bubble(x);
        if self.shifts && bub.axial_shift != 0.0 {
            let ang = self.angular.as_ref().expect("shift search needs angles");
            let v = match bub.field(self.params, self.u.grid(), Some(ang)) {
                Ok(v) => v,
                Err(_) => return f64::INFINITY,
            };
            return self.measure.integrate(s, |nd| {
                let (a, b) = (self.u.at(nd.i, nd.j), v.at(nd.i, nd.j));
                let dr = a.grad_r - b.grad_r;
                let da = a.grad_ang - b.grad_ang;
                pow_half(dr * dr + da * da, p)
            });
        }
        let shape = bub.shape(self.params);
        let dv: Vec<f64> = self.u.grid().nodes().iter().map(|&r| shape.eval(r).1).collect();
        self.measure.integrate(s, |nd| {
            let a = self.u.at(nd.i, nd.j);
            let dr = a.grad_r - dv[nd.i];
            pow_half(dr * dr + a.grad_ang * a.grad_ang, p)
        })
    }
}

#[inline]
fn pow_half(x: f64, p: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x.powf(0.5 * p)
    }
}

/// inf over the extremal family of ‖|x|^{-a}(∇u − ∇v)‖_p by multi-start
/// Nelder–Mead on (A, ln B), plus the axial shift x₀ for axisymmetric u when
/// a = b = 0. The value is the best found, an upper bound on the infimum.
pub fn manifold_projection(u: &Field, params: &CknParams) -> Result<Projection> {
    let norm = d_norm(u, params)?;
    if norm == 0.0 || u.is_zero() {
        return Err(CknError::ZeroField("manifold distance"));
    }
    let seed = moment_seed(u, params)?;
    let shifts = translations_allowed(params) && !u.is_radial();
    let problem = DistanceProblem {
        u,
        params,
        measure: Measure::for_fields(params.n, &[u])?,
        angular: u.angular().cloned(),
        shifts,
    };
    let sigma = params.sigma();
    let lnb = sigma * seed.scale.ln();
    let x_scale = (-lnb / sigma).exp();
    let mut starts: Vec<Vec<f64>> = vec![
        vec![seed.amplitude, lnb],
        vec![seed.amplitude * 0.9, lnb + 0.3 * sigma],
        vec![seed.amplitude * 1.1, lnb - 0.3 * sigma],
        vec![seed.amplitude * 1.05, lnb + 0.1 * sigma],
        vec![seed.amplitude * 0.95, lnb - 0.1 * sigma],
    ];
    if shifts {
        let offsets = [0.0, 0.05, -0.05, 0.1, -0.1];
        for (s, o) in starts.iter_mut().zip(offsets) {
            s.push(seed.axial_shift + o * x_scale);
        }
    }
    let mut step = vec![0.05 * seed.amplitude.abs().max(1e-12), 0.2 * sigma];
    if shifts {
        step.push(0.05 * x_scale);
    }
    let opts = NelderMeadOptions {
        max_evals: 3000,
        f_tol: 1e-14,
        f_floor: 1e-30 * norm.powf(params.p),
        x_tol: 1e-12,
    };
    let objective = |x: &[f64]| problem.energy(x);
    let mut results: Vec<(f64, Vec<f64>)> = Vec::new();
    for s in &starts {
        let mut m = nelder_mead(objective, s, &step, opts);
        // one restart from the reported minimum shakes off a collapsed simplex
        let small: Vec<f64> = step.iter().map(|v| v * 0.1).collect();
        let m2 = nelder_mead(objective, &m.x, &small, opts);
        if m2.f <= m.f {
            m = m2;
        }
        results.push((m.f.max(0.0).powf(1.0 / params.p), m.x));
    }
    let (best, best_x) = results
        .iter()
        .min_by(|a, b| a.0.partial_cmp(&b.0).unwrap())
        .cloned()
        .unwrap();
    let tol = RESTART_AGREEMENT * best + 1e-8 * norm;
    let agreeing = results.iter().filter(|(d, _)| *d - best <= tol).count();
    if agreeing < 3 {
        return Err(CknError::OptimizerStall(format!(
            "only {agreeing} of {} restarts reproduce the best distance {best:e}",
            results.len()
        )));
    }
    Ok(Projection {
        distance: best,
        bubble: problem.bubble(&best_x),
        restarts: results.len(),
        agreeing,
        upper_bound: true,
    })
}

/// Distance to the extremal family and the minimizing bubble.
pub fn manifold_distance(u: &Field, params: &CknParams) -> Result<(f64, Bubble)> {
    manifold_projection(u, params).map(|p| (p.distance, p.bubble))
}

/// Angular integral of u per radial node: ∫_{S^{n-1}} u(rθ) dθ.
fn angular_profile(u: &Field, n: usize) -> Vec<f64> {
    match u {
        Field::Radial(p) => {
            let area = crate::special::sphere_area(n);
            p.values.iter().map(|v| v * area).collect()
        }
        Field::Axisym(f) => {
            let m = f.angular.len();
            let w = f.angular.weights();
            f.values
                .chunks(m)
                .map(|row| row.iter().zip(w).map(|(v, w)| v * w).sum())
                .collect()
        }
    }
}

/// P_u: the canonical bubble maximizing ∫|x|^{-qb}|W|^{q-2}W u: a scan of
/// log λ over the seed ± 8 followed by golden-section refinement of the local
/// maxima; ties go to the smallest |log λ|. For axisymmetric u with a = b = 0
/// the axial shift is then refined jointly.
pub fn select_pu(u: &Field, params: &CknParams) -> Result<Bubble> {
    if u.is_zero() {
        return Err(CknError::ZeroField("P_u"));
    }
    let seed = moment_seed(u, params)?;
    let grid = u.grid().clone();
    let n = params.n;
    let q = params.q;
    let profile = angular_profile(u, n);
    let weights: Vec<f64> = grid
        .nodes()
        .iter()
        .zip(grid.weights())
        .map(|(r, w)| w * r.powf(n as f64 - 1.0 - q * params.b))
        .collect();
    let canon = Bubble::canonical(params, 1.0)?;
    let objective = |log_lambda: f64| -> f64 {
        let lambda = log_lambda.exp();
        let bub = Bubble {
            amplitude: canon.amplitude * lambda.powf(params.dilation_weight()),
            scale: lambda,
            axial_shift: 0.0,
        };
        let shape = bub.shape(params);
        grid.nodes()
            .iter()
            .zip(&weights)
            .zip(&profile)
            .map(|((&r, w), pu)| {
                let v = shape.eval(r).0;
                w * v.abs().powf(q - 2.0) * v * pu
            })
            .sum()
    };
    let center = seed.scale.ln();
    let steps = 320usize;
    let h = 2.0 * PU_WINDOW / steps as f64;
    let xs: Vec<f64> = (0..=steps).map(|i| center - PU_WINDOW + h * i as f64).collect();
    let ys: Vec<f64> = xs.iter().map(|&x| objective(x)).collect();
    let mut peaks: Vec<usize> = (0..xs.len())
        .filter(|&i| {
            let left = if i == 0 { f64::NEG_INFINITY } else { ys[i - 1] };
            let right = if i + 1 == xs.len() { f64::NEG_INFINITY } else { ys[i + 1] };
            ys[i] >= left && ys[i] >= right
        })
        .collect();
    peaks.sort_by(|&a, &b| ys[b].partial_cmp(&ys[a]).unwrap());
    peaks.truncate(3);
    let mut best: Option<(f64, f64)> = None;
    for i in peaks {
        let lo = xs[i] - h;
        let hi = xs[i] + h;
        let (x, f) = golden_section(|x| -objective(x), lo, hi, 1e-10);
        let val = -f;
        best = match best {
            None => Some((x, val)),
            Some((bx, bv)) => {
                let tie = (val - bv).abs() <= 1e-12 * bv.abs().max(val.abs());
                if (tie && x.abs() < bx.abs()) || (!tie && val > bv) {
                    Some((x, val))
                } else {
                    Some((bx, bv))
                }
            }
        }
    }
    let (log_lambda, _) = best.ok_or_else(|| CknError::OptimizerStall("no P_u candidate".into()))?;
    let mut bub = Bubble::canonical(params, log_lambda.exp())?;
    if translations_allowed(params) && !u.is_radial() {
        let ang = u.angular().cloned().expect("axisymmetric");
        let measure = Measure::for_fields(n, &[u])?;
        let s = q * params.b;
        let pair = |x: &[f64]| -> f64 {
            let lambda = x[0].exp();
            let mut w = match Bubble::canonical(params, lambda) {
                Ok(w) => w,
                Err(_) => return f64::INFINITY,
            };
            w.axial_shift = x[1];
            let wf = match w.field(params, &grid, Some(&ang)) {
                Ok(f) => f,
                Err(_) => return f64::INFINITY,
            };
            -measure.integrate(s, |nd| {
                let v = wf.at(nd.i, nd.j).value;
                v.abs().powf(q - 2.0) * v * u.at(nd.i, nd.j).value
            })
        };
        let x_scale = 1.0 / bub.scale;
        let m = nelder_mead(
            pair,
            &[log_lambda, seed.axial_shift],
            &[0.05, 0.05 * x_scale],
            NelderMeadOptions {
                max_evals: 600,
                f_tol: 1e-13,
                f_floor: 1e-300,
                x_tol: 1e-10,
            },
        );
        bub = Bubble::canonical(params, m.x[0].exp())?;
        bub.axial_shift = m.x[1];
    }
    Ok(bub)
}

/// ⟨f, g⟩_V = ∫|x|^{-qb}|V|^{q-2} f g.
pub fn v_pairing(f: &Field, g: &Field, v: &Field, params: &CknParams) -> Result<f64> {
    let m = Measure::for_fields(params.n, &[f, g, v])?;
    let q = params.q;
    Ok(m.integrate(q * params.b, |nd| {
        let vv = v.at(nd.i, nd.j).value.abs();
        if vv == 0.0 {
            return 0.0;
        }
        vv.powf(q - 2.0) * f.at(nd.i, nd.j).value * g.at(nd.i, nd.j).value
    }))
}

fn v_field(bub: &Bubble, params: &CknParams, like: &Field) -> Result<Field> {
    if bub.axial_shift != 0.0 {
        let ang = match like.angular() {
            Some(a) => a.clone(),
            None => Arc::new(AngularRule::new(params.n, DEFAULT_ANGULAR)?),
        };
        bub.field(params, like.grid(), Some(&ang))
    } else {
        bub.field(params, like.grid(), None)
    }
}

/// Tangent directions at V on the grid of `like`: V, the dilation generator, and
/// ∂_{x₁}V when a = b = 0 (omitted for radial `like` at an unshifted bubble).
pub fn tangent_basis(bub: &Bubble, params: &CknParams, like: &Field) -> Result<TangentBasis> {
    let mut fields = Vec::new();
    let mut labels = Vec::new();
    let grid = like.grid();
    let angular = like.angular().cloned();
    let shifted = bub.axial_shift != 0.0;
    let ang_for_shift = || -> Result<AngularRef> {
        match &angular {
            Some(a) => Ok(a.clone()),
            None => Ok(Arc::new(AngularRule::new(params.n, DEFAULT_ANGULAR)?)),
        }
    };
    let ang = if shifted { Some(ang_for_shift()?) } else { None };
    fields.push(bub.field(params, grid, ang.as_ref())?);
    labels.push("amplitude");
    fields.push(bub.dilation_field(params, grid, ang.as_ref())?);
    labels.push("dilation");
    let mut unrepresented = 0;
    if translations_allowed(params) && !shifted && like.is_radial() {
        // every translation generator is odd, hence orthogonal to radial fields
        unrepresented = params.n;
    } else if translations_allowed(params) {
        let a = ang_for_shift()?;
        fields.push(Field::Axisym(bub.axial_derivative(params, grid, &a)));
        labels.push("axial");
        unrepresented = params.n - 1;
    }
    Ok(TangentBasis {
        fields,
        labels,
        unrepresented,
    })
}

/// Normalized pairings ⟨ρ, W⟩_V / (⟨ρ,ρ⟩_V⟨W,W⟩_V)^{1/2} against each tangent direction.
pub fn orthogonality_check(rho: &Field, bub: &Bubble, params: &CknParams) -> Result<Vec<f64>> {
    let basis = tangent_basis(bub, params, rho)?;
    let v = v_field(bub, params, rho)?;
    residuals_against(rho, &v, &basis.fields, params)
}

fn residuals_against(rho: &Field, v: &Field, basis: &[Field], params: &CknParams) -> Result<Vec<f64>> {
    let rr = v_pairing(rho, rho, v, params)?;
    basis
        .iter()
        .map(|w| {
            if rr == 0.0 {
                return Ok(0.0);
            }
            let rw = v_pairing(rho, w, v, params)?;
            let ww = v_pairing(w, w, v, params)?;
            Ok(rw / (rr * ww).sqrt())
        })
        .collect()
}

/// μ = ∫|x|^{-qb}|V|^{q-2}V u / ∫|x|^{-qb}|V|^q, ρ = u − μV, with tangent residuals.
pub fn mu_rho_decompose(u: &Field, bub: &Bubble, params: &CknParams) -> Result<DecompositionRecord> {
    if bub.amplitude == 0.0 {
        return Err(CknError::ZeroField("decomposition bubble"));
    }
    let v = v_field(bub, params, u)?;
    let num = v_pairing(&v, u, &v, params)?;
    let den = weighted_lq_norm(&v, params)?;
    let mu = num / den;
    let rho = Field::combine(&[(1.0, u), (-mu, &v)])?;
    let basis = tangent_basis(bub, params, &rho)?;
    let tangent_residuals = residuals_against(&rho, &v, &basis.fields, params)?;
    let distance_estimate = if rho.is_zero() { 0.0 } else { d_norm(&rho, params)? };
    Ok(DecompositionRecord {
        v: *bub,
        mu,
        rho,
        tangent_residuals,
        tangent_labels: basis.labels,
        distance_estimate,
        unrepresented_directions: basis.unrepresented,
    })
}

/// Gram–Schmidt of f against the tangent space at V in the ⟨·,·⟩_V pairing.
pub fn orthogonalize(f: &Field, bub: &Bubble, params: &CknParams) -> Result<Field> {
    let basis = tangent_basis(bub, params, f)?;
    let v = v_field(bub, params, f)?;
    let mut ortho: Vec<Field> = Vec::new();
    for w in &basis.fields {
        let mut w = w.clone();
        for e in &ortho {
            let c = v_pairing(&w, e, &v, params)? / v_pairing(e, e, &v, params)?;
            w = w.add_scaled(-c, e)?;
        }
        ortho.push(w);
    }
    let mut out = f.clone();
    // two passes keep the residual at rounding level
    for _ in 0..2 {
        for e in &ortho {
            let c = v_pairing(&out, e, &v, params)? / v_pairing(e, e, &v, params)?;
            out = out.add_scaled(-c, e)?;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bubble::default_grid;
    use crate::field::{AnalyticShape, RadialProfile};
    use crate::params::derive_params;

    fn bump(params: &CknParams, grid: &crate::grid::GridRef, center: f64) -> Field {
        Field::Radial(RadialProfile::from_shape(
            grid.clone(),
            AnalyticShape::LogGaussian {
                amplitude: 0.3 * Bubble::canonical(params, 1.0).unwrap().amplitude,
                center,
                width: 0.5,
            },
        ))
    }

    #[test]
    fn distance_of_bubbles_vanishes() {
        let prm = derive_params(4, 2.5, 0.2, 0.5).unwrap();
        let g = default_grid(&prm);
        let b = Bubble::canonical(&prm, 1.7).unwrap();
        let u = b.field(&prm, &g, None).unwrap();
        let (d, found) = manifold_distance(&u, &prm).unwrap();
        assert!(d < 1e-6, "{d}");
        assert!((found.scale - b.scale).abs() < 1e-4 * b.scale);
        assert!((found.amplitude - b.amplitude).abs() < 1e-4 * b.amplitude);
        let (d, _) = manifold_distance(&u.scaled(1.1), &prm).unwrap();
        assert!(d < 1e-6);
    }

    #[test]
    fn distance_is_bounded_by_the_perturbation() {
        let prm = derive_params(3, 2.0, 0.0, 0.0).unwrap();
        let g = default_grid(&prm);
        let v = Bubble::canonical(&prm, 1.0).unwrap().field(&prm, &g, None).unwrap();
        let z = bump(&prm, &g, 0.5);
        let eps = 1e-2;
        let u = v.add_scaled(eps, &z).unwrap();
        let (d, _) = manifold_distance(&u, &prm).unwrap();
        assert!(d <= eps * d_norm(&z, &prm).unwrap() + 1e-6);
        assert!(d > 0.0);
    }

    #[test]
    fn pu_recovers_scale() {
        let prm = derive_params(4, 3.0, 0.2, 0.4).unwrap();
        let g = default_grid(&prm);
        let b = Bubble::canonical(&prm, 2.3).unwrap();
        let u = b.field(&prm, &g, None).unwrap();
        let pu = select_pu(&u, &prm).unwrap();
        assert!((pu.scale - 2.3).abs() < 1e-4 * 2.3);
        let pu3 = select_pu(&u.scaled(3.0), &prm).unwrap();
        assert!((pu3.scale - 2.3).abs() < 1e-4 * 2.3);
    }

    #[test]
    fn decomposition_identities() {
        let prm = derive_params(4, 3.0, 0.2, 0.4).unwrap();
        let g = default_grid(&prm);
        let b = Bubble::canonical(&prm, 1.0).unwrap();
        let v = b.field(&prm, &g, None).unwrap();
        let rec = mu_rho_decompose(&v.scaled(2.0), &b, &prm).unwrap();
        assert!((rec.mu - 2.0).abs() < 1e-12);
        assert!(rec.rho.values().iter().all(|x| x.abs() < 1e-12 * b.amplitude));
        assert_eq!(rec.tangent_residuals.len(), 2);
        let w = orthogonalize(&bump(&prm, &g, 0.3), &b, &prm).unwrap();
        let eps = 1e-2;
        let rec = mu_rho_decompose(&v.add_scaled(eps, &w).unwrap(), &b, &prm).unwrap();
        assert!((rec.mu - 1.0).abs() < 1e-10);
        for (r, e) in rec.rho.values().iter().zip(w.values()) {
            assert!((r - eps * e).abs() < 1e-10 * b.amplitude);
        }
        let res = orthogonality_check(&v, &b, &prm).unwrap();
        assert!((res[0] - 1.0).abs() < 1e-12);
        let zero = v.scaled(0.0);
        assert!(orthogonality_check(&zero, &b, &prm).unwrap().iter().all(|r| *r == 0.0));
    }

    #[test]
    fn pu_makes_rho_tangent_orthogonal() {
        let prm = derive_params(4, 2.5, 0.2, 0.5).unwrap();
        let g = default_grid(&prm);
        let b = Bubble::canonical(&prm, 1.0).unwrap();
        let v = b.field(&prm, &g, None).unwrap();
        let u = v.add_scaled(1e-2, &bump(&prm, &g, 0.8)).unwrap();
        let pu = select_pu(&u, &prm).unwrap();
        assert!(pu.scale.ln().abs() <= 0.1);
        let rec = mu_rho_decompose(&u, &pu, &prm).unwrap();
        assert!(rec.tangent_residuals.iter().all(|r| r.abs() <= 1e-4), "{:?}", rec.tangent_residuals);
    }
}
