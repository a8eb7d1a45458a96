//! Critical-point machinery: Euler–Lagrange residuals and finite-basis
//! lower bounds on their dual norm, the degenerate Hessian form and its
//! spectral gap, the two-sided near-manifold estimates, the residual-versus-
//! distance alternative, and the elementary vector/scalar inequality constants.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bubble::Bubble;
use crate::error::{CknError, Result};
use crate::field::{translated_profile, AnalyticShape, AxisymField, Field, Measure, RadialProfile};
use crate::functionals::{d_distance, d_norm};
use crate::grid::{AngularRule, GridRef};
use crate::manifold::{moment_seed, mu_rho_decompose, orthogonality_check, select_pu};
use crate::optimize::{linear_fit, nelder_mead, NelderMeadOptions};
use crate::params::CknParams;

/// Angular nodes used for D-norms of test combinations (smooth in ψ).
pub const TEST_ANGULAR: usize = 24;
/// Spacing and width (in log r) of the log-Gaussian test lattice.
pub const LATTICE_SPACING: f64 = 1.0;
pub const LATTICE_WIDTH: f64 = 0.7;
/// Random restarts of the dual-norm ascent, perturbing the best point found
/// by up to `RESTART_SPREAD` times its largest coefficient.
pub const DUAL_RESTARTS: usize = 5;
pub const RESTART_SPREAD: f64 = 0.5;
/// Maximum tangent residual accepted by the spectral-gap probe.
pub const ORTHOGONALITY_TOL: f64 = 1e-6;
/// Default near-manifold gate as a fraction of ‖u‖_{D_a^p}.
pub const DEFAULT_GATE: f64 = 0.1;

#[inline]
fn pow_abs(x: f64, e: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x.abs().powf(e)
    }
}

/// Weak Euler–Lagrange residual of u tested with φ:
/// −∫|x|^{-pa}|∇u|^{p-2}∇u·∇φ + ∫|x|^{-qb}|u|^{q-2}uφ.
pub fn el_residual_pairing(u: &Field, phi: &Field, params: &CknParams) -> Result<f64> {
    let m = Measure::for_fields(params.n, &[u, phi])?;
    let (p, q) = (params.p, params.q);
    let flux = m.integrate(p * params.a, |nd| {
        let (a, b) = (u.at(nd.i, nd.j), phi.at(nd.i, nd.j));
        let dot = a.grad_r * b.grad_r + a.grad_ang * b.grad_ang;
        if dot == 0.0 {
            return 0.0;
        }
        pow_abs(a.grad_sq(), 0.5 * (p - 2.0)) * dot
    });
    let source = m.integrate(q * params.b, |nd| {
        let a = u.at(nd.i, nd.j).value;
        pow_abs(a, q - 2.0) * a * phi.at(nd.i, nd.j).value
    });
    Ok(source - flux)
}

/// The residual functional of u reduced to its action on test functions
/// φ₀(r) + φ₁(r)cosψ: angular moments of the flux and the source per radial node,
/// with the radial quadrature weights and the weights |x|^{-pa}, |x|^{-qb} folded in.
#[derive(Debug, Clone)]
pub struct ResidualFunctional {
    grid: GridRef,
    /// ∫_S |∇u|^{p-2}∂_r u, and against cosψ.
    flux_r: [Vec<f64>; 2],
    /// ∫_S |∇u|^{p-2}(r⁻¹∂_ψ u)(−sinψ)/r.
    flux_psi: Vec<f64>,
    /// ∫_S |u|^{q-2}u, and against cosψ.
    source: [Vec<f64>; 2],
    /// Weighted flux (∂_r, r⁻¹∂_ψ) and source at every node of an axisymmetric u.
    full: Option<[Vec<f64>; 3]>,
}

impl ResidualFunctional {
    pub fn new(u: &Field, params: &CknParams) -> Self {
        let grid = u.grid().clone();
        let n = params.n as f64;
        let (p, q) = (params.p, params.q);
        let len = grid.len();
        let mut flux_r = [vec![0.0; len], vec![0.0; len]];
        let mut flux_psi = vec![0.0; len];
        let mut source = [vec![0.0; len], vec![0.0; len]];
        let mut full: Option<[Vec<f64>; 3]> = match u {
            Field::Axisym(f) => Some([vec![0.0; f.values.len()], vec![0.0; f.values.len()], vec![0.0; f.values.len()]]),
            Field::Radial(_) => None,
        };
        let nodes = grid.nodes();
        let w = grid.weights();
        for i in 0..len {
            let r = nodes[i];
            let wg = w[i] * r.powf(n - 1.0 - p * params.a);
            let wq = w[i] * r.powf(n - 1.0 - q * params.b);
            match u {
                Field::Radial(prof) => {
                    let area = crate::special::sphere_area(params.n);
                    let d = prof.derivative[i];
                    flux_r[0][i] = wg * area * pow_abs(d, p - 2.0) * d;
                    let v = prof.values[i];
                    source[0][i] = wq * area * pow_abs(v, q - 2.0) * v;
                }
                Field::Axisym(f) => {
                    let ang = &f.angular;
                    for j in 0..ang.len() {
                        let loc = u.at(i, j);
                        let (c, s, aw) = (ang.cos_psi()[j], ang.sin_psi()[j], ang.weights()[j]);
                        let g = pow_abs(loc.grad_sq(), 0.5 * (p - 2.0));
                        if let Some(full) = full.as_mut() {
                            let idx = f.index(i, j);
                            full[0][idx] = wg * aw * g * loc.grad_r;
                            full[1][idx] = wg * aw * g * loc.grad_ang;
                            full[2][idx] = wq * aw * pow_abs(loc.value, q - 2.0) * loc.value;
                        }
                        let fr = aw * g * loc.grad_r;
                        flux_r[0][i] += wg * fr;
                        flux_r[1][i] += wg * fr * c;
                        flux_psi[i] -= wg * aw * g * loc.grad_ang * s / r;
                        let sv = aw * pow_abs(loc.value, q - 2.0) * loc.value;
                        source[0][i] += wq * sv;
                        source[1][i] += wq * sv * c;
                    }
                }
            }
        }
        ResidualFunctional {
            grid,
            flux_r,
            flux_psi,
            source,
            full,
        }
    }

    /// Action on a test element.
    pub fn apply(&self, t: &TestElement) -> f64 {
        if let (Some(f), Some(full)) = (&t.field, &self.full) {
            let m = f.angular.len();
            let mut acc = 0.0;
            for (i, r) in f.grid.nodes().iter().enumerate() {
                for j in 0..m {
                    let idx = i * m + j;
                    acc += full[2][idx] * f.values[idx] - full[0][idx] * f.grad_r[idx] - full[1][idx] * f.grad_psi[idx] / r;
                }
            }
            return acc;
        }
        let m = t.mode as usize;
        let mut acc = 0.0;
        for i in 0..self.grid.len() {
            acc += self.source[m][i] * t.values[i] - self.flux_r[m][i] * t.derivative[i];
            if m == 1 {
                acc -= self.flux_psi[i] * t.values[i];
            }
        }
        acc
    }
}

/// Angular mode of a test element: φ(r) or φ(r)cosψ.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Radial = 0,
    Axial = 1,
    /// A general axisymmetric element stored on the full grid of u.
    Local = 2,
}

/// A test function φ(r)·(1 or cosψ) sampled on a radial grid, or a general
/// axisymmetric element sampled on the grid of u.
#[derive(Debug, Clone, PartialEq)]
pub struct TestElement {
    pub mode: Mode,
    pub values: Vec<f64>,
    pub derivative: Vec<f64>,
    pub field: Option<Arc<AxisymField>>,
    pub label: String,
}

impl TestElement {
    fn from_shape(grid: &GridRef, shape: &AnalyticShape, mode: Mode, label: String) -> Self {
        let (values, derivative) = grid.nodes().iter().map(|&r| shape.eval(r)).unzip();
        TestElement {
            mode,
            values,
            derivative,
            field: None,
            label,
        }
    }

    fn local(field: AxisymField, label: String) -> Self {
        TestElement {
            mode: Mode::Local,
            values: Vec::new(),
            derivative: Vec::new(),
            field: Some(Arc::new(field)),
            label,
        }
    }

    fn scale(&mut self, s: f64) {
        self.values.iter_mut().for_each(|v| *v *= s);
        self.derivative.iter_mut().for_each(|v| *v *= s);
        if let Some(f) = self.field.as_mut() {
            let f = Arc::make_mut(f);
            for v in f.values.iter_mut().chain(f.grad_r.iter_mut()).chain(f.grad_psi.iter_mut()) {
                *v *= s;
            }
        }
    }

    /// The element as a field (radial, or axisymmetric on the given rule).
    pub fn to_field(&self, grid: &GridRef, angular: Option<&crate::grid::AngularRef>) -> Result<Field> {
        if let Some(f) = &self.field {
            return Ok(Field::Axisym((**f).clone()));
        }
        let prof = RadialProfile::from_parts(grid.clone(), self.values.clone(), self.derivative.clone())?;
        match (self.mode, angular) {
            (Mode::Radial, None) => Ok(Field::Radial(prof)),
            (Mode::Radial, Some(a)) => Ok(Field::Axisym(crate::field::AxisymField::from_radial(&prof, a.clone()))),
            (_, a) => {
                let ang = match a {
                    Some(a) => a.clone(),
                    None => return Err(CknError::GridMismatch("an axial element needs angles".into())),
                };
                let m = ang.len();
                let mut f = crate::field::AxisymField {
                    grid: grid.clone(),
                    angular: ang.clone(),
                    values: Vec::with_capacity(grid.len() * m),
                    grad_r: Vec::with_capacity(grid.len() * m),
                    grad_psi: Vec::with_capacity(grid.len() * m),
                };
                for (v, d) in self.values.iter().zip(&self.derivative) {
                    for j in 0..m {
                        let (c, s) = (ang.cos_psi()[j], ang.sin_psi()[j]);
                        f.values.push(v * c);
                        f.grad_r.push(d * c);
                        f.grad_psi.push(-v * s);
                    }
                }
                Ok(Field::Axisym(f))
            }
        }
    }
}

/// Axial centre and spread of the non-radial part of an axisymmetric u, from
/// the density |∇(u − ū)|^p with ū the spherical average.
fn nonradial_concentration(f: &AxisymField, p: f64) -> Option<(f64, f64)> {
    let m = f.angular.len();
    let ang = &f.angular;
    let total: f64 = ang.weights().iter().sum();
    let (mut mass, mut first, mut second) = (0.0, 0.0, 0.0);
    for (i, (r, w)) in f.grid.nodes().iter().zip(f.grid.weights()).enumerate() {
        let row = i * m..(i + 1) * m;
        let mean_r = f.grad_r[row.clone()].iter().zip(ang.weights()).map(|(g, a)| g * a).sum::<f64>() / total;
        let wr = w * r.powi(f.angular.dimension() as i32 - 1);
        for j in 0..m {
            let idx = i * m + j;
            let gr = f.grad_r[idx] - mean_r;
            let ga = f.grad_psi[idx] / r;
            let d = wr * ang.weights()[j] * pow_abs(gr * gr + ga * ga, 0.5 * p);
            let x1 = r * ang.cos_psi()[j];
            mass += d;
            first += d * x1;
            second += d * r * r;
        }
    }
    if !(mass > 0.0) || !mass.is_finite() {
        return None;
    }
    let center = first / mass;
    let spread_sq = second / mass - center * center;
    let n = f.angular.dimension() as f64;
    (spread_sq > 0.0).then(|| (center, (spread_sq / n).sqrt()))
}

/// Nested test basis for the dual norm: V and the dilation generator at the
/// moment-matched bubble, then log-Gaussian bumps on a lattice around the mean
/// log-radius of u in the order 0, +1, −1, +2, …, skipping bumps that leave the
/// grid. With a = 0 and an axisymmetric u each bump also enters in the cosψ
/// mode, followed by a bubble-shaped element centred where the non-radial part
/// of u concentrates, at scales growing and shrinking by √2.
pub fn test_basis(u: &Field, params: &CknParams, basis_size: usize) -> Result<Vec<TestElement>> {
    let grid = u.grid();
    let seed = moment_seed(u, params)?;
    let seed = Bubble {
        axial_shift: 0.0,
        ..seed.with_canonical_amplitude(params)?
    };
    let center = (1.0 / seed.scale).ln();
    let axial = params.a == 0.0 && !u.is_radial();
    let concentration = match u {
        Field::Axisym(f) if axial => nonradial_concentration(f, params.p).map(|c| (f, c)),
        _ => None,
    };
    let mut out = vec![
        TestElement::from_shape(grid, &seed.shape(params), Mode::Radial, "bubble".into()),
        TestElement::from_shape(grid, &seed.dilation_shape(params), Mode::Radial, "dilation".into()),
    ];
    let (t_lo, t_hi) = (grid.t()[0] + 3.0 * LATTICE_WIDTH, grid.t()[grid.len() - 1] - 3.0 * LATTICE_WIDTH);
    let mut k = 0i64;
    let mut local_k = 0i64;
    let mut misses = 0;
    while out.len() < basis_size {
        let offset = if k == 0 { 0 } else if k % 2 == 1 { (k + 1) / 2 } else { -(k / 2) };
        k += 1;
        let c = center + LATTICE_SPACING * offset as f64;
        let inside = c >= t_lo && c <= t_hi;
        if inside {
            let shape = AnalyticShape::LogGaussian {
                amplitude: 1.0,
                center: c,
                width: LATTICE_WIDTH,
            };
            out.push(TestElement::from_shape(grid, &shape, Mode::Radial, format!("bump{offset:+}")));
            if axial && out.len() < basis_size {
                out.push(TestElement::from_shape(grid, &shape, Mode::Axial, format!("axial{offset:+}")));
            }
        }
        if let Some((f, (x1, spread))) = concentration {
            if out.len() < basis_size {
                let j = if local_k == 0 { 0 } else if local_k % 2 == 1 { (local_k + 1) / 2 } else { -(local_k / 2) };
                local_k += 1;
                let s = spread * 2f64.powf(0.5 * j as f64);
                let prof = RadialProfile::from_shape(
                    grid.clone(),
                    AnalyticShape::Bubble {
                        amplitude: 1.0,
                        b: s.powi(-2),
                        sigma: 2.0,
                        power: 3.0,
                    },
                );
                let field = translated_profile(&prof, -x1, grid.clone(), f.angular.clone());
                out.push(TestElement::local(field, format!("local{j:+}")));
                continue;
            }
        }
        if !inside {
            misses += 1;
            if misses > 4 * basis_size {
                return Err(CknError::BasisTooSmall(out.len()));
            }
        }
    }
    Ok(out)
}

/// Quadrature rows below this fraction of the largest row are dropped.
const NEGLIGIBLE_ROW: f64 = 1e-32;

/// Gradients of the test elements at the norm quadrature nodes, with weights.
struct NormQuadrature {
    p: f64,
    weights: Vec<f64>,
    /// Column k: ∂_r of element k at each node; likewise r⁻¹∂_ψ.
    grad_r: DMatrix<f64>,
    grad_ang: DMatrix<f64>,
}

impl NormQuadrature {
    fn new(basis: &[TestElement], grid: &GridRef, params: &CknParams) -> Result<Self> {
        let n = params.n;
        let p = params.p;
        let axial = basis.iter().any(|t| t.mode != Mode::Radial);
        let full_rule = basis.iter().find_map(|t| t.field.as_ref().map(|f| f.angular.clone()));
        let nodes = grid.nodes();
        let w = grid.weights();
        let radial_w: Vec<f64> = nodes
            .iter()
            .zip(w)
            .map(|(r, w)| w * r.powf(n as f64 - 1.0 - p * params.a))
            .collect();
        if !axial {
            let area = crate::special::sphere_area(n);
            let weights = radial_w.iter().map(|w| w * area).collect();
            let grads = basis
                .iter()
                .map(|t| t.derivative.iter().map(|d| (*d, 0.0)).collect())
                .collect();
            return Ok(NormQuadrature::from_columns(p, weights, grads));
        }
        let ang = match full_rule {
            Some(a) => a,
            None => Arc::new(AngularRule::new(n, TEST_ANGULAR)?),
        };
        let m = ang.len();
        let mut weights = Vec::with_capacity(nodes.len() * m);
        for wr in &radial_w {
            for aw in ang.weights() {
                weights.push(wr * aw);
            }
        }
        let grads = basis
            .iter()
            .map(|t| {
                let mut g = Vec::with_capacity(nodes.len() * m);
                for (i, r) in nodes.iter().enumerate() {
                    for j in 0..m {
                        g.push(match t.mode {
                            Mode::Radial => (t.derivative[i], 0.0),
                            Mode::Axial => (t.derivative[i] * ang.cos_psi()[j], -t.values[i] * ang.sin_psi()[j] / r),
                            Mode::Local => {
                                let f = t.field.as_ref().expect("local element carries its field");
                                let idx = i * m + j;
                                (f.grad_r[idx], f.grad_psi[idx] / r)
                            }
                        });
                    }
                }
                g
            })
            .collect();
        Ok(NormQuadrature::from_columns(p, weights, grads))
    }

    fn from_columns(p: f64, weights: Vec<f64>, grads: Vec<Vec<(f64, f64)>>) -> Self {
        // rows where every element is negligible carry nothing into any norm
        let contribution = |i: usize| {
            grads
                .iter()
                .map(|g| weights[i] * pow_abs(g[i].0 * g[i].0 + g[i].1 * g[i].1, 0.5 * p))
                .fold(0.0f64, f64::max)
        };
        let row_max: Vec<f64> = (0..weights.len()).map(contribution).collect();
        let peak = row_max.iter().fold(0.0f64, |m, v| m.max(*v));
        let keep: Vec<usize> = (0..weights.len()).filter(|&i| row_max[i] > NEGLIGIBLE_ROW * peak).collect();
        let grad_r = DMatrix::from_fn(keep.len(), grads.len(), |i, k| grads[k][keep[i]].0);
        let grad_ang = DMatrix::from_fn(keep.len(), grads.len(), |i, k| grads[k][keep[i]].1);
        NormQuadrature {
            p,
            weights: keep.iter().map(|&i| weights[i]).collect(),
            grad_r,
            grad_ang,
        }
    }

    fn size(&self) -> usize {
        self.grad_r.ncols()
    }

    fn combine(&self, c: &[f64]) -> (DVector<f64>, DVector<f64>) {
        let c = DVector::from_column_slice(c);
        (&self.grad_r * &c, &self.grad_ang * &c)
    }

    fn norm_p(&self, g: &(DVector<f64>, DVector<f64>)) -> f64 {
        g.0.iter()
            .zip(g.1.iter())
            .zip(&self.weights)
            .map(|((a, b), w)| w * pow_abs(a * a + b * b, 0.5 * self.p))
            .sum()
    }
}

/// Lower-bound estimate of the D_a^{-p} norm of the Euler–Lagrange residual,
/// with the value on the first half of the basis for display.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualNormEstimate {
    pub value: f64,
    pub half_value: f64,
    pub basis_size: usize,
    pub coefficients: Vec<f64>,
}

fn lower_bound_from(f: f64, p: f64) -> f64 {
    if f <= 0.0 {
        0.0
    } else {
        (p * f / (p - 1.0)).powf((p - 1.0) / p)
    }
}

/// F(c) = L·c − ‖Σcₖφₖ‖^p/p with its gradient and Hessian.
fn objective_derivatives(l: &[f64], quad: &NormQuadrature, c: &[f64]) -> (f64, DVector<f64>, DMatrix<f64>) {
    let p = quad.p;
    let (gr, ga) = quad.combine(c);
    let rows = quad.weights.len();
    let mut f = l.iter().zip(c).map(|(a, b)| a * b).sum::<f64>();
    // |g|^{p-2}-weighted copies of the element gradients give the Hessian as Gram matrices
    let mut flux_r = DVector::zeros(rows);
    let mut flux_a = DVector::zeros(rows);
    let mut root = DVector::zeros(rows);
    let mut curv = DVector::zeros(rows);
    for i in 0..rows {
        let s = gr[i] * gr[i] + ga[i] * ga[i];
        if s == 0.0 {
            continue;
        }
        let w = quad.weights[i];
        let e = s.powf(0.5 * (p - 2.0));
        f -= w * e * s / p;
        flux_r[i] = w * e * gr[i];
        flux_a[i] = w * e * ga[i];
        root[i] = (w * e).sqrt();
        curv[i] = (w * (p - 2.0) * e / s).sqrt();
    }
    let grad = DVector::from_column_slice(l) - quad.grad_r.tr_mul(&flux_r) - quad.grad_ang.tr_mul(&flux_a);
    let k = quad.size();
    // blocks of rows keep the Gram products in cache
    const BLOCK: usize = 1024;
    let mut hess = DMatrix::zeros(k, k);
    let mut stacked = DMatrix::zeros(3 * BLOCK, k);
    for start in (0..rows).step_by(BLOCK) {
        let len = BLOCK.min(rows - start);
        if len < BLOCK {
            stacked.fill(0.0);
        }
        for c in 0..k {
            for o in 0..len {
                let i = start + o;
                let (dr, da) = (quad.grad_r[(i, c)], quad.grad_ang[(i, c)]);
                stacked[(o, c)] = root[i] * dr;
                stacked[(BLOCK + o, c)] = root[i] * da;
                stacked[(2 * BLOCK + o, c)] = curv[i] * (gr[i] * dr + ga[i] * da);
            }
        }
        let t = stacked.transpose();
        hess.gemm(-1.0, &t, &stacked, 1.0);
    }
    (f, grad, hess)
}

fn objective_value(l: &[f64], quad: &NormQuadrature, c: &[f64]) -> f64 {
    l.iter().zip(c).map(|(a, b)| a * b).sum::<f64>() - quad.norm_p(&quad.combine(c)) / quad.p
}

/// Maximizes the concave F(c) = L·c − ‖Σcₖφₖ‖^p/p by damped Newton steps from
/// `start` (or, when `start` vanishes, from the best single-element optimum).
/// At the maximizer sup L·c/‖Σcₖφₖ‖ = (pF/(p−1))^{(p−1)/p}, and every F(c)
/// bounds that supremum from below through the same expression.
fn ascend(l: &[f64], quad: &NormQuadrature, start: &[f64]) -> (f64, Vec<f64>) {
    let p = quad.p;
    let mut c = start.to_vec();
    if c.iter().all(|v| *v == 0.0) {
        let (k, lk) = l
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.abs().partial_cmp(&b.1.abs()).unwrap())
            .map(|(k, v)| (k, *v))
            .unwrap_or((0, 0.0));
        if lk == 0.0 {
            return (0.0, c);
        }
        // elements have unit norm, so the 1-D optimum is sign(L)|L|^{1/(p-1)}
        c[k] = lk.signum() * lk.abs().powf(1.0 / (p - 1.0));
    }
    let mut f = objective_value(l, quad, &c);
    let mut damping = 1e-14;
    for _ in 0..300 {
        let (f0, grad, hess) = objective_derivatives(l, quad, &c);
        f = f0;
        let scale = (0..c.len()).map(|i| -hess[(i, i)]).fold(0.0f64, f64::max).max(1e-300);
        let mut accepted = false;
        while damping < 1e12 {
            let mut a = -hess.clone();
            for i in 0..c.len() {
                a[(i, i)] += damping * scale;
            }
            let Some(chol) = a.cholesky() else {
                damping *= 10.0;
                continue;
            };
            let step = chol.solve(&grad);
            if step.dot(&grad) <= 1e-10 * f.abs() {
                return (f, c);
            }
            let trial: Vec<f64> = c.iter().zip(step.iter()).map(|(x, d)| x + d).collect();
            let ft = objective_value(l, quad, &trial);
            if ft > f {
                accepted = true;
                let gain = ft - f;
                c = trial;
                f = ft;
                damping = (damping * 0.1).max(1e-15);
                if gain <= 1e-12 * f.abs() {
                    return (f, c);
                }
                break;
            }
            damping *= 10.0;
        }
        if !accepted {
            break;
        }
    }
    (f, c)
}

/// Finite-basis supremum of el_residual_pairing(u, φ)/‖φ‖_{D_a^p}: a lower bound
/// on the dual norm. The full-basis ascent starts from the half-basis solution,
/// then `DUAL_RESTARTS` ChaCha-seeded perturbations of the best point; the best
/// bound is kept.
pub fn dual_norm_estimate(u: &Field, params: &CknParams, basis_size: usize) -> Result<DualNormEstimate> {
    dual_norm_estimate_seeded(u, params, basis_size, 0)
}

pub fn dual_norm_estimate_seeded(u: &Field, params: &CknParams, basis_size: usize, seed: u64) -> Result<DualNormEstimate> {
    if basis_size < 4 {
        return Err(CknError::BasisTooSmall(basis_size));
    }
    if u.is_zero() {
        return Ok(DualNormEstimate {
            value: 0.0,
            half_value: 0.0,
            basis_size,
            coefficients: vec![0.0; basis_size],
        });
    }
    let functional = ResidualFunctional::new(u, params);
    let mut basis = test_basis(u, params, basis_size)?;
    let grid = u.grid().clone();
    // unit D-norm elements keep the ascent well scaled
    {
        let quad = NormQuadrature::new(&basis, &grid, params)?;
        for (k, t) in basis.iter_mut().enumerate() {
            let mut c = vec![0.0; quad.size()];
            c[k] = 1.0;
            let norm = quad.norm_p(&quad.combine(&c)).powf(1.0 / params.p);
            if norm > 0.0 {
                t.scale(1.0 / norm);
            }
        }
    }
    let p = params.p;
    let l: Vec<f64> = basis.iter().map(|t| functional.apply(t)).collect();
    let single = l.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let half = (basis_size / 2).max(1);
    let solve = |size: usize, warm: &[f64]| -> Result<(f64, Vec<f64>)> {
        let quad = NormQuadrature::new(&basis[..size], &grid, params)?;
        let lk = &l[..size];
        let mut start = warm.to_vec();
        start.resize(size, 0.0);
        let (mut best_f, mut best_c) = ascend(lk, &quad, &start);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ size as u64);
        let scale = best_c.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(single.powf(1.0 / (p - 1.0)));
        for _ in 0..DUAL_RESTARTS {
            let s: Vec<f64> = best_c
                .iter()
                .map(|c| c + RESTART_SPREAD * scale * rng.gen_range(-1.0..1.0))
                .collect();
            let (f, c) = ascend(lk, &quad, &s);
            if f > best_f {
                best_f = f;
                best_c = c;
            }
        }
        Ok((best_f, best_c))
    };
    let (f_half, c_half) = solve(half, &[])?;
    let half_value = lower_bound_from(f_half, p).max(l[..half].iter().fold(0.0f64, |m, v| m.max(v.abs())));
    let (f_full, c_full) = solve(basis_size, &c_half)?;
    let value = lower_bound_from(f_full, p).max(single).max(half_value);
    Ok(DualNormEstimate {
        value,
        half_value,
        basis_size,
        coefficients: c_full,
    })
}

/// ∫|x|^{-pa}(|∇V|^{p-2}|∇ρ|² + (p−2)|∇V|^{p-4}(∇V·∇ρ)²).
pub fn hessian_form(v: &Bubble, rho: &Field, params: &CknParams) -> Result<f64> {
    require_p_above_two(params)?;
    let vf = bubble_on(v, params, rho)?;
    let m = Measure::for_fields(params.n, &[rho, &vf])?;
    let p = params.p;
    Ok(m.integrate(p * params.a, |nd| {
        let (a, b) = (vf.at(nd.i, nd.j), rho.at(nd.i, nd.j));
        let s = a.grad_sq();
        if s == 0.0 {
            return 0.0;
        }
        let dot = a.grad_r * b.grad_r + a.grad_ang * b.grad_ang;
        s.powf(0.5 * (p - 2.0)) * b.grad_sq() + (p - 2.0) * s.powf(0.5 * (p - 4.0)) * dot * dot
    }))
}

/// (p−1)|S^{n-1}|∫ r^{n-1-pa}|V'|^{p-2}|ρ'|² dr for radial ρ.
pub fn hessian_form_radial(v: &Bubble, rho: &RadialProfile, params: &CknParams) -> Result<f64> {
    require_p_above_two(params)?;
    if v.axial_shift != 0.0 {
        return Err(CknError::GridMismatch("radial reduction needs a centred bubble".into()));
    }
    let shape = v.shape(params);
    let p = params.p;
    let power = params.n as f64 - 1.0 - p * params.a;
    let nodes = rho.grid.nodes();
    let w = rho.grid.weights();
    let mut acc = 0.0;
    for i in 0..nodes.len() {
        let dv = shape.eval(nodes[i]).1;
        if dv == 0.0 {
            continue;
        }
        acc += w[i] * nodes[i].powf(power) * dv.abs().powf(p - 2.0) * rho.derivative[i] * rho.derivative[i];
    }
    Ok((p - 1.0) * params.sphere_area() * acc)
}

fn require_p_above_two(params: &CknParams) -> Result<()> {
    if params.p > 2.0 {
        Ok(())
    } else {
        Err(CknError::region(format!("needs p > 2 (got p = {})", params.p)))
    }
}

fn bubble_on(v: &Bubble, params: &CknParams, like: &Field) -> Result<Field> {
    match like.angular() {
        Some(a) => v.field(params, like.grid(), Some(a)),
        None if v.axial_shift == 0.0 => v.field(params, like.grid(), None),
        None => {
            let a = Arc::new(AngularRule::new(params.n, crate::grid::DEFAULT_ANGULAR)?);
            v.field(params, like.grid(), Some(&a))
        }
    }
}

/// Hessian form against (q−1)∫|x|^{-qb}|V|^{q-2}ρ².
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralReport {
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
    pub tau_estimate: f64,
}

pub fn spectral_gap_ratio(v: &Bubble, rho: &Field, params: &CknParams) -> Result<SpectralReport> {
    require_p_above_two(params)?;
    if rho.is_zero() {
        return Err(CknError::ZeroField("spectral gap"));
    }
    let residuals = orthogonality_check(rho, v, params)?;
    let worst = residuals.iter().fold(0.0f64, |m, r| m.max(r.abs()));
    if worst > ORTHOGONALITY_TOL {
        return Err(CknError::NotOrthogonal(worst));
    }
    let lhs = hessian_form(v, rho, params)?;
    let vf = bubble_on(v, params, rho)?;
    let q = params.q;
    let m = Measure::for_fields(params.n, &[rho, &vf])?;
    let rhs = (q - 1.0)
        * m.integrate(q * params.b, |nd| {
            let b = rho.at(nd.i, nd.j).value;
            pow_abs(vf.at(nd.i, nd.j).value, q - 2.0) * b * b
        });
    let ratio = lhs / rhs;
    Ok(SpectralReport {
        lhs,
        rhs,
        ratio,
        tau_estimate: ratio - 1.0,
    })
}

/// Computable pieces of the two-sided near-manifold estimates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Thm5Quantities {
    /// Lower-bound estimate of the residual's dual norm.
    pub residual_pairing_norm: f64,
    /// The same times ‖ρ‖_{D_a^p}.
    pub residual_times_rho: f64,
    /// ∫|x|^{-pa}|∇V|^{p-2}|∇ρ|².
    pub q: f64,
    /// ‖ρ‖_{D_a^p}^p.
    pub n: f64,
    pub mu: f64,
    pub distance_gate: f64,
    pub distance: f64,
    pub bubble: Bubble,
}

/// Default test-basis size for residual estimates.
pub const DEFAULT_BASIS: usize = 16;

pub fn thm5_quantities(u: &Field, params: &CknParams) -> Result<Thm5Quantities> {
    thm5_quantities_with(u, params, DEFAULT_GATE, DEFAULT_BASIS)
}

/// P_u, then (μ, ρ), then the residual estimate, Q and N. The gate compares
/// ‖u − V‖ for V = P_u with `gate`·‖u‖.
pub fn thm5_quantities_with(u: &Field, params: &CknParams, gate: f64, basis_size: usize) -> Result<Thm5Quantities> {
    require_p_above_two(params)?;
    let norm = d_norm(u, params)?;
    let bubble = select_pu(u, params)?;
    let vf = bubble_on(&bubble, params, u)?;
    let distance = d_distance(u, &vf, params)?;
    let distance_gate = gate * norm;
    if distance > distance_gate {
        return Err(CknError::FarFromManifold {
            distance,
            gate: distance_gate,
        });
    }
    let dec = mu_rho_decompose(u, &bubble, params)?;
    let rho = &dec.rho;
    let p = params.p;
    let (q, n_term, rho_norm) = if rho.is_zero() {
        (0.0, 0.0, 0.0)
    } else {
        let m = Measure::for_fields(params.n, &[rho, &vf])?;
        let q = m.integrate(p * params.a, |nd| {
            pow_abs(vf.at(nd.i, nd.j).grad_sq(), 0.5 * (p - 2.0)) * rho.at(nd.i, nd.j).grad_sq()
        });
        let rn = d_norm(rho, params)?;
        (q, rn.powf(p), rn)
    };
    let residual = dual_norm_estimate(u, params, basis_size)?.value;
    Ok(Thm5Quantities {
        residual_pairing_norm: residual,
        residual_times_rho: residual * rho_norm,
        q,
        n: n_term,
        mu: dec.mu,
        distance_gate,
        distance,
        bubble,
    })
}

/// Which side of the residual-versus-distance alternative was examined.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "branch", rename_all = "snake_case")]
pub enum AlternativeBranch {
    /// ρ = 0: both estimates hold trivially.
    Degenerate,
    /// A_u outside [c₁/2C₁, 2C₁/c₁]: κ = residual/‖u − V‖^{p-1}.
    Uniform { kappa: f64, residual: f64, distance: f64 },
    /// A_u inside: the same ratio along u_t = tu + (1−t)V, t ∈ (0, η].
    Interpolated {
        eta: f64,
        t: Vec<f64>,
        kappa: Vec<f64>,
        kappa_min: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlternativeReport {
    pub a_u: f64,
    pub interval: (f64, f64),
    pub eta: f64,
    pub branch: AlternativeBranch,
}

/// η = (c₁/(2C₁))^{2/(p−2)}.
pub fn eta(params: &CknParams, c1: f64, big_c1: f64) -> Result<f64> {
    require_p_above_two(params)?;
    if !(c1 > 0.0 && big_c1 > 0.0) {
        return Err(CknError::InvariantViolation("c1 and C1 must be positive".into()));
    }
    Ok((c1 / (2.0 * big_c1)).powf(2.0 / (params.p - 2.0)))
}

/// Number of interpolation points checked on (0, η].
pub const ETA_GRID: usize = 6;

pub fn alternative_check(u: &Field, params: &CknParams, c1: f64, big_c1: f64) -> Result<AlternativeReport> {
    let eta = eta(params, c1, big_c1)?;
    let interval = (c1 / (2.0 * big_c1), 2.0 * big_c1 / c1);
    let th = thm5_quantities(u, params)?;
    if th.n == 0.0 {
        return Ok(AlternativeReport {
            a_u: f64::NAN,
            interval,
            eta,
            branch: AlternativeBranch::Degenerate,
        });
    }
    let a_u = th.n / th.q;
    let p = params.p;
    let vf = bubble_on(&th.bubble, params, u)?;
    let branch = if a_u < interval.0 || a_u > interval.1 {
        let distance = d_distance(u, &vf, params)?;
        AlternativeBranch::Uniform {
            kappa: th.residual_pairing_norm / distance.powf(p - 1.0),
            residual: th.residual_pairing_norm,
            distance,
        }
    } else {
        let t: Vec<f64> = (1..=ETA_GRID).map(|i| eta * i as f64 / ETA_GRID as f64).collect();
        let kappa = t
            .par_iter()
            .map(|&t| {
                let ut = Field::combine(&[(t, u), (1.0 - t, &vf)])?;
                let res = dual_norm_estimate(&ut, params, DEFAULT_BASIS)?.value;
                Ok(res / d_distance(&ut, &vf, params)?.powf(p - 1.0))
            })
            .collect::<Result<Vec<f64>>>()?;
        let kappa_min = kappa.iter().cloned().fold(f64::INFINITY, f64::min);
        AlternativeBranch::Interpolated {
            eta,
            t,
            kappa,
            kappa_min,
        }
    };
    Ok(AlternativeReport {
        a_u,
        interval,
        eta,
        branch,
    })
}

/// Log-log slopes of Q, N and residual×‖ρ‖ against ε for V + εζ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Thm5Sweep {
    pub eps: Vec<f64>,
    pub q: Vec<f64>,
    pub n: Vec<f64>,
    pub residual_times_rho: Vec<f64>,
    pub q_slope: f64,
    pub n_slope: f64,
    pub residual_slope: f64,
}

pub fn thm5_sweep(params: &CknParams, eps: &[f64], perturbation: &Field, basis_size: usize) -> Result<Thm5Sweep> {
    if eps.len() < 2 {
        return Err(CknError::DegenerateFit("need at least two ε values".into()));
    }
    let v = bubble_on(&Bubble::canonical(params, 1.0)?, params, perturbation)?;
    let rows = eps
        .par_iter()
        .map(|e| thm5_quantities_with(&v.add_scaled(*e, perturbation)?, params, DEFAULT_GATE, basis_size))
        .collect::<Result<Vec<_>>>()?;
    let le: Vec<f64> = eps.iter().map(|e| e.ln()).collect();
    let col = |f: &dyn Fn(&Thm5Quantities) -> f64| rows.iter().map(f).collect::<Vec<f64>>();
    let (q, n, r) = (col(&|t| t.q), col(&|t| t.n), col(&|t| t.residual_times_rho));
    let slope = |y: &[f64]| linear_fit(&le, &y.iter().map(|v| v.ln()).collect::<Vec<_>>()).0;
    Ok(Thm5Sweep {
        q_slope: slope(&q),
        n_slope: slope(&n),
        residual_slope: slope(&r),
        eps: eps.to_vec(),
        q,
        n,
        residual_times_rho: r,
    })
}

/// Residual dual-norm estimate against ‖u − V‖ along V + εζ, with V = P_u.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualSlope {
    pub eps: Vec<f64>,
    pub distance: Vec<f64>,
    pub residual: Vec<f64>,
    pub slope: f64,
}

pub fn residual_distance_slope(
    params: &CknParams,
    eps: &[f64],
    perturbation: &Field,
    basis_size: usize,
) -> Result<ResidualSlope> {
    if eps.len() < 2 {
        return Err(CknError::DegenerateFit("need at least two ε values".into()));
    }
    let v = bubble_on(&Bubble::canonical(params, 1.0)?, params, perturbation)?;
    let rows = eps
        .par_iter()
        .map(|e| {
            let u = v.add_scaled(*e, perturbation)?;
            let bub = select_pu(&u, params)?;
            let vf = bubble_on(&bub, params, &u)?;
            let d = d_distance(&u, &vf, params)?;
            let r = dual_norm_estimate(&u, params, basis_size)?.value;
            Ok((d, r))
        })
        .collect::<Result<Vec<_>>>()?;
    let (distance, residual): (Vec<f64>, Vec<f64>) = rows.into_iter().unzip();
    let lx: Vec<f64> = distance.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = residual.iter().map(|v| v.ln()).collect();
    Ok(ResidualSlope {
        slope: linear_fit(&lx, &ly).0,
        eps: eps.to_vec(),
        distance,
        residual,
    })
}

/// (1+s)^β − 1, accurate for small s.
fn pow1p_m1(s: f64, beta: f64) -> f64 {
    (beta * s.ln_1p()).exp_m1()
}

/// (1+s)^β − 1 − βs without cancellation for small s.
fn pow1p_tail(s: f64, beta: f64) -> f64 {
    if s.abs() >= 0.1 {
        return pow1p_m1(s, beta) - beta * s;
    }
    let mut term = beta * (beta - 1.0) / 2.0 * s * s;
    let mut sum = 0.0;
    for k in 2..80 {
        sum += term;
        if term.abs() <= 1e-18 * sum.abs() {
            break;
        }
        term *= (beta - k as f64) / (k as f64 + 1.0) * s;
    }
    sum
}

fn dot(u: [f64; 2], v: [f64; 2]) -> f64 {
    u[0] * v[0] + u[1] * v[1]
}

/// |x+y|^{e-2}(x+y)·y − |x|^{e-2}(x+y)·y − (e−2)|x|^{e-4}(x·y)².
fn lhs_12(e: f64, x: [f64; 2], y: [f64; 2]) -> f64 {
    let (xx, xy, yy) = (dot(x, x), dot(x, y), dot(y, y));
    let sy = xy + yy;
    if xx == 0.0 {
        return pow_abs((yy).sqrt(), e - 2.0) * sy;
    }
    let s = (2.0 * xy + yy) / xx;
    let xe = xx.powf(0.5 * (e - 2.0));
    if s.abs() < 0.5 {
        let alpha = 0.5 * (e - 2.0);
        xe * (pow1p_tail(s, alpha) * sy + (e - 2.0) * xy * yy / xx + alpha * yy * sy / xx)
    } else {
        let ss = xx + 2.0 * xy + yy;
        pow_abs(ss.max(0.0).sqrt(), e - 2.0) * sy - xe * sy - (e - 2.0) * xe * xy * xy / xx
    }
}

/// |x+y|^{e-2}(x+y)·y − |y|^e − |x|^{e-2}x·y.
fn lhs_34(e: f64, x: [f64; 2], y: [f64; 2]) -> f64 {
    let (xx, xy, yy) = (dot(x, x), dot(x, y), dot(y, y));
    let alpha = 0.5 * (e - 2.0);
    if yy == 0.0 {
        return 0.0;
    }
    if xx == 0.0 {
        return 0.0;
    }
    if yy <= xx {
        let s = (2.0 * xy + yy) / xx;
        let xe = xx.powf(alpha);
        let m = pow1p_m1(s, alpha);
        xe * (m * xy + (1.0 + m) * yy) - yy.powf(0.5 * e)
    } else {
        let s = (2.0 * xy + xx) / yy;
        let ye = yy.powf(alpha);
        let m = pow1p_m1(s, alpha);
        ye * (m * yy + (1.0 + m) * xy) - xx.powf(alpha) * xy
    }
}

/// (a+b)|a+b|^{e-2} − a|a|^{e-2} − (e−1)|a|^{e-2}b.
fn lhs_56(e: f64, a: f64, b: f64) -> f64 {
    if a == 0.0 {
        return b * pow_abs(b, e - 2.0);
    }
    if b.abs() <= 0.5 * a.abs() {
        a.signum() * a.abs().powf(e - 1.0) * pow1p_tail(b / a, e - 1.0)
    } else {
        let s = a + b;
        s * pow_abs(s, e - 2.0) - a * pow_abs(a, e - 2.0) - (e - 1.0) * pow_abs(a, e - 2.0) * b
    }
}

/// The six elementary inequalities, as (case, exponent) with vectors x, y in
/// the plane (cases 1–4) or scalars a = x[0], b = y[0] (cases 5–6): LHS/RHS,
/// and 0 where both vanish.
pub fn elementary_ratio(case: u8, e: f64, x: [f64; 2], y: [f64; 2]) -> f64 {
    let nx = dot(x, x).sqrt();
    let ny = dot(y, y).sqrt();
    let (lhs, rhs) = match case {
        1 => (lhs_12(e, x, y).abs(), ny.powf(e)),
        2 => (lhs_12(e, x, y).abs(), ny.powf(e) + pow_abs(nx, e - 3.0) * ny.powi(3)),
        3 => (lhs_34(e, x, y).abs(), pow_abs(nx, e - 2.0) * ny * ny),
        4 => (
            lhs_34(e, x, y).abs(),
            pow_abs(nx, e - 2.0) * ny * ny + nx * ny.powf(e - 1.0),
        ),
        5 => (lhs_56(e, x[0], y[0]).abs(), pow_abs(y[0], e - 1.0)),
        _ => (
            lhs_56(e, x[0], y[0]).abs(),
            pow_abs(y[0], e - 1.0) + pow_abs(x[0], e - 3.0) * y[0] * y[0],
        ),
    };
    if rhs == 0.0 {
        0.0
    } else {
        lhs / rhs
    }
}

fn check_case(case: u8, e: f64) -> Result<()> {
    let (ok, range) = match case {
        1 | 3 => (e > 2.0 && e <= 3.0, "2 < p <= 3"),
        2 | 4 => (e > 3.0, "p > 3"),
        5 => (e > 2.0 && e <= 3.0, "2 < q <= 3"),
        6 => (e > 3.0, "q > 3"),
        _ => (false, "case in 1..=6"),
    };
    if ok {
        Ok(())
    } else {
        Err(CknError::CaseRangeViolation { case, range, value: e })
    }
}

/// Empirical constant of one elementary inequality.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElementaryEstimate {
    pub case: u8,
    pub exponent: f64,
    pub c: f64,
    /// Best value on the grid before local refinement.
    pub grid_c: f64,
    /// |y| (or |b|) and the angle at the maximum.
    pub rho: f64,
    pub theta: f64,
    pub samples: usize,
}

const LOG_RANGE: f64 = 6.0;

/// sup LHS/RHS with |x| = 1 (or a = 1): |y| on logspace[−6, 6] with `samples`
/// points and the angle on [0, π] with `samples` points (b = ±|y| for the
/// scalar cases), followed by a Nelder–Mead refinement from the best grid
/// point, confined to the same ranges.
pub fn elementary_c_estimate(case: u8, exponent: f64, samples: usize) -> Result<ElementaryEstimate> {
    check_case(case, exponent)?;
    let samples = samples.max(2);
    let scalar = case >= 5;
    let lr = LOG_RANGE * std::f64::consts::LN_10;
    let at = |log_rho: f64, theta: f64| -> f64 {
        let rho = log_rho.clamp(-lr, lr).exp();
        if scalar {
            let b = if theta < 0.5 * std::f64::consts::PI { rho } else { -rho };
            elementary_ratio(case, exponent, [1.0, 0.0], [b, 0.0])
        } else {
            let th = theta.clamp(0.0, std::f64::consts::PI);
            elementary_ratio(case, exponent, [1.0, 0.0], [rho * th.cos(), rho * th.sin()])
        }
    };
    let thetas: Vec<f64> = if scalar {
        vec![0.0, std::f64::consts::PI]
    } else {
        (0..samples)
            .map(|j| std::f64::consts::PI * j as f64 / (samples - 1) as f64)
            .collect()
    };
    let mut best = (f64::NEG_INFINITY, 0.0, 0.0);
    for i in 0..samples {
        let lrho = -lr + 2.0 * lr * i as f64 / (samples - 1) as f64;
        for &th in &thetas {
            let v = at(lrho, th);
            if v > best.0 {
                best = (v, lrho, th);
            }
        }
    }
    let grid_c = best.0;
    let (c, lrho, theta) = if scalar {
        let th = best.2;
        let (x, f) = crate::optimize::golden_section(
            |l| -at(l, th),
            (best.1 - 4.0 * lr / samples as f64).max(-lr),
            (best.1 + 4.0 * lr / samples as f64).min(lr),
            1e-12,
        );
        if -f > grid_c {
            (-f, x, th)
        } else {
            best
        }
    } else {
        let m = nelder_mead(
            |v| -at(v[0], v[1]),
            &[best.1, best.2],
            &[2.0 * lr / samples as f64, std::f64::consts::PI / samples as f64],
            NelderMeadOptions {
                max_evals: 4000,
                f_tol: 1e-15,
                f_floor: 1e-300,
                x_tol: 1e-12,
            },
        );
        if -m.f > grid_c {
            (-m.f, m.x[0].clamp(-lr, lr), m.x[1].clamp(0.0, std::f64::consts::PI))
        } else {
            best
        }
    };
    Ok(ElementaryEstimate {
        case,
        exponent,
        c,
        grid_c,
        rho: lrho.exp(),
        theta,
        samples,
    })
}

/// Ratio at the estimate's maximizer with |x| scaled to `scale`: equal to the
/// estimate by joint homogeneity.
pub fn elementary_ratio_scaled(est: &ElementaryEstimate, scale: f64) -> f64 {
    let (x, y) = if est.case >= 5 {
        let b = if est.theta < 0.5 * std::f64::consts::PI { est.rho } else { -est.rho };
        ([scale, 0.0], [scale * b, 0.0])
    } else {
        ([scale, 0.0], [scale * est.rho * est.theta.cos(), scale * est.rho * est.theta.sin()])
    };
    elementary_ratio(est.case, est.exponent, x, y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bubble::default_grid;
    use crate::functionals::weighted_lq_norm;
    use crate::manifold::orthogonalize;
    use crate::params::derive_params;

    fn bump(grid: &GridRef, center: f64) -> Field {
        Field::Radial(RadialProfile::from_shape(
            grid.clone(),
            AnalyticShape::LogGaussian {
                amplitude: 1.0,
                center,
                width: 0.6,
            },
        ))
    }

    #[test]
    fn bubble_solves_weak_equation() {
        let prm = derive_params(4, 3.0, 0.2, 0.4).unwrap();
        let g = default_grid(&prm);
        let v = Bubble::canonical(&prm, 1.0).unwrap().field(&prm, &g, None).unwrap();
        for c in [-2.0, 0.0, 1.5] {
            let phi = bump(&g, c);
            let r = el_residual_pairing(&v, &phi, &prm).unwrap();
            assert!(r.abs() <= 1e-5 * d_norm(&phi, &prm).unwrap(), "{r}");
        }
        let est = dual_norm_estimate(&v, &prm, 8).unwrap();
        assert!(est.value <= 1e-5, "{est:?}");
    }

    #[test]
    fn fast_functional_matches_general_pairing() {
        let prm = derive_params(3, 2.5, 0.0, 0.3).unwrap();
        let g = default_grid(&prm);
        let u = Bubble::canonical(&prm, 1.0)
            .unwrap()
            .field(&prm, &g, None)
            .unwrap()
            .add_scaled(0.3, &bump(&g, 0.5))
            .unwrap();
        let f = ResidualFunctional::new(&u, &prm);
        let basis = test_basis(&u, &prm, 6).unwrap();
        for t in &basis {
            let phi = t.to_field(&g, None).unwrap();
            let a = f.apply(t);
            let b = el_residual_pairing(&u, &phi, &prm).unwrap();
            assert!((a - b).abs() <= 1e-12 * a.abs().max(1e-12), "{a} {b}");
        }
    }

    #[test]
    fn scaled_bubble_pairing_bound() {
        let prm = derive_params(4, 3.0, 0.2, 0.4).unwrap();
        let g = default_grid(&prm);
        let v = Bubble::canonical(&prm, 1.0).unwrap().field(&prm, &g, None).unwrap();
        let mu: f64 = 1.2;
        let u = v.scaled(mu);
        let expect = (mu.powf(prm.p - 1.0) - mu.powf(prm.q - 1.0)).abs() * weighted_lq_norm(&v, &prm).unwrap()
            / d_norm(&v, &prm).unwrap();
        let est = dual_norm_estimate(&u, &prm, 8).unwrap();
        assert!(est.value >= expect * (1.0 - 1e-8), "{} < {expect}", est.value);
        let bigger = dual_norm_estimate(&u, &prm, 16).unwrap();
        assert!(bigger.value >= est.value);
        assert!(matches!(dual_norm_estimate(&u, &prm, 3), Err(CknError::BasisTooSmall(3))));
    }

    #[test]
    fn hessian_paths_agree_and_gap_exceeds_one() {
        let prm = derive_params(4, 3.0, 0.2, 0.4).unwrap();
        let g = default_grid(&prm);
        let bub = Bubble::canonical(&prm, 1.0).unwrap();
        let rho = orthogonalize(&bump(&g, 0.3), &bub, &prm).unwrap();
        let general = hessian_form(&bub, &rho, &prm).unwrap();
        let reduced = hessian_form_radial(&bub, rho.as_radial().unwrap(), &prm).unwrap();
        assert!((general - reduced).abs() <= 1e-10 * general);
        let rep = spectral_gap_ratio(&bub, &rho, &prm).unwrap();
        assert!(rep.ratio > 1.0, "{rep:?}");
        let rep2 = spectral_gap_ratio(&bub, &rho.scaled(3.0), &prm).unwrap();
        assert!((rep.ratio - rep2.ratio).abs() <= 1e-12 * rep.ratio);
        assert!(matches!(
            spectral_gap_ratio(&bub, &bump(&g, 0.3), &prm),
            Err(CknError::NotOrthogonal(_))
        ));
    }

    #[test]
    fn eta_arithmetic_and_p_two_rejected() {
        let prm = derive_params(5, 4.0, 0.0, 0.0).unwrap();
        assert!((eta(&prm, 1.0, 2.0).unwrap() - 0.25).abs() < 1e-15);
        let p2 = derive_params(3, 2.0, 0.0, 0.0).unwrap();
        let g = default_grid(&p2);
        let v = Bubble::canonical(&p2, 1.0).unwrap().field(&p2, &g, None).unwrap();
        assert!(matches!(thm5_quantities(&v, &p2), Err(CknError::RegionViolation(_))));
    }

    #[test]
    fn elementary_basics() {
        assert_eq!(elementary_ratio(5, 3.0, [1.0, 0.0], [1.0, 0.0]), 1.0);
        for case in 1..=6u8 {
            let e = if matches!(case, 1 | 3 | 5) { 2.5 } else { 3.5 };
            assert_eq!(elementary_ratio(case, e, [1.0, 0.0], [0.0, 0.0]), 0.0);
        }
        let est = elementary_c_estimate(1, 2.5, 200).unwrap();
        assert!(est.c >= est.grid_c && est.c.is_finite());
        let scaled = elementary_ratio_scaled(&est, 7.0);
        assert!((scaled - est.c).abs() <= 1e-10 * est.c);
        assert!(matches!(
            elementary_c_estimate(2, 2.5, 10),
            Err(CknError::CaseRangeViolation { case: 2, .. })
        ));
    }
}
