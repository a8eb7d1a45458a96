//! Sampled functions of ℝⁿ: radial profiles on a log-radial grid and
//! axisymmetric fields on a (r, ψ) product grid, both carrying gradient data.
//!
//! Axisymmetric fields store the angular derivative ∂_ψ u, so the physical
//! gradient is (∂_r u, r⁻¹ ∂_ψ u) and |∇_θ u|² = (∂_ψ u)².

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{CknError, Result};
use crate::grid::{AngularRef, AngularRule, GridRef, RadialGrid};
use crate::params::CknParams;

/// Closed-form radial shapes that can be evaluated at any radius.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum AnalyticShape {
    /// A (1 + B r^σ)^{-β}.
    Bubble {
        amplitude: f64,
        b: f64,
        sigma: f64,
        power: f64,
    },
    /// d/dλ|_{λ=1} λ^w · Bubble(λr) = w·f(r) + r f'(r) for the bubble f above.
    BubbleDilation {
        amplitude: f64,
        b: f64,
        sigma: f64,
        power: f64,
        weight: f64,
    },
    /// A exp(-(ln r − c)² / (2w²)).
    LogGaussian { amplitude: f64, center: f64, width: f64 },
    /// Σ cᵢ shapeᵢ.
    Combination(Vec<(f64, AnalyticShape)>),
}

/// ln(1 + x) and x/(1 + x) for x = exp(lx), without overflow.
fn log1p_exp(lx: f64) -> (f64, f64) {
    if lx > 0.0 {
        let e = (-lx).exp();
        (lx + e.ln_1p(), 1.0 / (1.0 + e))
    } else {
        let e = lx.exp();
        (e.ln_1p(), e / (1.0 + e))
    }
}

impl AnalyticShape {
    /// Value, first and second radial derivative at r > 0.
    pub fn eval2(&self, r: f64) -> (f64, f64, f64) {
        match *self {
            AnalyticShape::Bubble {
                b, sigma, power, ..
            } => {
                let (v, dv) = self.eval(r);
                let (_, frac) = log1p_exp(b.ln() + sigma * r.ln());
                let d2 = dv / r * (sigma - 1.0 - (power + 1.0) * sigma * frac);
                (v, dv, d2)
            }
            AnalyticShape::LogGaussian { width, center, .. } => {
                let (v, dv) = self.eval(r);
                let z = (r.ln() - center) / width;
                // v' = -v z/(w r); v'' = -(v' z + v/(w r))/(w r) + v z/(w r²)
                let d2 = -(dv * z + v / (width * r)) / (width * r) + v * z / (width * r * r);
                (v, dv, d2)
            }
            AnalyticShape::Combination(ref terms) => terms.iter().fold((0.0, 0.0, 0.0), |acc, (c, s)| {
                let (v, d, d2) = s.eval2(r);
                (acc.0 + c * v, acc.1 + c * d, acc.2 + c * d2)
            }),
            AnalyticShape::BubbleDilation { .. } => {
                let h = r * 1e-5;
                let (v, d) = self.eval(r);
                let d2 = (self.eval(r + h).1 - self.eval(r - h).1) / (2.0 * h);
                (v, d, d2)
            }
        }
    }

    /// The shape of r ↦ scale · f(r^e).
    pub fn power_mapped(&self, e: f64, scale: f64) -> AnalyticShape {
        match *self {
            AnalyticShape::Bubble {
                amplitude,
                b,
                sigma,
                power,
            } => AnalyticShape::Bubble {
                amplitude: amplitude * scale,
                b,
                sigma: sigma * e,
                power,
            },
            AnalyticShape::BubbleDilation {
                amplitude,
                b,
                sigma,
                power,
                weight,
            } => AnalyticShape::Combination(vec![(
                scale,
                AnalyticShape::BubbleDilation {
                    amplitude,
                    b,
                    sigma: sigma * e,
                    power,
                    weight,
                },
            )]),
            AnalyticShape::LogGaussian {
                amplitude,
                center,
                width,
            } => AnalyticShape::LogGaussian {
                amplitude: amplitude * scale,
                center: center / e,
                width: width / e,
            },
            AnalyticShape::Combination(ref terms) => AnalyticShape::Combination(
                terms.iter().map(|(c, s)| (c * scale, s.power_mapped(e, 1.0))).collect(),
            ),
        }
    }

    /// Value and radial derivative at r > 0.
    pub fn eval(&self, r: f64) -> (f64, f64) {
        match *self {
            AnalyticShape::BubbleDilation {
                amplitude,
                b,
                sigma,
                power,
                weight,
            } => {
                if amplitude == 0.0 {
                    return (0.0, 0.0);
                }
                let (l1p, frac) = log1p_exp(b.ln() + sigma * r.ln());
                // f = A(1+x)^{-β}, r f' = -βσ frac f, with frac = x/(1+x)
                let f = amplitude * (-power * l1p).exp();
                let g = weight - power * sigma * frac;
                // d/dr (g f) = g' f + g f', g' = -βσ frac(1-frac) σ / r
                let dfrac = frac * (1.0 - frac) * sigma / r;
                let df = -power * sigma * frac * f / r;
                (g * f, -power * sigma * dfrac * f + g * df)
            }
            AnalyticShape::Bubble {
                amplitude,
                b,
                sigma,
                power,
            } => {
                if amplitude == 0.0 {
                    return (0.0, 0.0);
                }
                let (l1p, frac) = log1p_exp(b.ln() + sigma * r.ln());
                let v = amplitude * (-power * l1p).exp();
                let dv = -power * sigma * frac * v / r;
                (v, dv)
            }
            AnalyticShape::LogGaussian {
                amplitude,
                center,
                width,
            } => {
                let z = (r.ln() - center) / width;
                let v = amplitude * (-0.5 * z * z).exp();
                (v, -v * z / (width * r))
            }
            AnalyticShape::Combination(ref terms) => terms.iter().fold((0.0, 0.0), |acc, (c, s)| {
                let (v, d) = s.eval(r);
                (acc.0 + c * v, acc.1 + c * d)
            }),
        }
    }

    pub fn scaled(&self, c: f64) -> AnalyticShape {
        AnalyticShape::Combination(vec![(c, self.clone())])
    }
}

/// Radial samples with their r-derivative.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialProfile {
    pub grid: GridRef,
    pub values: Vec<f64>,
    pub derivative: Vec<f64>,
    pub analytic: Option<AnalyticShape>,
}

impl RadialProfile {
    /// Samples a closed-form shape with its analytic derivative.
    pub fn from_shape(grid: GridRef, shape: AnalyticShape) -> Self {
        let (values, derivative) = grid.nodes().iter().map(|&r| shape.eval(r)).unzip();
        RadialProfile {
            grid,
            values,
            derivative,
            analytic: Some(shape),
        }
    }

    /// Wraps raw samples; the derivative comes from centered 3-point differences in t.
    pub fn from_values(grid: GridRef, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(CknError::GridMismatch(format!(
                "{} values for {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(CknError::InvariantViolation("non-finite profile value".into()));
        }
        let derivative = finite_difference(&grid, &values);
        Ok(RadialProfile {
            grid,
            values,
            derivative,
            analytic: None,
        })
    }

    /// Samples with explicitly supplied derivative.
    pub fn from_parts(grid: GridRef, values: Vec<f64>, derivative: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() || derivative.len() != grid.len() {
            return Err(CknError::GridMismatch("length mismatch".into()));
        }
        Ok(RadialProfile {
            grid,
            values,
            derivative,
            analytic: None,
        })
    }

    pub fn zero(grid: GridRef) -> Self {
        let n = grid.len();
        RadialProfile {
            grid,
            values: vec![0.0; n],
            derivative: vec![0.0; n],
            analytic: None,
        }
    }

    /// Value and derivative at an arbitrary radius: closed form when available,
    /// otherwise monotone cubic interpolation in t.
    pub fn eval_at(&self, r: f64) -> (f64, f64) {
        if let Some(shape) = &self.analytic {
            return shape.eval(r);
        }
        let t = self.grid.t();
        let lt = r.ln();
        (pchip(t, &self.values, lt), pchip(t, &self.derivative, lt))
    }
}

/// Centered 3-point derivative in t on a non-uniform node set, converted to d/dr.
pub fn finite_difference(grid: &RadialGrid, values: &[f64]) -> Vec<f64> {
    let t = grid.t();
    let r = grid.nodes();
    let n = t.len();
    let mut out = vec![0.0; n];
    let three_point = |i0: usize, i1: usize, i2: usize, at: usize| -> f64 {
        // Lagrange derivative through (t_i0, t_i1, t_i2) evaluated at t_at
        let (x0, x1, x2) = (t[i0], t[i1], t[i2]);
        let x = t[at];
        let l0 = ((x - x1) + (x - x2)) / ((x0 - x1) * (x0 - x2));
        let l1 = ((x - x0) + (x - x2)) / ((x1 - x0) * (x1 - x2));
        let l2 = ((x - x0) + (x - x1)) / ((x2 - x0) * (x2 - x1));
        let c = values[at];
        l0 * (values[i0] - c) + l1 * (values[i1] - c) + l2 * (values[i2] - c)
    };
    for i in 0..n {
        let d = if i == 0 {
            three_point(0, 1, 2, 0)
        } else if i == n - 1 {
            three_point(n - 3, n - 2, n - 1, n - 1)
        } else {
            three_point(i - 1, i, i + 1, i)
        };
        out[i] = d / r[i];
    }
    out
}

/// Fritsch–Carlson monotone cubic interpolation; constant extrapolation.
pub fn pchip(x: &[f64], y: &[f64], at: f64) -> f64 {
    let n = x.len();
    if at <= x[0] {
        return y[0];
    }
    if at >= x[n - 1] {
        return y[n - 1];
    }
    let k = match x.binary_search_by(|v| v.partial_cmp(&at).unwrap()) {
        Ok(i) => return y[i],
        Err(i) => i - 1,
    };
    let slope = |i: usize| (y[i + 1] - y[i]) / (x[i + 1] - x[i]);
    let tangent = |i: usize| -> f64 {
        if i == 0 {
            return slope(0);
        }
        if i == n - 1 {
            return slope(n - 2);
        }
        let (d0, d1) = (slope(i - 1), slope(i));
        if d0 * d1 <= 0.0 {
            return 0.0;
        }
        let (h0, h1) = (x[i] - x[i - 1], x[i + 1] - x[i]);
        let w1 = 2.0 * h1 + h0;
        let w2 = h1 + 2.0 * h0;
        (w1 + w2) / (w1 / d0 + w2 / d1)
    };
    let h = x[k + 1] - x[k];
    let s = (at - x[k]) / h;
    let (m0, m1) = (tangent(k), tangent(k + 1));
    let h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
    let h10 = s * (1.0 - s) * (1.0 - s);
    let h01 = s * s * (3.0 - 2.0 * s);
    let h11 = s * s * (s - 1.0);
    h00 * y[k] + h10 * h * m0 + h01 * y[k + 1] + h11 * h * m1
}

/// Samples on the (r, ψ) product grid, row-major in r.
#[derive(Debug, Clone, PartialEq)]
pub struct AxisymField {
    pub grid: GridRef,
    pub angular: AngularRef,
    pub values: Vec<f64>,
    pub grad_r: Vec<f64>,
    /// ∂_ψ u (not divided by r).
    pub grad_psi: Vec<f64>,
}

impl AxisymField {
    /// Builds a field from a closure returning (u, ∂_r u, ∂_ψ u) at (r, ψ).
    pub fn from_fn(
        grid: GridRef,
        angular: AngularRef,
        f: impl Fn(f64, f64) -> (f64, f64, f64),
    ) -> Self {
        let m = angular.len();
        let total = grid.len() * m;
        let mut values = Vec::with_capacity(total);
        let mut grad_r = Vec::with_capacity(total);
        let mut grad_psi = Vec::with_capacity(total);
        for &r in grid.nodes() {
            for &psi in angular.psi() {
                let (v, gr, gp) = f(r, psi);
                values.push(v);
                grad_r.push(gr);
                grad_psi.push(gp);
            }
        }
        AxisymField {
            grid,
            angular,
            values,
            grad_r,
            grad_psi,
        }
    }

    /// Embeds a radial profile (∂_ψ u ≡ 0).
    pub fn from_radial(profile: &RadialProfile, angular: AngularRef) -> Self {
        let m = angular.len();
        let mut values = Vec::with_capacity(profile.values.len() * m);
        let mut grad_r = Vec::with_capacity(profile.values.len() * m);
        for (v, d) in profile.values.iter().zip(&profile.derivative) {
            for _ in 0..m {
                values.push(*v);
                grad_r.push(*d);
            }
        }
        let grad_psi = vec![0.0; values.len()];
        AxisymField {
            grid: profile.grid.clone(),
            angular,
            values,
            grad_r,
            grad_psi,
        }
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.angular.len() + j
    }
}

/// A sampled function: radial or axisymmetric.
#[derive(Debug, Clone, PartialEq)]
pub enum Field {
    Radial(RadialProfile),
    Axisym(AxisymField),
}

/// Pointwise data of a field at one quadrature node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Local {
    pub value: f64,
    pub grad_r: f64,
    /// Physical angular gradient component r⁻¹ ∂_ψ u.
    pub grad_ang: f64,
}

impl Local {
    pub fn grad_sq(&self) -> f64 {
        self.grad_r * self.grad_r + self.grad_ang * self.grad_ang
    }
}

impl From<RadialProfile> for Field {
    fn from(p: RadialProfile) -> Self {
        Field::Radial(p)
    }
}

impl From<AxisymField> for Field {
    fn from(p: AxisymField) -> Self {
        Field::Axisym(p)
    }
}

impl Field {
    pub fn grid(&self) -> &GridRef {
        match self {
            Field::Radial(p) => &p.grid,
            Field::Axisym(f) => &f.grid,
        }
    }

    pub fn angular(&self) -> Option<&AngularRef> {
        match self {
            Field::Radial(_) => None,
            Field::Axisym(f) => Some(&f.angular),
        }
    }

    pub fn is_radial(&self) -> bool {
        matches!(self, Field::Radial(_))
    }

    pub fn as_radial(&self) -> Option<&RadialProfile> {
        match self {
            Field::Radial(p) => Some(p),
            Field::Axisym(_) => None,
        }
    }

    pub fn values(&self) -> &[f64] {
        match self {
            Field::Radial(p) => &p.values,
            Field::Axisym(f) => &f.values,
        }
    }

    /// Data at radial node i, angular node j (j ignored for radial fields).
    #[inline]
    pub fn at(&self, i: usize, j: usize) -> Local {
        match self {
            Field::Radial(p) => Local {
                value: p.values[i],
                grad_r: p.derivative[i],
                grad_ang: 0.0,
            },
            Field::Axisym(f) => {
                let idx = f.index(i, j);
                Local {
                    value: f.values[idx],
                    grad_r: f.grad_r[idx],
                    grad_ang: f.grad_psi[idx] / f.grid.nodes()[i],
                }
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        self.values().iter().all(|&v| v == 0.0)
    }

    pub fn has_gradient(&self) -> bool {
        match self {
            Field::Radial(p) => p.derivative.len() == p.values.len(),
            Field::Axisym(f) => f.grad_r.len() == f.values.len() && f.grad_psi.len() == f.values.len(),
        }
    }

    /// Promotes to an axisymmetric field on the given angular rule.
    pub fn to_axisym(&self, angular: &AngularRef) -> Result<AxisymField> {
        match self {
            Field::Radial(p) => Ok(AxisymField::from_radial(p, angular.clone())),
            Field::Axisym(f) => {
                if f.angular.as_ref() != angular.as_ref() {
                    return Err(CknError::GridMismatch("angular rules differ".into()));
                }
                Ok(f.clone())
            }
        }
    }

    pub fn scaled(&self, c: f64) -> Field {
        match self {
            Field::Radial(p) => Field::Radial(RadialProfile {
                grid: p.grid.clone(),
                values: p.values.iter().map(|v| c * v).collect(),
                derivative: p.derivative.iter().map(|v| c * v).collect(),
                analytic: p.analytic.as_ref().map(|s| s.scaled(c)),
            }),
            Field::Axisym(f) => Field::Axisym(AxisymField {
                grid: f.grid.clone(),
                angular: f.angular.clone(),
                values: f.values.iter().map(|v| c * v).collect(),
                grad_r: f.grad_r.iter().map(|v| c * v).collect(),
                grad_psi: f.grad_psi.iter().map(|v| c * v).collect(),
            }),
        }
    }

    /// Σ cᵢ fᵢ over fields sharing one radial grid; the result is axisymmetric
    /// as soon as one term is.
    pub fn combine(terms: &[(f64, &Field)]) -> Result<Field> {
        let (_, first) = terms
            .first()
            .ok_or_else(|| CknError::GridMismatch("empty combination".into()))?;
        let grid = first.grid().clone();
        let mut angular: Option<AngularRef> = None;
        for (_, f) in terms {
            if !f.grid().same_as(&grid) {
                return Err(CknError::GridMismatch("radial grids differ".into()));
            }
            if let Some(a) = f.angular() {
                match &angular {
                    None => angular = Some(a.clone()),
                    Some(b) if b.as_ref() != a.as_ref() => {
                        return Err(CknError::GridMismatch("angular rules differ".into()))
                    }
                    _ => {}
                }
            }
        }
        match angular {
            None => {
                let n = grid.len();
                let mut values = vec![0.0; n];
                let mut derivative = vec![0.0; n];
                let mut shapes = Vec::new();
                let mut all_analytic = true;
                for (c, f) in terms {
                    let p = f.as_radial().expect("radial");
                    for i in 0..n {
                        values[i] += c * p.values[i];
                        derivative[i] += c * p.derivative[i];
                    }
                    match &p.analytic {
                        Some(s) => shapes.push((*c, s.clone())),
                        None => all_analytic = false,
                    }
                }
                Ok(Field::Radial(RadialProfile {
                    grid,
                    values,
                    derivative,
                    analytic: all_analytic.then_some(AnalyticShape::Combination(shapes)),
                }))
            }
            Some(angular) => {
                let m = angular.len();
                let total = grid.len() * m;
                let mut out = AxisymField {
                    grid: grid.clone(),
                    angular: angular.clone(),
                    values: vec![0.0; total],
                    grad_r: vec![0.0; total],
                    grad_psi: vec![0.0; total],
                };
                for (c, f) in terms {
                    match f {
                        Field::Radial(p) => {
                            for i in 0..grid.len() {
                                for j in 0..m {
                                    let idx = i * m + j;
                                    out.values[idx] += c * p.values[i];
                                    out.grad_r[idx] += c * p.derivative[i];
                                }
                            }
                        }
                        Field::Axisym(a) => {
                            for idx in 0..total {
                                out.values[idx] += c * a.values[idx];
                                out.grad_r[idx] += c * a.grad_r[idx];
                                out.grad_psi[idx] += c * a.grad_psi[idx];
                            }
                        }
                    }
                }
                Ok(Field::Axisym(out))
            }
        }
    }

    pub fn sub(&self, other: &Field) -> Result<Field> {
        Field::combine(&[(1.0, self), (-1.0, other)])
    }

    pub fn add_scaled(&self, c: f64, other: &Field) -> Result<Field> {
        Field::combine(&[(1.0, self), (c, other)])
    }

    /// Multiplies pointwise by a radial cutoff χ(r), updating gradients by the product rule.
    pub fn times_radial(&self, chi: impl Fn(f64) -> (f64, f64)) -> Field {
        match self {
            Field::Radial(p) => {
                let mut values = Vec::with_capacity(p.values.len());
                let mut derivative = Vec::with_capacity(p.values.len());
                for ((&r, &v), &d) in p.grid.nodes().iter().zip(&p.values).zip(&p.derivative) {
                    let (c, dc) = chi(r);
                    values.push(v * c);
                    derivative.push(d * c + v * dc);
                }
                Field::Radial(RadialProfile {
                    grid: p.grid.clone(),
                    values,
                    derivative,
                    analytic: None,
                })
            }
            Field::Axisym(f) => {
                let m = f.angular.len();
                let mut out = f.clone();
                for (i, &r) in f.grid.nodes().iter().enumerate() {
                    let (c, dc) = chi(r);
                    for j in 0..m {
                        let idx = i * m + j;
                        out.values[idx] = f.values[idx] * c;
                        out.grad_r[idx] = f.grad_r[idx] * c + f.values[idx] * dc;
                        out.grad_psi[idx] = f.grad_psi[idx] * c;
                    }
                }
                Field::Axisym(out)
            }
        }
    }
}

/// Quadrature over ℝⁿ for one or more fields sharing a grid.
#[derive(Debug, Clone)]
pub struct Measure {
    n: usize,
    grid: GridRef,
    angular: Option<AngularRef>,
}

/// Location of a quadrature node.
#[derive(Debug, Clone, Copy)]
pub struct Node {
    pub i: usize,
    pub j: usize,
    pub r: f64,
    pub cos_psi: f64,
    pub sin_psi: f64,
}

impl Measure {
    pub fn radial(n: usize, grid: GridRef) -> Self {
        Measure {
            n,
            grid,
            angular: None,
        }
    }

    pub fn axisym(grid: GridRef, angular: AngularRef) -> Self {
        Measure {
            n: angular.dimension(),
            grid,
            angular: Some(angular),
        }
    }

    /// Common measure for a set of fields in dimension n.
    pub fn for_fields(n: usize, fields: &[&Field]) -> Result<Self> {
        let first = fields
            .first()
            .ok_or_else(|| CknError::GridMismatch("no fields".into()))?;
        let grid = first.grid().clone();
        let mut angular: Option<AngularRef> = None;
        for f in fields {
            if !f.grid().same_as(&grid) {
                return Err(CknError::GridMismatch(format!(
                    "grid {:?} vs {:?}",
                    f.grid().spec(),
                    grid.spec()
                )));
            }
            if let Some(a) = f.angular() {
                if a.dimension() != n {
                    return Err(CknError::GridMismatch(format!(
                        "angular rule built for n = {} used with n = {n}",
                        a.dimension()
                    )));
                }
                match &angular {
                    None => angular = Some(a.clone()),
                    Some(b) if b.as_ref() != a.as_ref() => {
                        return Err(CknError::GridMismatch("angular rules differ".into()))
                    }
                    _ => {}
                }
            }
        }
        Ok(Measure { n, grid, angular })
    }

    pub fn dimension(&self) -> usize {
        self.n
    }

    pub fn grid(&self) -> &GridRef {
        &self.grid
    }

    pub fn angular(&self) -> Option<&AngularRef> {
        self.angular.as_ref()
    }

    /// ∫_{ℝⁿ} |x|^{-s} f(x) dx with f evaluated per node.
    pub fn integrate(&self, s: f64, f: impl Fn(Node) -> f64) -> f64 {
        let power = self.n as f64 - 1.0 - s;
        let nodes = self.grid.nodes();
        let weights = self.grid.weights();
        match &self.angular {
            None => {
                let area = crate::special::sphere_area(self.n);
                let mut acc = 0.0;
                for i in 0..nodes.len() {
                    let r = nodes[i];
                    let val = f(Node {
                        i,
                        j: 0,
                        r,
                        cos_psi: 0.0,
                        sin_psi: 0.0,
                    });
                    if val != 0.0 {
                        acc += weights[i] * r.powf(power) * val;
                    }
                }
                acc * area
            }
            Some(ang) => {
                let cw = ang.weights();
                let cos = ang.cos_psi();
                let sin = ang.sin_psi();
                let mut acc = 0.0;
                for i in 0..nodes.len() {
                    let r = nodes[i];
                    let mut inner = 0.0;
                    for j in 0..cw.len() {
                        let val = f(Node {
                            i,
                            j,
                            r,
                            cos_psi: cos[j],
                            sin_psi: sin[j],
                        });
                        inner += cw[j] * val;
                    }
                    if inner != 0.0 {
                        acc += weights[i] * r.powf(power) * inner;
                    }
                }
                acc
            }
        }
    }

    /// Visits every node with its full measure weight |x|^{-s} dx (for level sets).
    pub fn for_each_weighted(&self, s: f64, mut f: impl FnMut(Node, f64)) {
        let power = self.n as f64 - 1.0 - s;
        let nodes = self.grid.nodes();
        let weights = self.grid.weights();
        match &self.angular {
            None => {
                let area = crate::special::sphere_area(self.n);
                for i in 0..nodes.len() {
                    let r = nodes[i];
                    f(
                        Node {
                            i,
                            j: 0,
                            r,
                            cos_psi: 0.0,
                            sin_psi: 0.0,
                        },
                        weights[i] * r.powf(power) * area,
                    );
                }
            }
            Some(ang) => {
                for i in 0..nodes.len() {
                    let r = nodes[i];
                    let wr = weights[i] * r.powf(power);
                    for j in 0..ang.len() {
                        f(
                            Node {
                                i,
                                j,
                                r,
                                cos_psi: ang.cos_psi()[j],
                                sin_psi: ang.sin_psi()[j],
                            },
                            wr * ang.weights()[j],
                        );
                    }
                }
            }
        }
    }
}

/// Translates a radial profile: returns u(x + shift·e₁) on the (r, ψ) grid.
/// Only meaningful for a = 0, where the extremal manifold is translation invariant.
pub fn translate_axisym(
    profile: &RadialProfile,
    shift: f64,
    params: &CknParams,
    angular_count: usize,
) -> Result<AxisymField> {
    if params.a > 0.0 {
        return Err(CknError::TranslationForbidden(params.a));
    }
    let angular = Arc::new(AngularRule::new(params.n, angular_count)?);
    Ok(translated_profile(profile, shift, profile.grid.clone(), angular))
}

/// u(x + shift·e₁) for a radial profile u, sampled on an arbitrary (r, ψ) grid.
pub fn translated_profile(
    profile: &RadialProfile,
    shift: f64,
    grid: GridRef,
    angular: AngularRef,
) -> AxisymField {
    if shift == 0.0 && grid.same_as(&profile.grid) {
        return AxisymField::from_radial(profile, angular);
    }
    AxisymField::from_fn(grid, angular, |r, psi| {
        let (c, s) = (psi.cos(), psi.sin());
        let dist_sq = r * r + 2.0 * r * shift * c + shift * shift;
        let dist = dist_sq.max(0.0).sqrt();
        if dist == 0.0 {
            let (v, _) = profile.eval_at(f64::MIN_POSITIVE);
            return (v, 0.0, 0.0);
        }
        let (v, dv) = profile.eval_at(dist);
        let gr = dv * (r + shift * c) / dist;
        let gpsi = -dv * r * shift * s / dist;
        (v, gr, gpsi)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_radial_grid;
    use crate::params::derive_params;
    use crate::special::sphere_area;

    fn grid() -> GridRef {
        Arc::new(make_radial_grid(-20.0, 20.0, 1024).unwrap())
    }

    #[test]
    fn constant_profile_has_zero_derivative() {
        let g = grid();
        let p = RadialProfile::from_values(g.clone(), vec![3.7; g.len()]).unwrap();
        assert!(p.derivative.iter().all(|d| d.abs() < 1e-12));
    }

    #[test]
    fn finite_difference_second_order() {
        let shape = AnalyticShape::LogGaussian {
            amplitude: 1.0,
            center: 0.3,
            width: 0.8,
        };
        let err = |count: usize| {
            let g = Arc::new(make_radial_grid(-6.0, 6.0, count).unwrap());
            let exact = RadialProfile::from_shape(g.clone(), shape.clone());
            let fd = RadialProfile::from_values(g.clone(), exact.values.clone()).unwrap();
            exact
                .derivative
                .iter()
                .zip(&fd.derivative)
                .zip(g.nodes())
                .map(|((a, b), r)| ((a - b) * r).abs())
                .fold(0.0, f64::max)
        };
        let (e1, e2) = (err(256), err(512));
        assert!(e1 / e2 > 3.0, "{e1} {e2}");
    }

    #[test]
    fn embedded_radial_field_matches_radial_integral() {
        let g = grid();
        let shape = AnalyticShape::LogGaussian {
            amplitude: 2.0,
            center: 0.0,
            width: 1.0,
        };
        let p = RadialProfile::from_shape(g.clone(), shape);
        for n in [3usize, 4, 5] {
            let ang = Arc::new(AngularRule::new(n, 128).unwrap());
            let f = Field::Radial(p.clone());
            let a = Field::Axisym(AxisymField::from_radial(&p, ang));
            assert!(a.at(10, 3).grad_ang.abs() < 1e-10);
            let mr = Measure::for_fields(n, &[&f]).unwrap();
            let ma = Measure::for_fields(n, &[&a]).unwrap();
            let vr = mr.integrate(0.7, |nd| f.at(nd.i, nd.j).value.powi(2));
            let va = ma.integrate(0.7, |nd| a.at(nd.i, nd.j).value.powi(2));
            assert!((vr - va).abs() < 1e-10 * vr.abs());
            let raw: f64 = g
                .nodes()
                .iter()
                .zip(g.weights())
                .zip(&p.values)
                .map(|((r, w), v)| w * r.powf(n as f64 - 1.7) * v * v)
                .sum();
            assert!((vr - raw * sphere_area(n)).abs() < 1e-10 * vr);
        }
    }

    #[test]
    fn pchip_reproduces_nodes_and_is_monotone() {
        let x: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| v * v).collect();
        assert_eq!(pchip(&x, &y, 3.0), 9.0);
        let mut prev = -1.0;
        for k in 0..90 {
            let v = pchip(&x, &y, k as f64 * 0.1);
            assert!(v >= prev);
            prev = v;
        }
    }

    #[test]
    fn translation_rules() {
        let g = grid();
        let p = derive_params(3, 2.0, 0.0, 0.0).unwrap();
        let prof = RadialProfile::from_shape(
            g,
            AnalyticShape::Bubble {
                amplitude: 1.0,
                b: 1.0,
                sigma: 2.0,
                power: 0.5,
            },
        );
        let f = translate_axisym(&prof, 0.0, &p, 64).unwrap();
        assert!(f.grad_psi.iter().all(|g| g.abs() < 1e-10));
        let bad = derive_params(3, 2.0, 0.3, 0.3).unwrap();
        assert!(matches!(
            translate_axisym(&prof, 0.5, &bad, 64),
            Err(CknError::TranslationForbidden(_))
        ));
    }

    #[test]
    fn bubble_shape_derivative_matches_difference_quotient() {
        let s = AnalyticShape::Bubble {
            amplitude: 1.3,
            b: 0.7,
            sigma: 0.6,
            power: 2.5,
        };
        for &r in &[1e-3, 0.5, 3.0, 1e4] {
            let h = r * 1e-6;
            let fd = (s.eval(r + h).0 - s.eval(r - h).0) / (2.0 * h);
            let (_, d) = s.eval(r);
            assert!((fd - d).abs() < 1e-6 * d.abs().max(1e-300), "r={r}");
        }
    }
}
