//! Log-radial grids: composite Gauss–Legendre panels in t with r = eᵗ, and the
//! angular Gauss rule for the polar angle ψ of axisymmetric fields.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{CknError, Result};
use crate::params::CknParams;
use crate::quadrature::{gauss_gegenbauer, gauss_legendre};
use crate::special::sphere_area;

/// Nodes per Gauss–Legendre panel.
pub const PANEL_ORDER: usize = 8;
/// Default node density in t (2048 nodes over the default width 60).
pub const DEFAULT_DENSITY: f64 = 2048.0 / 60.0;
/// Default number of polar-angle nodes.
pub const DEFAULT_ANGULAR: usize = 128;

/// Identifies a grid: its base construction plus the chain of t-rescalings
/// applied by change-of-variable maps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub t_min: f64,
    pub t_max: f64,
    pub count: usize,
    #[serde(default)]
    pub rescalings: Vec<f64>,
}

/// Quadrature grid for ∫₀^∞ g(r) dr under r = eᵗ.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialGrid {
    spec: GridSpec,
    t: Vec<f64>,
    t_weights: Vec<f64>,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

/// Builds a composite Gauss–Legendre grid with `count / 8` panels on [t_min, t_max].
pub fn make_radial_grid(t_min: f64, t_max: f64, count: usize) -> Result<RadialGrid> {
    RadialGrid::new(t_min, t_max, count)
}

impl RadialGrid {
    pub fn new(t_min: f64, t_max: f64, count: usize) -> Result<Self> {
        if !(t_min.is_finite() && t_max.is_finite()) || t_min >= t_max {
            return Err(CknError::BadGridSpec(format!(
                "need t_min < t_max, got [{t_min}, {t_max}]"
            )));
        }
        if count < 16 {
            return Err(CknError::BadGridSpec(format!("count {count} < 16")));
        }
        if count % PANEL_ORDER != 0 {
            return Err(CknError::BadGridSpec(format!(
                "count {count} is not a multiple of the panel order {PANEL_ORDER}"
            )));
        }
        let rule = gauss_legendre(PANEL_ORDER);
        let panels = count / PANEL_ORDER;
        let width = (t_max - t_min) / panels as f64;
        let mut t = Vec::with_capacity(count);
        let mut t_weights = Vec::with_capacity(count);
        for k in 0..panels {
            let lo = t_min + width * k as f64;
            let mid = lo + 0.5 * width;
            for (x, w) in rule.nodes.iter().zip(&rule.weights) {
                t.push(mid + 0.5 * width * x);
                t_weights.push(0.5 * width * w);
            }
        }
        let nodes: Vec<f64> = t.iter().map(|t| t.exp()).collect();
        let weights = t_weights.iter().zip(&nodes).map(|(w, r)| w * r).collect();
        Ok(RadialGrid {
            spec: GridSpec {
                t_min,
                t_max,
                count,
                rescalings: Vec::new(),
            },
            t,
            t_weights,
            nodes,
            weights,
        })
    }

    /// Rebuilds a grid from its spec, replaying rescalings in order.
    pub fn from_spec(spec: &GridSpec) -> Result<Self> {
        let mut g = RadialGrid::new(spec.t_min, spec.t_max, spec.count)?;
        for &f in &spec.rescalings {
            g = g.rescaled(f);
        }
        Ok(g)
    }

    /// Default grid for a parameter tuple: wide enough that bubble integrands
    /// are below e^{-36} at both ends, at the default node density.
    pub fn for_params(params: &CknParams) -> Self {
        Self::for_params_with_density(params, DEFAULT_DENSITY)
    }

    pub fn for_params_with_density(params: &CknParams, density: f64) -> Self {
        let (t_min, t_max) = default_t_range(params);
        let panels = ((t_max - t_min) * density / PANEL_ORDER as f64).ceil() as usize;
        RadialGrid::new(t_min, t_max, panels.max(2) * PANEL_ORDER).expect("valid default grid")
    }

    /// Same bounds, twice the node count.
    pub fn doubled(&self) -> Result<Self> {
        let mut spec = self.spec.clone();
        spec.count *= 2;
        Self::from_spec(&spec)
    }

    /// Grid whose nodes are t ↦ t · factor, with weights following the
    /// substitution exactly (no re-panelling).
    pub fn rescaled(&self, factor: f64) -> Self {
        assert!(factor > 0.0 && factor.is_finite());
        let t: Vec<f64> = self.t.iter().map(|t| t * factor).collect();
        let t_weights: Vec<f64> = self.t_weights.iter().map(|w| w * factor).collect();
        let nodes: Vec<f64> = t.iter().map(|t| t.exp()).collect();
        let weights = t_weights.iter().zip(&nodes).map(|(w, r)| w * r).collect();
        let mut spec = self.spec.clone();
        spec.rescalings.push(factor);
        RadialGrid {
            spec,
            t,
            t_weights,
            nodes,
            weights,
        }
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Radii, ascending.
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Log-radii.
    pub fn t(&self) -> &[f64] {
        &self.t
    }

    /// Weights for ∫ g(r) dr (Jacobian eᵗ included).
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Weights for ∫ g dt.
    pub fn t_weights(&self) -> &[f64] {
        &self.t_weights
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&r, &w)| w * f(r))
            .sum()
    }

    /// Radial measure weights w_i r_i^{n-1-s}.
    pub fn power_weights(&self, power: f64) -> Vec<f64> {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&r, &w)| w * r.powf(power))
            .collect()
    }

    pub fn same_as(&self, other: &RadialGrid) -> bool {
        std::ptr::eq(self, other) || self.spec == other.spec
    }
}

/// Largest exponent e for which e^e is comfortably finite in f64.
const EXPONENT_LIMIT: f64 = 700.0;

/// |t| bound that keeps every weight rⁿ finite in dimension n.
pub fn representable_t(n: usize) -> f64 {
    EXPONENT_LIMIT / n as f64
}

fn decay_t_range(params: &CknParams) -> (f64, f64) {
    let n = params.n as f64;
    let gap = params.gap();
    let decay = gap / (params.p - 1.0);
    let growth_grad = gap + params.p * params.sigma();
    let growth_q = n - params.b * params.q;
    let growth = growth_grad.min(growth_q);
    (-(36.0 / growth).max(30.0), (36.0 / decay).max(30.0))
}

/// Default t-range for a parameter tuple: bubble integrands fall below e^{-36}
/// at both ends, unless that would need |t| beyond [`representable_t`].
pub fn default_t_range(params: &CknParams) -> (f64, f64) {
    let (lo, hi) = decay_t_range(params);
    let limit = representable_t(params.n);
    (lo.max(-limit), hi.min(limit))
}

/// True when [`default_t_range`] had to cut the e^{-36} range short.
pub fn default_range_truncated(params: &CknParams) -> bool {
    let (lo, hi) = decay_t_range(params);
    let limit = representable_t(params.n);
    lo < -limit || hi > limit
}

/// Gauss rule in the polar angle ψ ∈ [0, π] for the measure
/// |S^{n-2}| sin^{n-2}ψ dψ, so that the weights sum to |S^{n-1}|.
#[derive(Debug, Clone, PartialEq)]
pub struct AngularRule {
    n: usize,
    psi: Vec<f64>,
    cos_psi: Vec<f64>,
    sin_psi: Vec<f64>,
    weights: Vec<f64>,
}

impl AngularRule {
    pub fn new(n: usize, count: usize) -> Result<Self> {
        if n < 2 {
            return Err(CknError::BadGridSpec(format!("dimension {n} < 2")));
        }
        if count < 2 {
            return Err(CknError::BadGridSpec(format!("angular count {count} < 2")));
        }
        let (psi, weights): (Vec<f64>, Vec<f64>) = if n == 2 {
            // |S^0| = 2 and dψ on [0, π]
            let rule = gauss_legendre(count);
            let half = std::f64::consts::FRAC_PI_2;
            rule.nodes
                .iter()
                .zip(&rule.weights)
                .map(|(x, w)| (half * (1.0 + x), 2.0 * half * w))
                .unzip()
        } else {
            // x = cos ψ turns sin^{n-2}ψ dψ into (1 - x²)^{(n-3)/2} dx
            let rule = gauss_gegenbauer(count, (n as f64 - 3.0) / 2.0);
            let lower = sphere_area(n - 1);
            let mut pairs: Vec<(f64, f64)> = rule
                .nodes
                .iter()
                .zip(&rule.weights)
                .map(|(x, w)| (x.clamp(-1.0, 1.0).acos(), lower * w))
                .collect();
            pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
            pairs.into_iter().unzip()
        };
        let cos_psi = psi.iter().map(|p| p.cos()).collect();
        let sin_psi = psi.iter().map(|p| p.sin()).collect();
        Ok(AngularRule {
            n,
            psi,
            cos_psi,
            sin_psi,
            weights,
        })
    }

    pub fn dimension(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.psi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.psi.is_empty()
    }

    pub fn psi(&self) -> &[f64] {
        &self.psi
    }

    pub fn cos_psi(&self) -> &[f64] {
        &self.cos_psi
    }

    pub fn sin_psi(&self) -> &[f64] {
        &self.sin_psi
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

/// Shared handle to a grid.
pub type GridRef = Arc<RadialGrid>;
/// Shared handle to an angular rule.
pub type AngularRef = Arc<AngularRule>;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::derive_params;

    fn gamma3_error(count: usize) -> f64 {
        let g = make_radial_grid(-20.0, 20.0, count).unwrap();
        (g.integrate(|r| r * r * (-r).exp()) - 2.0).abs()
    }

    #[test]
    fn known_integral() {
        let g = make_radial_grid(-20.0, 20.0, 512).unwrap();
        let v = g.integrate(|r| r * r * (-r).exp());
        assert!((v - 2.0).abs() < 1e-10, "{v}");
    }

    #[test]
    fn refinement_order() {
        let e512 = gamma3_error(512);
        let e1024 = gamma3_error(1024);
        assert!(e1024 * 4.0 <= e512 || e512.max(e1024) < 1e-13, "{e512} {e1024}");
        let (e64, e128, e256) = (gamma3_error(64), gamma3_error(128), gamma3_error(256));
        assert!(e64 / e128 >= 4.0, "{e64} {e128}");
        assert!(e128 / e256 >= 4.0, "{e128} {e256}");
    }

    #[test]
    fn bad_specs() {
        assert!(matches!(make_radial_grid(0.0, -1.0, 64), Err(CknError::BadGridSpec(_))));
        assert!(matches!(make_radial_grid(0.0, 1.0, 8), Err(CknError::BadGridSpec(_))));
        assert!(matches!(make_radial_grid(0.0, 1.0, 20), Err(CknError::BadGridSpec(_))));
    }

    #[test]
    fn nodes_and_weights_well_formed() {
        let g = make_radial_grid(-30.0, 30.0, 2048).unwrap();
        assert!(g.nodes().windows(2).all(|w| w[0] < w[1]));
        assert!(g.weights().iter().all(|&w| w > 0.0));
    }

    #[test]
    fn rescale_replays_from_spec() {
        let g = make_radial_grid(-10.0, 10.0, 64).unwrap().rescaled(0.7).rescaled(1.3);
        let h = RadialGrid::from_spec(g.spec()).unwrap();
        assert_eq!(g, h);
    }

    #[test]
    fn angular_rules_integrate_one_to_sphere_area() {
        for n in 2..8 {
            let rule = AngularRule::new(n, 128).unwrap();
            let total: f64 = rule.weights().iter().sum();
            let area = sphere_area(n);
            assert!((total - area).abs() < 1e-10 * area, "n={n}");
        }
    }

    #[test]
    fn default_range_covers_slow_tails() {
        let p = derive_params(4, 3.0, 0.2, 0.4).unwrap();
        let (lo, hi) = default_t_range(&p);
        assert!(lo <= -30.0);
        assert_eq!(hi, representable_t(4));
        assert!(default_range_truncated(&p));
        let g = RadialGrid::for_params(&p);
        assert_eq!(g.len() % PANEL_ORDER, 0);

        let flat = derive_params(3, 2.0, 0.0, 0.0).unwrap();
        let (lo, hi) = default_t_range(&flat);
        assert!(lo <= -30.0 && hi >= 36.0);
        assert!(!default_range_truncated(&flat));
    }

    #[test]
    fn capped_range_keeps_weights_finite() {
        let edge = derive_params(3, 2.6157, 0.11586, 0.5).unwrap();
        assert!(default_range_truncated(&edge));
        let g = RadialGrid::for_params(&edge);
        assert!(g.nodes().iter().all(|&r| r.powi(3).is_finite() && r > 0.0));
    }
}
