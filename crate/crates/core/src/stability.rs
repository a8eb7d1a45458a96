//! Stability experiments: deficit-to-distance ratios, empirical upper bounds on
//! the stability constant, exponent slope fits, the hat-map monotonicity chain,
//! the continuity probe, the translated-bubble gap probe and the bounded-domain
//! embedding constants.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bubble::Bubble;
use crate::error::{CknError, Result};
use crate::field::{AnalyticShape, Field, Measure, RadialProfile};
use crate::functionals::{
    ball_measure, d_distance, d_norm, lq_energy, polar_grad_energy, raw_deficit, weak_norm_of,
    weighted_lq_norm,
};
use crate::grid::{AngularRule, GridRef, RadialGrid};
use crate::manifold::{manifold_projection, orthogonalize};
use crate::optimize::{linear_fit, logspace};
use crate::params::{derive_params, sharp_constant, CknParams, HatParams};
use crate::transforms::{hat_map, relative_gap, Direction};

/// Relative distance below which a sample counts as lying on the manifold.
pub const ON_MANIFOLD: f64 = 1e-6;

/// One deficit/distance sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityRecord {
    pub params: CknParams,
    pub alpha: f64,
    pub ratio: f64,
    pub distance: f64,
    pub relative_distance: f64,
    pub deficit: f64,
    pub family_tag: String,
}

/// deficit(u) / (dist(u, M)/‖|x|^{-a}∇u‖_p)^α with α from the exponent rule.
pub fn stability_ratio(u: &Field, params: &CknParams, n_symmetric: bool) -> Result<StabilityRecord> {
    stability_ratio_tagged(u, params, n_symmetric, "single")
}

pub fn stability_ratio_tagged(
    u: &Field,
    params: &CknParams,
    n_symmetric: bool,
    tag: &str,
) -> Result<StabilityRecord> {
    if u.is_zero() {
        return Err(CknError::ZeroField("stability ratio"));
    }
    let norm = d_norm(u, params)?;
    let proj = manifold_projection(u, params)?;
    let relative = proj.distance / norm;
    if relative <= ON_MANIFOLD {
        return Err(CknError::OnManifold {
            distance: proj.distance,
        });
    }
    let alpha = params.stability_exponent(n_symmetric);
    let deficit = raw_deficit(u, params)?;
    let deficit = if deficit < 0.0 && deficit >= -crate::functionals::DEFICIT_CLAMP {
        0.0
    } else {
        deficit
    };
    Ok(StabilityRecord {
        params: *params,
        alpha,
        ratio: deficit / relative.powf(alpha),
        distance: proj.distance,
        relative_distance: relative,
        deficit,
        family_tag: tag.to_string(),
    })
}

/// How the perturbations of a family are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyKind {
    /// V + ε ζ for one log-Gaussian bump ζ, ε on a log grid.
    Bump,
    /// V + ε Σ cⱼ ζⱼ with random coefficients, centres and ε.
    RandomBumps,
    /// Canonical bubbles at assorted scales and amplitudes (all on the manifold).
    Bubbles,
}

/// Declarative generator of test fields around the canonical bubble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilySpec {
    pub kind: FamilyKind,
    /// Log-radius of the bump centre (of the centre window for random bumps).
    #[serde(default)]
    pub center: f64,
    #[serde(default = "default_width")]
    pub width: f64,
    #[serde(default = "default_eps_min")]
    pub eps_min: f64,
    #[serde(default = "default_eps_max")]
    pub eps_max: f64,
    /// Remove the tangent components of ζ before use.
    #[serde(default = "default_true")]
    pub orthogonalize: bool,
    #[serde(default = "default_bumps")]
    pub bumps: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_width() -> f64 {
    0.5
}
fn default_eps_min() -> f64 {
    1e-2
}
fn default_eps_max() -> f64 {
    1e-1
}
fn default_true() -> bool {
    true
}
fn default_bumps() -> usize {
    3
}

impl FamilySpec {
    pub fn bump(center: f64, width: f64, eps_min: f64, eps_max: f64) -> Self {
        FamilySpec {
            kind: FamilyKind::Bump,
            center,
            width,
            eps_min,
            eps_max,
            orthogonalize: true,
            bumps: 1,
            seed: 0,
        }
    }

    pub fn random(seed: u64) -> Self {
        FamilySpec {
            kind: FamilyKind::RandomBumps,
            center: 0.0,
            width: 0.5,
            eps_min: 1e-2,
            eps_max: 1e-1,
            orthogonalize: true,
            bumps: 3,
            seed,
        }
    }

    pub fn tag(&self) -> String {
        format!("{:?}", self.kind).to_lowercase()
    }
}

/// A log-Gaussian bump scaled to the D_a^p norm of the canonical bubble.
pub fn normalized_bump(params: &CknParams, grid: &GridRef, center: f64, width: f64) -> Result<Field> {
    let raw = Field::Radial(RadialProfile::from_shape(
        grid.clone(),
        AnalyticShape::LogGaussian {
            amplitude: 1.0,
            center,
            width,
        },
    ));
    let v = Bubble::canonical(params, 1.0)?.field(params, grid, None)?;
    let scale = d_norm(&v, params)? / d_norm(&raw, params)?;
    Ok(raw.scaled(scale))
}

/// Materializes `count` fields of a family on the default grid for `params`.
pub fn generate_family(spec: &FamilySpec, params: &CknParams, grid: &GridRef, count: usize) -> Result<Vec<Field>> {
    let canon = Bubble::canonical(params, 1.0)?;
    let v = canon.field(params, grid, None)?;
    let prepare = |f: Field| -> Result<Field> {
        if spec.orthogonalize {
            let g = orthogonalize(&f, &canon, params)?;
            let scale = d_norm(&f, params)? / d_norm(&g, params)?;
            Ok(g.scaled(scale))
        } else {
            Ok(f)
        }
    };
    match spec.kind {
        FamilyKind::Bump => {
            let zeta = prepare(normalized_bump(params, grid, spec.center, spec.width)?)?;
            let eps = logspace(spec.eps_min.log10(), spec.eps_max.log10(), count);
            eps.iter().map(|e| v.add_scaled(*e, &zeta)).collect()
        }
        FamilyKind::RandomBumps => {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            let mut out = Vec::with_capacity(count);
            for _ in 0..count {
                let mut acc = Field::Radial(RadialProfile::zero(grid.clone()));
                for _ in 0..spec.bumps.max(1) {
                    let c = spec.center + rng.gen_range(-2.0..2.0);
                    let coef: f64 = rng.gen_range(-1.0..1.0);
                    let b = normalized_bump(params, grid, c, spec.width)?;
                    acc = acc.add_scaled(coef, &b)?;
                }
                let zeta = prepare(acc)?;
                let zn = d_norm(&zeta, params)?;
                let vn = d_norm(&v, params)?;
                let eps = 10f64.powf(rng.gen_range(spec.eps_min.log10()..=spec.eps_max.log10()));
                out.push(v.add_scaled(eps * vn / zn, &zeta)?);
            }
            Ok(out)
        }
        FamilyKind::Bubbles => {
            let scales = logspace(-0.5, 0.5, count);
            scales
                .iter()
                .enumerate()
                .map(|(i, s)| {
                    let b = Bubble::canonical(params, *s)?;
                    Ok(b.field(params, grid, None)?.scaled(1.0 + 0.1 * i as f64))
                })
                .collect()
        }
    }
}

/// Outcome of a family scan: the minimal ratio is an empirical upper bound on K.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanResult {
    pub upper_bound: f64,
    pub argmin: usize,
    pub records: Vec<StabilityRecord>,
    pub excluded: usize,
    /// Set for a = b > 0, p ≠ 2, where the constant may vanish.
    pub caveat_may_vanish: bool,
}

/// Minimum of the stability ratio over a family (on-manifold samples excluded).
pub fn k_upper_scan(spec: &FamilySpec, params: &CknParams, sample_count: usize) -> Result<ScanResult> {
    k_upper_scan_on(spec, params, sample_count, &Arc::new(RadialGrid::for_params(params)), false)
}

pub fn k_upper_scan_on(
    spec: &FamilySpec,
    params: &CknParams,
    sample_count: usize,
    grid: &GridRef,
    n_symmetric: bool,
) -> Result<ScanResult> {
    if sample_count == 0 {
        return Err(CknError::EmptyFamily);
    }
    let fields = generate_family(spec, params, grid, sample_count)?;
    let tag = spec.tag();
    let outcomes: Vec<Result<StabilityRecord>> = fields
        .par_iter()
        .map(|u| stability_ratio_tagged(u, params, n_symmetric, &tag))
        .collect();
    let mut records = Vec::new();
    let mut excluded = 0;
    for o in outcomes {
        match o {
            Ok(r) => records.push(r),
            Err(CknError::OnManifold { .. }) => excluded += 1,
            Err(e) => return Err(e),
        }
    }
    if records.is_empty() {
        return Err(CknError::EmptyFamily);
    }
    let (argmin, best) = records
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.ratio.partial_cmp(&b.1.ratio).unwrap())
        .map(|(i, r)| (i, r.ratio))
        .unwrap();
    Ok(ScanResult {
        upper_bound: best,
        argmin,
        records,
        excluded,
        caveat_may_vanish: params.a > 0.0 && params.a == params.b && params.p != 2.0,
    })
}

/// log deficit against log relative distance for V + ε·perturbation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub eps: Vec<f64>,
    pub relative_distance: Vec<f64>,
    pub deficit: Vec<f64>,
}

/// Least-squares slope of log deficit(V + ε ζ) against log of the relative distance.
pub fn exponent_slope_fit(params: &CknParams, eps_schedule: &[f64], perturbation: &Field) -> Result<SlopeFit> {
    if eps_schedule.len() < 2 {
        return Err(CknError::DegenerateFit(format!(
            "need at least two ε values, got {}",
            eps_schedule.len()
        )));
    }
    let mut eps = eps_schedule.to_vec();
    eps.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let v = Bubble::canonical(params, 1.0)?.field(params, perturbation.grid(), None)?;
    let rows: Vec<Result<(f64, f64)>> = eps
        .par_iter()
        .map(|e| {
            let u = v.add_scaled(*e, perturbation)?;
            let proj = manifold_projection(&u, params)?;
            let rel = proj.distance / d_norm(&u, params)?;
            Ok((rel, raw_deficit(&u, params)?))
        })
        .collect();
    let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
    let (dist, def): (Vec<f64>, Vec<f64>) = rows.into_iter().unzip();
    if dist.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(CknError::DegenerateFit("distance is not increasing in ε".into()));
    }
    if def.iter().any(|d| !(*d > 0.0)) {
        return Err(CknError::DegenerateFit("non-positive deficit in schedule".into()));
    }
    let lx: Vec<f64> = dist.iter().map(|d| d.ln()).collect();
    let ly: Vec<f64> = def.iter().map(|d| d.ln()).collect();
    let (slope, intercept) = linear_fit(&lx, &ly);
    Ok(SlopeFit {
        slope,
        intercept,
        eps,
        relative_distance: dist,
        deficit: def,
    })
}

/// The two computable steps of the hat-map chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityRecord {
    pub hp: HatParams,
    pub nu: f64,
    /// (∫|x|^{-pa₂}|∇u|^p − h^{1-p-p/q}∫|x|^{-pa₁}|∇û|^p) relative to the first term.
    pub grad_chain_gap: f64,
    pub qnorm_residual: f64,
}

/// q-energy equality and gradient inequality for û(rθ) = h^{1/q}u(r^h θ).
pub fn monotonicity_chain_check(u: &Field, hp: &HatParams) -> Result<MonotonicityRecord> {
    let (base, target) = (&hp.base, &hp.target);
    let (n, p, q) = (target.n, target.p, target.q);
    let uh = hat_map(u, hp, Direction::Forward)?;
    let q_target = lq_energy(u, n, q, q * target.b)?;
    let q_base = lq_energy(&uh, n, q, q * base.b)?;
    let lhs = polar_grad_energy(u, n, p, p * target.a, 1.0)?;
    let rhs = hp.h.powf(1.0 - p - p / q) * polar_grad_energy(&uh, n, p, p * base.a, 1.0)?;
    let gap = if lhs == 0.0 { 0.0 } else { (lhs - rhs) / lhs };
    Ok(MonotonicityRecord {
        hp: *hp,
        nu: hp.nu(),
        grad_chain_gap: gap,
        qnorm_residual: relative_gap(q_target, q_base),
    })
}

/// Upper bounds along a parameter sequence and at its limit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuityReport {
    pub bounds: Vec<f64>,
    pub limit_bound: f64,
    /// |bound(limit) − bound(limit on the doubled grid)|.
    pub noise: f64,
    /// Max over the tail half of the sequence.
    pub tail_sup: f64,
    pub violation: bool,
}

/// Scans the family at each tuple of a sequence and at its limit, flagging
/// tail bounds that exceed the limit bound by more than twice the scan noise.
pub fn continuity_probe(
    sequence: &[(usize, f64, f64, f64)],
    limit: (usize, f64, f64, f64),
    family: &FamilySpec,
    sample_count: usize,
) -> Result<ContinuityReport> {
    let params: Vec<CknParams> = sequence
        .iter()
        .map(|&(n, p, a, b)| derive_params(n, p, a, b))
        .collect::<Result<_>>()?;
    let lim = derive_params(limit.0, limit.1, limit.2, limit.3)?;
    let bounds = params
        .iter()
        .map(|prm| k_upper_scan(family, prm, sample_count).map(|s| s.upper_bound))
        .collect::<Result<Vec<_>>>()?;
    let limit_bound = k_upper_scan(family, &lim, sample_count)?.upper_bound;
    let fine = Arc::new(RadialGrid::for_params(&lim).doubled()?);
    let fine_bound = k_upper_scan_on(family, &lim, sample_count, &fine, false)?.upper_bound;
    let noise = (limit_bound - fine_bound).abs();
    let tail = &bounds[bounds.len() / 2..];
    let tail_sup = tail.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok(ContinuityReport {
        violation: tail_sup > limit_bound + 2.0 * noise,
        bounds,
        limit_bound,
        noise,
        tail_sup,
    })
}

/// Both sides of the translated-bubble estimate across shifts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapProbe {
    pub shifts: Vec<f64>,
    pub lhs: Vec<f64>,
    pub rhs: Vec<f64>,
    pub ratios: Vec<f64>,
    pub lhs_slope: f64,
    pub rhs_slope: f64,
    pub infimum: f64,
}

/// For the normalized radial bubble U of the unweighted family and shifts ρ,
/// compares (k-modified energy of U(·+ρe₁))^{1/p}/‖U‖ − S(p,0,0) with
/// (‖∇U − ∇U(·+ρe₁)‖_p/‖U‖)², where ‖U‖ is the L^{np/(n-p)} norm.
pub fn translated_bubble_gap_probe(params: &CknParams, shifts: &[f64], angular_count: usize) -> Result<GapProbe> {
    if !(params.a > 0.0 && params.a == params.b) {
        return Err(CknError::region(format!(
            "gap probe needs a = b > 0 (got a = {}, b = {})",
            params.a, params.b
        )));
    }
    let flat = derive_params(params.n, params.p, 0.0, 0.0)?;
    let grid = Arc::new(RadialGrid::for_params(&flat));
    let ang = Arc::new(AngularRule::new(params.n, angular_count)?);
    let bubble = Bubble::canonical(&flat, 1.0)?;
    let u = bubble.field(&flat, &grid, Some(&ang))?;
    let norm = weighted_lq_norm(&bubble.field(&flat, &grid, None)?, &flat)?.powf(1.0 / flat.q);
    let s00 = sharp_constant(&flat);
    let (n, p) = (params.n, params.p);
    let rows: Vec<Result<Option<(f64, f64, f64)>>> = shifts
        .par_iter()
        .map(|&rho| {
            if rho == 0.0 {
                return Ok(None);
            }
            let moved = Bubble { axial_shift: rho, ..bubble }.field(&flat, &grid, Some(&ang))?;
            let lhs = polar_grad_energy(&moved, n, p, 0.0, params.k)?.powf(1.0 / p) / norm - s00;
            let rhs = (d_distance(&u, &moved, &flat)? / norm).powi(2);
            Ok(Some((rho, lhs, rhs)))
        })
        .collect();
    let mut out = GapProbe {
        shifts: Vec::new(),
        lhs: Vec::new(),
        rhs: Vec::new(),
        ratios: Vec::new(),
        lhs_slope: f64::NAN,
        rhs_slope: f64::NAN,
        infimum: f64::INFINITY,
    };
    for row in rows {
        if let Some((rho, l, r)) = row? {
            out.shifts.push(rho);
            out.lhs.push(l);
            out.rhs.push(r);
            out.ratios.push(l / r);
            out.infimum = out.infimum.min(l / r);
        }
    }
    if out.shifts.len() >= 2 {
        let lx: Vec<f64> = out.shifts.iter().map(|s| s.abs().ln()).collect();
        out.lhs_slope = linear_fit(&lx, &out.lhs.iter().map(|v| v.abs().ln()).collect::<Vec<_>>()).0;
        out.rhs_slope = linear_fit(&lx, &out.rhs.iter().map(|v| v.ln()).collect::<Vec<_>>()).0;
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmbeddingVariant {
    Grad,
    Value,
}

/// Implied constant of the bounded-domain estimate with a weak-norm remainder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingReport {
    pub kbar: f64,
    pub numerator: f64,
    pub weak_norm: f64,
    pub alpha: f64,
    pub weak_exponent: f64,
    pub volume_exponent: f64,
}

/// C^∞ cutoff equal to 1 on [0, 0.6R] and 0 on [0.9R, ∞), with its derivative.
pub fn boundary_cutoff(radius: f64) -> impl Fn(f64) -> (f64, f64) {
    let (lo, hi) = (0.6 * radius, 0.9 * radius);
    move |r: f64| {
        if r <= lo {
            return (1.0, 0.0);
        }
        if r >= hi {
            return (0.0, 0.0);
        }
        let x = (r - lo) / (hi - lo);
        let f = |s: f64| if s <= 0.0 { 0.0 } else { (-1.0 / s).exp() };
        let df = |s: f64| if s <= 0.0 { 0.0 } else { (-1.0 / s).exp() / (s * s) };
        let (a, b) = (f(1.0 - x), f(x));
        let (da, db) = (-df(1.0 - x), df(x));
        let s = a + b;
        let val = a / s;
        let dval = (da * s - a * (da + db)) / (s * s);
        (val, dval / (hi - lo))
    }
}

/// Multiplies u by the boundary cutoff of the ball of radius R.
pub fn mollify(u: &Field, radius: f64) -> Field {
    u.times_radial(boundary_cutoff(radius))
}

/// K̄ = [‖|x|^{-a}∇u‖_p^α − S^α‖|x|^{-b}u‖_q^α] / [|Ω|^{-αp₃} W^α] on Ω = B_R,
/// with W the weak norm of |x|^{-a}u (exponent p₁) or |x|^{-a}|∇u| (exponent p₂).
pub fn embedding_check(
    u: &Field,
    params: &CknParams,
    domain_radius: f64,
    variant: EmbeddingVariant,
) -> Result<EmbeddingReport> {
    if u.is_zero() {
        return Err(CknError::ZeroField("embedding check"));
    }
    let m = Measure::for_fields(params.n, &[u])?;
    let mut outside = false;
    m.for_each_weighted(0.0, |nd, _| {
        if nd.r >= domain_radius && u.at(nd.i, nd.j).value != 0.0 {
            outside = true;
        }
    });
    if outside {
        return Err(CknError::UnsupportedField {
            radius: domain_radius,
        });
    }
    let (n, p, a) = (params.n as f64, params.p, params.a);
    let alpha = params.stability_exponent(false);
    let grad = d_norm(u, params)?;
    let lq = weighted_lq_norm(u, params)?.powf(1.0 / params.q);
    let numerator = grad.powf(alpha) - sharp_constant(params).powf(alpha) * lq.powf(alpha);
    let p1 = n * (p - 1.0) / (n - p - a);
    let p2 = n * (p - 1.0) / (n - a - 1.0);
    let p3 = params.gap() / (n * p * (p - 1.0));
    let (exponent, weak) = match variant {
        EmbeddingVariant::Value => (
            p1,
            weak_norm_of(&m, p1, domain_radius, |nd| nd.r.powf(-a) * u.at(nd.i, nd.j).value)?,
        ),
        EmbeddingVariant::Grad => (
            p2,
            weak_norm_of(&m, p2, domain_radius, |nd| {
                nd.r.powf(-a) * u.at(nd.i, nd.j).grad_sq().sqrt()
            })?,
        ),
    };
    if weak == 0.0 {
        return Err(CknError::ZeroField("weak norm"));
    }
    let volume = ball_measure(params.n, domain_radius);
    let denominator = volume.powf(-alpha * p3) * weak.powf(alpha);
    Ok(EmbeddingReport {
        kbar: numerator / denominator,
        numerator,
        weak_norm: weak,
        alpha,
        weak_exponent: exponent,
        volume_exponent: p3,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bubble::default_grid;
    use crate::params::derive_hat_params;

    #[test]
    fn ratio_homogeneity_and_alpha_rule() {
        let prm = derive_params(4, 2.5, 0.2, 0.5).unwrap();
        let g = default_grid(&prm);
        let fam = generate_family(&FamilySpec::bump(0.5, 0.5, 1e-2, 1e-2), &prm, &g, 1).unwrap();
        let r1 = stability_ratio(&fam[0], &prm, false).unwrap();
        let r2 = stability_ratio(&fam[0].scaled(4.0), &prm, false).unwrap();
        assert!(r1.ratio > 0.0);
        assert!((r1.ratio - r2.ratio).abs() <= 1e-6 * r1.ratio, "{} {}", r1.ratio, r2.ratio);
        let eq = derive_params(4, 3.0, 0.3, 0.3).unwrap();
        assert_eq!(eq.stability_exponent(false), 6.0);
        assert_eq!(eq.stability_exponent(true), 3.0);
    }

    #[test]
    fn exact_bubbles_give_empty_family() {
        let prm = derive_params(3, 2.0, 0.0, 0.5).unwrap();
        let spec = FamilySpec {
            kind: FamilyKind::Bubbles,
            ..FamilySpec::random(0)
        };
        assert!(matches!(k_upper_scan(&spec, &prm, 4), Err(CknError::EmptyFamily)));
    }

    #[test]
    fn single_point_schedule_is_degenerate() {
        let prm = derive_params(3, 2.0, 0.0, 0.0).unwrap();
        let g = default_grid(&prm);
        let z = normalized_bump(&prm, &g, 0.5, 0.5).unwrap();
        assert!(matches!(exponent_slope_fit(&prm, &[1e-2], &z), Err(CknError::DegenerateFit(_))));
    }

    #[test]
    fn chain_identity_case() {
        let hp = derive_hat_params(4, 2.0, 0.5, 1.0, 0.5, 1.0).unwrap();
        let g = default_grid(&hp.target);
        let u = Bubble::canonical(&hp.target, 1.0).unwrap().field(&hp.target, &g, None).unwrap();
        let rec = monotonicity_chain_check(&u, &hp).unwrap();
        assert!(rec.qnorm_residual <= 1e-10 && rec.grad_chain_gap.abs() <= 1e-10);
    }

    #[test]
    fn cutoff_is_smooth_step() {
        let c = boundary_cutoff(1.0);
        assert_eq!(c(0.5), (1.0, 0.0));
        assert_eq!(c(0.95).0, 0.0);
        let h = 1e-6;
        for &r in &[0.65, 0.75, 0.85] {
            let fd = (c(r + h).0 - c(r - h).0) / (2.0 * h);
            assert!((fd - c(r).1).abs() < 1e-6);
        }
    }

    #[test]
    fn embedding_rejects_unsupported_field() {
        let prm = derive_params(3, 2.0, 0.0, 0.0).unwrap();
        let g = default_grid(&prm);
        let v = Bubble::canonical(&prm, 1.0).unwrap().field(&prm, &g, None).unwrap();
        assert!(matches!(
            embedding_check(&v, &prm, 1.0, EmbeddingVariant::Value),
            Err(CknError::UnsupportedField { .. })
        ));
        let m = mollify(&v, 1.0);
        let rep = embedding_check(&m, &prm, 1.0, EmbeddingVariant::Value).unwrap();
        assert!(rep.kbar > 0.0);
    }
}
