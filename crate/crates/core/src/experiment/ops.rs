//! One function per operation: build the inputs, call the library, collect
//! named outputs and a CSV table.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;

use crate::bubble::Bubble;
use crate::critical::{
    alternative_check, dual_norm_estimate_seeded, elementary_c_estimate, elementary_ratio_scaled,
    residual_distance_slope, spectral_gap_ratio, thm5_sweep, AlternativeBranch,
};
use crate::error::{CknError, Result};
use crate::field::Field;
use crate::functionals::{deficit, functional_report};
use crate::grid::{GridRef, GridSpec, RadialGrid};
use crate::manifold::{manifold_projection, orthogonalize};
use crate::params::{sharp_constant, CknParams};
use crate::stability::{
    embedding_check, exponent_slope_fit, k_upper_scan_on, monotonicity_chain_check, normalized_bump,
    EmbeddingVariant,
};
use crate::transforms::transform_identity_check;

use super::config::{ExperimentConfig, Operation};
use super::fields::{build_fields, FieldContext};
use super::ledger::OutputValue;

/// Rows of a CSV side product; every row has one cell per column.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(columns: &[&str]) -> Self {
        Table {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

#[derive(Debug, Clone, Default)]
pub struct OpOutput {
    pub outputs: BTreeMap<String, OutputValue>,
    pub table: Table,
    pub grids: Vec<GridSpec>,
}

impl OpOutput {
    fn real(&mut self, key: &str, v: f64) {
        self.outputs.insert(key.to_string(), OutputValue::real(v));
    }

    fn list(&mut self, key: &str, v: Vec<f64>) {
        self.outputs.insert(key.to_string(), OutputValue::list(v));
    }

    fn text(&mut self, key: &str, v: impl Into<String>) {
        self.outputs.insert(key.to_string(), OutputValue::Text(v.into()));
    }

    fn grid(&mut self, g: &RadialGrid) {
        if !self.grids.contains(g.spec()) {
            self.grids.push(g.spec().clone());
        }
    }

    /// Plot-data columns picked up by the report.
    fn plot(&mut self, x: Vec<f64>, y: Vec<f64>) {
        self.list("plot_x", x);
        self.list("plot_y", y);
    }
}

fn s(v: f64) -> String {
    v.to_string()
}

fn max_of(v: &[f64]) -> f64 {
    v.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
}

fn min_of(v: &[f64]) -> f64 {
    v.iter().cloned().fold(f64::INFINITY, f64::min)
}

fn relative_gap(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

struct Setup {
    params: CknParams,
    grid: GridRef,
    fields: Vec<Field>,
}

fn setup(cfg: &ExperimentConfig, params: CknParams, base_dir: &Path) -> Result<Setup> {
    let grid = cfg.grid.radial(&params, cfg.tol_profile)?;
    let angular = cfg.grid.angular_rule(params.n, cfg.tol_profile)?;
    let cx = FieldContext {
        params: &params,
        grid: &grid,
        angular: &angular,
        base_dir,
    };
    let fields = build_fields(&cfg.fields, &cx)?;
    Ok(Setup { params, grid, fields })
}

fn first_params(cfg: &ExperimentConfig) -> Result<CknParams> {
    cfg.params
        .first()
        .ok_or_else(|| CknError::config("params", "at least one parameter tuple is required"))?
        .derive()
}

pub fn execute(cfg: &ExperimentConfig, base_dir: &Path) -> Result<OpOutput> {
    match cfg.operation {
        Operation::Constants => constants(cfg),
        Operation::TransformCheck => transform_check(cfg, base_dir),
        Operation::Project => project(cfg, base_dir),
        Operation::StabilityScan => stability_scan(cfg),
        Operation::SlopeFit => slope_fit(cfg, base_dir),
        Operation::ChainCheck => chain_check(cfg, base_dir),
        Operation::EmbeddingCheck => embedding(cfg, base_dir),
        Operation::SpectralGap => spectral_gap(cfg),
        Operation::Thm5 => thm5(cfg, base_dir),
        Operation::AltCheck => alt_check(cfg, base_dir),
        Operation::IneqConst => ineq_const(cfg),
    }
}

/// Closed form, Rayleigh quotient of the extremal and the k-ratio law.
fn constants(cfg: &ExperimentConfig) -> Result<OpOutput> {
    let mut out = OpOutput {
        table: Table::new(&[
            "n",
            "p",
            "a",
            "b",
            "q",
            "gamma",
            "k",
            "sharp_constant",
            "rayleigh",
            "ratio_law",
            "disagreement",
        ]),
        ..Default::default()
    };
    let mut cols: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for tuple in &cfg.params {
        let prm = tuple.derive()?;
        let grid = cfg.grid.radial(&prm, cfg.tol_profile)?;
        out.grid(&grid);
        let closed = sharp_constant(&prm);
        let v = Bubble::canonical(&prm, 1.0)?.field(&prm, &grid, None)?;
        let rep = functional_report(&v, &prm)?;
        let rayleigh = rep.grad_term.powf(1.0 / prm.p) / rep.q_term.powf(1.0 / prm.q);
        let law = prm.k.powf(1.0 / prm.p - 1.0 - 1.0 / prm.q) * sharp_constant(&prm.unweighted_partner()?);
        let worst = relative_gap(closed, rayleigh)
            .max(relative_gap(closed, law))
            .max(relative_gap(rayleigh, law));
        let row = [
            ("n", prm.n as f64),
            ("p", prm.p),
            ("a", prm.a),
            ("b", prm.b),
            ("q", prm.q),
            ("gamma", prm.gamma),
            ("k", prm.k),
            ("sharp_constant", closed),
            ("rayleigh", rayleigh),
            ("ratio_law", law),
            ("disagreement", worst),
        ];
        out.table.push(row.iter().map(|(_, v)| s(*v)).collect());
        for (k, v) in row {
            cols.entry(k).or_default().push(v);
        }
    }
    out.real("max_disagreement", max_of(&cols["disagreement"]));
    for (k, v) in cols {
        out.list(k, v);
    }
    Ok(out)
}

fn transform_check(cfg: &ExperimentConfig, base_dir: &Path) -> Result<OpOutput> {
    let st = setup(cfg, first_params(cfg)?, base_dir)?;
    let mut out = OpOutput {
        table: Table::new(&["field", "radial", "q_norm_residual", "grad_identity_residual", "grad_drop_gap"]),
        ..Default::default()
    };
    out.grid(&st.grid);
    let reports = st
        .fields
        .par_iter()
        .map(|u| transform_identity_check(u, &st.params))
        .collect::<Result<Vec<_>>>()?;
    let (mut qr, mut gr, mut drop_axisym) = (Vec::new(), Vec::new(), Vec::new());
    for (i, (u, r)) in st.fields.iter().zip(&reports).enumerate() {
        out.table.push(vec![
            i.to_string(),
            u.is_radial().to_string(),
            s(r.q_norm_residual),
            s(r.grad_identity_residual),
            s(r.grad_drop_gap),
        ]);
        qr.push(r.q_norm_residual);
        gr.push(r.grad_identity_residual);
        if !u.is_radial() {
            drop_axisym.push(r.grad_drop_gap);
        }
    }
    out.real("max_q_norm_residual", max_of(&qr));
    out.real("max_grad_identity_residual", max_of(&gr));
    out.real("min_axisym_drop_gap", min_of(&drop_axisym));
    out.real("axisym_fields", drop_axisym.len() as f64);
    out.real("radial_fields", (st.fields.len() - drop_axisym.len()) as f64);
    out.list("q_norm_residual", qr);
    out.list("grad_identity_residual", gr);
    out.list("grad_drop_gap", reports.iter().map(|r| r.grad_drop_gap).collect());
    Ok(out)
}

/// Manifold distance and deficit of each field; with `basis` set, also the
/// dual-norm estimate of the Euler–Lagrange residual.
fn project(cfg: &ExperimentConfig, base_dir: &Path) -> Result<OpOutput> {
    let st = setup(cfg, first_params(cfg)?, base_dir)?;
    let mut out = OpOutput {
        table: Table::new(&["field", "distance", "amplitude", "scale", "axial_shift", "deficit", "el_dual_norm"]),
        ..Default::default()
    };
    out.grid(&st.grid);
    let with_residual = cfg.settings.basis.is_some();
    let rows = st
        .fields
        .par_iter()
        .map(|u| {
            let proj = manifold_projection(u, &st.params)?;
            let def = deficit(u, &st.params)?;
            let res = if with_residual {
                dual_norm_estimate_seeded(u, &st.params, cfg.settings.basis_size(), cfg.seed)?.value
            } else {
                f64::NAN
            };
            Ok((proj, def, res))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut cols: [Vec<f64>; 3] = Default::default();
    for (i, (proj, def, res)) in rows.iter().enumerate() {
        out.table.push(vec![
            i.to_string(),
            s(proj.distance),
            s(proj.bubble.amplitude),
            s(proj.bubble.scale),
            s(proj.bubble.axial_shift),
            s(*def),
            s(*res),
        ]);
        cols[0].push(proj.distance);
        cols[1].push(*def);
        cols[2].push(*res);
    }
    out.real("max_deficit", max_of(&cols[1]));
    if with_residual {
        out.real("max_el_dual_norm", max_of(&cols[2]));
        out.list("el_dual_norm", cols[2].clone());
    }
    out.list("distance", cols[0].clone());
    out.list("deficit", cols[1].clone());
    Ok(out)
}

fn stability_scan(cfg: &ExperimentConfig) -> Result<OpOutput> {
    let mut family = cfg
        .family
        .clone()
        .ok_or_else(|| CknError::config("family", "stability-scan needs a family"))?;
    family.seed = family.seed.wrapping_add(cfg.seed);
    let count = cfg.settings.samples.unwrap_or(30);
    let n_sym = cfg.settings.n_symmetric.unwrap_or(false);
    let mut out = OpOutput {
        table: Table::new(&["n", "p", "a", "b", "sample", "ratio", "relative_distance", "deficit", "alpha"]),
        ..Default::default()
    };
    let (mut mins, mut excluded, mut ratios) = (Vec::new(), Vec::new(), Vec::new());
    let mut caveat = false;
    for tuple in &cfg.params {
        let prm = tuple.derive()?;
        let grid = cfg.grid.radial(&prm, cfg.tol_profile)?;
        out.grid(&grid);
        let scan = k_upper_scan_on(&family, &prm, count, &grid, n_sym)?;
        for (i, r) in scan.records.iter().enumerate() {
            out.table.push(vec![
                prm.n.to_string(),
                s(prm.p),
                s(prm.a),
                s(prm.b),
                i.to_string(),
                s(r.ratio),
                s(r.relative_distance),
                s(r.deficit),
                s(r.alpha),
            ]);
            ratios.push(r.ratio);
        }
        mins.push(scan.upper_bound);
        excluded.push(scan.excluded as f64);
        caveat |= scan.caveat_may_vanish;
    }
    out.real("min_ratio", min_of(&mins));
    out.list("upper_bound", mins);
    out.list("excluded", excluded);
    out.list("ratios", ratios);
    out.outputs.insert("caveat_may_vanish".into(), OutputValue::Flag(caveat));
    Ok(out)
}

/// Deficit against relative distance along V + εζ, ζ = fields[0], for each tuple.
fn slope_fit(cfg: &ExperimentConfig, base_dir: &Path) -> Result<OpOutput> {
    let eps = cfg.settings.eps_schedule()?;
    let mut out = OpOutput {
        table: Table::new(&["n", "p", "a", "b", "eps", "relative_distance", "deficit"]),
        ..Default::default()
    };
    let mut slopes = Vec::new();
    let (mut px, mut py) = (Vec::new(), Vec::new());
    for tuple in &cfg.params {
        let st = setup(cfg, tuple.derive()?, base_dir)?;
        out.grid(&st.grid);
        let fit = exponent_slope_fit(&st.params, &eps, &st.fields[0])?;
        for i in 0..fit.eps.len() {
            out.table.push(vec![
                st.params.n.to_string(),
                s(st.params.p),
                s(st.params.a),
                s(st.params.b),
                s(fit.eps[i]),
                s(fit.relative_distance[i]),
                s(fit.deficit[i]),
            ]);
        }
        slopes.push(fit.slope);
        px.extend(&fit.relative_distance);
        py.extend(&fit.deficit);
    }
    out.real("slope", slopes[0]);
    out.list("slopes", slopes);
    out.plot(px, py);
    Ok(out)
}

/// Hat-map chain on every field, sampled on each target tuple's grid.
fn chain_check(cfg: &ExperimentConfig, base_dir: &Path) -> Result<OpOutput> {
    let mut out = OpOutput {
        table: Table::new(&["hat", "field", "radial", "nu", "qnorm_residual", "grad_chain_gap"]),
        ..Default::default()
    };
    let (mut qr, mut gap, mut radial_gap) = (Vec::new(), Vec::new(), Vec::new());
    for (h, tuple) in cfg.hat.iter().enumerate() {
        let hp = tuple.derive()?;
        let st = setup(cfg, hp.target, base_dir)?;
        out.grid(&st.grid);
        let recs = st
            .fields
            .par_iter()
            .map(|u| monotonicity_chain_check(u, &hp))
            .collect::<Result<Vec<_>>>()?;
        for (i, (u, r)) in st.fields.iter().zip(&recs).enumerate() {
            out.table.push(vec![
                h.to_string(),
                i.to_string(),
                u.is_radial().to_string(),
                s(r.nu),
                s(r.qnorm_residual),
                s(r.grad_chain_gap),
            ]);
            qr.push(r.qnorm_residual);
            gap.push(r.grad_chain_gap);
            if u.is_radial() {
                radial_gap.push(r.grad_chain_gap.abs());
            }
        }
    }
    out.real("max_qnorm_residual", max_of(&qr));
    out.real("min_grad_chain_gap", min_of(&gap));
    out.real("max_radial_gap", max_of(&radial_gap));
    out.list("qnorm_residual", qr);
    out.list("grad_chain_gap", gap);
    Ok(out)
}

/// K̄ per field and variant, plus its change when u is scaled.
fn embedding(cfg: &ExperimentConfig, base_dir: &Path) -> Result<OpOutput> {
    let st = setup(cfg, first_params(cfg)?, base_dir)?;
    let radius = cfg.settings.radius.unwrap_or(1.0);
    let scale = cfg.settings.homogeneity_scale.unwrap_or(3.0);
    let variants = cfg
        .settings
        .variants
        .clone()
        .unwrap_or_else(|| vec![EmbeddingVariant::Grad, EmbeddingVariant::Value]);
    let mut out = OpOutput {
        table: Table::new(&["field", "variant", "kbar", "kbar_scaled", "homogeneity_gap"]),
        ..Default::default()
    };
    out.grid(&st.grid);
    let jobs: Vec<(usize, EmbeddingVariant)> = (0..st.fields.len())
        .flat_map(|i| variants.iter().map(move |&v| (i, v)))
        .collect();
    let rows = jobs
        .par_iter()
        .map(|&(i, v)| {
            let u = &st.fields[i];
            let k = embedding_check(u, &st.params, radius, v)?.kbar;
            let ks = embedding_check(&u.scaled(scale), &st.params, radius, v)?.kbar;
            Ok((k, ks))
        })
        .collect::<Result<Vec<_>>>()?;
    let (mut kbar, mut hom) = (Vec::new(), Vec::new());
    for (&(i, v), &(k, ks)) in jobs.iter().zip(&rows) {
        let g = relative_gap(k, ks);
        let name = match v {
            EmbeddingVariant::Grad => "grad",
            EmbeddingVariant::Value => "value",
        };
        out.table.push(vec![i.to_string(), name.into(), s(k), s(ks), s(g)]);
        kbar.push(k);
        hom.push(g);
    }
    out.real("min_kbar", min_of(&kbar));
    out.real("max_homogeneity_gap", max_of(&hom));
    out.list("kbar", kbar);
    out.list("homogeneity_gap", hom);
    Ok(out)
}

fn spectral_min(params: &CknParams, grid: &GridRef, centers: &[f64], width: f64) -> Result<Vec<f64>> {
    let v = Bubble::canonical(params, 1.0)?;
    centers
        .par_iter()
        .map(|&c| {
            let z = normalized_bump(params, grid, c, width)?;
            let rho = orthogonalize(&z, &v, params)?;
            Ok(spectral_gap_ratio(&v, &rho, params)?.ratio)
        })
        .collect()
}

/// Hessian ratio over orthogonalized radial bumps centred on an even grid of
/// log-radii; `refine` repeats on the doubled grid.
fn spectral_gap(cfg: &ExperimentConfig) -> Result<OpOutput> {
    let prm = first_params(cfg)?;
    let grid = cfg.grid.radial(&prm, cfg.tol_profile)?;
    let probes = cfg.settings.probes.unwrap_or(20).max(2);
    let (lo, hi) = cfg.settings.probe_centers.unwrap_or((-3.0, 3.0));
    let width = cfg.settings.probe_width.unwrap_or(0.6);
    let centers: Vec<f64> = (0..probes)
        .map(|i| lo + (hi - lo) * i as f64 / (probes - 1) as f64)
        .collect();
    let mut out = OpOutput {
        table: Table::new(&["center", "ratio", "ratio_refined"]),
        ..Default::default()
    };
    out.grid(&grid);
    let ratios = spectral_min(&prm, &grid, &centers, width)?;
    let min = min_of(&ratios);
    let refined = if cfg.settings.refine.unwrap_or(false) {
        let fine = Arc::new(grid.doubled()?);
        out.grid(&fine);
        let r = spectral_min(&prm, &fine, &centers, width)?;
        out.real("min_ratio_refined", min_of(&r));
        out.real("refinement_change", relative_gap(min, min_of(&r)));
        Some(r)
    } else {
        None
    };
    for (i, c) in centers.iter().enumerate() {
        let rr = refined.as_ref().map_or(f64::NAN, |r| r[i]);
        out.table.push(vec![s(*c), s(ratios[i]), s(rr)]);
    }
    out.real("min_ratio", min);
    out.list("centers", centers);
    out.list("ratios", ratios);
    Ok(out)
}

/// `sweep`: Q, N and residual×‖ρ‖ slopes in ε; `distance`: residual against
/// ‖u − P_u‖. The perturbation is fields[0].
fn thm5(cfg: &ExperimentConfig, base_dir: &Path) -> Result<OpOutput> {
    let st = setup(cfg, first_params(cfg)?, base_dir)?;
    let eps = cfg.settings.eps_schedule()?;
    let basis = cfg.settings.basis_size();
    let mut out = OpOutput::default();
    out.grid(&st.grid);
    match cfg.settings.variant.as_deref().unwrap_or("sweep") {
        "sweep" => {
            let sw = thm5_sweep(&st.params, &eps, &st.fields[0], basis)?;
            out.table = Table::new(&["eps", "q", "n", "residual_times_rho"]);
            for i in 0..sw.eps.len() {
                out.table
                    .push(vec![s(sw.eps[i]), s(sw.q[i]), s(sw.n[i]), s(sw.residual_times_rho[i])]);
            }
            out.real("q_slope", sw.q_slope);
            out.real("n_slope", sw.n_slope);
            out.real("residual_slope", sw.residual_slope);
            out.list("q", sw.q);
            out.list("n", sw.n);
            out.plot(sw.eps, sw.residual_times_rho);
        }
        _ => {
            let rs = residual_distance_slope(&st.params, &eps, &st.fields[0], basis)?;
            out.table = Table::new(&["eps", "distance", "residual"]);
            for i in 0..rs.eps.len() {
                out.table.push(vec![s(rs.eps[i]), s(rs.distance[i]), s(rs.residual[i])]);
            }
            out.real("slope", rs.slope);
            out.list("eps", rs.eps);
            out.plot(rs.distance, rs.residual);
        }
    }
    Ok(out)
}

fn alt_check(cfg: &ExperimentConfig, base_dir: &Path) -> Result<OpOutput> {
    let st = setup(cfg, first_params(cfg)?, base_dir)?;
    let (c1, big_c1) = match (cfg.settings.c1, cfg.settings.big_c1) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(CknError::config("settings.c1", "alt-check needs c1 and big_c1")),
    };
    let mut out = OpOutput {
        table: Table::new(&["field", "branch", "a_u", "eta", "kappa"]),
        ..Default::default()
    };
    out.grid(&st.grid);
    let reps = st
        .fields
        .iter()
        .map(|u| alternative_check(u, &st.params, c1, big_c1))
        .collect::<Result<Vec<_>>>()?;
    let (mut kappa, mut a_u) = (Vec::new(), Vec::new());
    let mut counts = [0usize; 3];
    let mut branches = Vec::new();
    for (i, r) in reps.iter().enumerate() {
        let (name, k) = match &r.branch {
            AlternativeBranch::Degenerate => {
                counts[0] += 1;
                ("degenerate", f64::NAN)
            }
            AlternativeBranch::Uniform { kappa, .. } => {
                counts[1] += 1;
                ("uniform", *kappa)
            }
            AlternativeBranch::Interpolated { kappa_min, .. } => {
                counts[2] += 1;
                ("interpolated", *kappa_min)
            }
        };
        out.table.push(vec![i.to_string(), name.into(), s(r.a_u), s(r.eta), s(k)]);
        branches.push(name);
        kappa.push(k);
        a_u.push(r.a_u);
    }
    let finite: Vec<f64> = kappa.iter().cloned().filter(|k| k.is_finite()).collect();
    out.real("eta", reps.first().map_or(f64::NAN, |r| r.eta));
    out.real("min_kappa", if finite.is_empty() { f64::NAN } else { min_of(&finite) });
    out.list("kappa", kappa);
    out.list("a_u", a_u);
    out.text("branches", branches.join(" "));
    out.list("branch_counts", counts.iter().map(|&c| c as f64).collect());
    Ok(out)
}

/// Empirical constant at `samples` and `2·samples` per (case, exponent), and
/// the ratio at the maximizer under joint scaling.
fn ineq_const(cfg: &ExperimentConfig) -> Result<OpOutput> {
    let samples = cfg.settings.samples.unwrap_or(200);
    let scale = cfg.settings.scale.unwrap_or(7.0);
    let cases = cfg.settings.cases.clone().unwrap_or_default();
    let exps = cfg.settings.exponents.clone().unwrap_or_default();
    let jobs: Vec<(u8, f64)> = cases
        .iter()
        .zip(&exps)
        .flat_map(|(&c, es)| es.iter().map(move |&e| (c, e)))
        .collect();
    let rows = jobs
        .par_iter()
        .map(|&(c, e)| {
            let coarse = elementary_c_estimate(c, e, samples)?;
            let fine = elementary_c_estimate(c, e, 2 * samples)?;
            let scaled = elementary_ratio_scaled(&fine, scale);
            let at_one = elementary_ratio_scaled(&fine, 1.0);
            Ok((coarse.c, fine.c, relative_gap(scaled, at_one)))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out = OpOutput {
        table: Table::new(&["case", "exponent", "c", "c_refined", "refinement_change", "scaling_gap"]),
        ..Default::default()
    };
    let (mut change, mut scaling, mut cs) = (Vec::new(), Vec::new(), Vec::new());
    for (&(c, e), &(c0, c1, g)) in jobs.iter().zip(&rows) {
        let ch = relative_gap(c0, c1);
        out.table.push(vec![c.to_string(), s(e), s(c0), s(c1), s(ch), s(g)]);
        change.push(ch);
        scaling.push(g);
        cs.push(c1);
    }
    out.real("max_refinement_change", max_of(&change));
    out.real("max_scaling_gap", max_of(&scaling));
    out.list("c", cs);
    out.list("refinement_change", change);
    out.list("scaling_gap", scaling);
    Ok(out)
}
