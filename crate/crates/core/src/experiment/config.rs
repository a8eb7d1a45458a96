//! Experiment configuration files (TOML).

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::critical::DEFAULT_BASIS;
use crate::error::{CknError, Result};
use crate::grid::{AngularRef, AngularRule, GridRef, RadialGrid, DEFAULT_ANGULAR, DEFAULT_DENSITY};
use crate::params::{derive_hat_params, derive_params, CknParams, HatParams};
use crate::stability::{EmbeddingVariant, FamilySpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Operation {
    Constants,
    TransformCheck,
    Project,
    StabilityScan,
    SlopeFit,
    ChainCheck,
    EmbeddingCheck,
    SpectralGap,
    Thm5,
    AltCheck,
    IneqConst,
}

impl Operation {
    pub const ALL: [Operation; 11] = [
        Operation::Constants,
        Operation::TransformCheck,
        Operation::Project,
        Operation::StabilityScan,
        Operation::SlopeFit,
        Operation::ChainCheck,
        Operation::EmbeddingCheck,
        Operation::SpectralGap,
        Operation::Thm5,
        Operation::AltCheck,
        Operation::IneqConst,
    ];

    /// Subcommand spelling.
    pub fn name(self) -> &'static str {
        match self {
            Operation::Constants => "constants",
            Operation::TransformCheck => "transform-check",
            Operation::Project => "project",
            Operation::StabilityScan => "stability-scan",
            Operation::SlopeFit => "slope-fit",
            Operation::ChainCheck => "chain-check",
            Operation::EmbeddingCheck => "embedding-check",
            Operation::SpectralGap => "spectral-gap",
            Operation::Thm5 => "thm5",
            Operation::AltCheck => "alt-check",
            Operation::IneqConst => "ineq-const",
        }
    }

    /// (module, library operation) recorded in the ledger.
    pub fn target(self) -> (&'static str, &'static str) {
        match self {
            Operation::Constants => ("params", "sharp_constant"),
            Operation::TransformCheck => ("transforms", "transform_identity_check"),
            Operation::Project => ("manifold", "manifold_projection"),
            Operation::StabilityScan => ("stability", "stability_ratio"),
            Operation::SlopeFit => ("stability", "exponent_slope_fit"),
            Operation::ChainCheck => ("stability", "monotonicity_chain_check"),
            Operation::EmbeddingCheck => ("stability", "embedding_check"),
            Operation::SpectralGap => ("critical", "spectral_gap_ratio"),
            Operation::Thm5 => ("critical", "thm5_quantities"),
            Operation::AltCheck => ("critical", "alternative_check"),
            Operation::IneqConst => ("critical", "elementary_c_estimate"),
        }
    }
}

/// `fast` halves the default radial density and uses 64 angles; `strict`
/// keeps the defaults. Explicit grid settings win over both.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum TolProfile {
    Fast,
    #[default]
    Strict,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamTuple {
    pub n: usize,
    pub p: f64,
    pub a: f64,
    pub b: f64,
}

impl ParamTuple {
    pub fn derive(&self) -> Result<CknParams> {
        derive_params(self.n, self.p, self.a, self.b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HatTuple {
    pub n: usize,
    pub p: f64,
    pub a1: f64,
    pub b1: f64,
    pub a2: f64,
    pub b2: f64,
}

impl HatTuple {
    pub fn derive(&self) -> Result<HatParams> {
        derive_hat_params(self.n, self.p, self.a1, self.b1, self.a2, self.b2)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSettings {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_max: Option<f64>,
    /// Nodes per unit of log-radius when `count` is absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub density: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub count: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub angular: Option<usize>,
}

impl GridSettings {
    pub fn radial(&self, params: &CknParams, profile: TolProfile) -> Result<GridRef> {
        let density = self.density.unwrap_or(match profile {
            TolProfile::Strict => DEFAULT_DENSITY,
            TolProfile::Fast => DEFAULT_DENSITY / 2.0,
        });
        let (lo, hi) = crate::grid::default_t_range(params);
        let (t_min, t_max) = (self.t_min.unwrap_or(lo), self.t_max.unwrap_or(hi));
        let count = match self.count {
            Some(c) => c,
            None => {
                let panels = ((t_max - t_min) * density / crate::grid::PANEL_ORDER as f64).ceil() as usize;
                panels.max(2) * crate::grid::PANEL_ORDER
            }
        };
        Ok(Arc::new(RadialGrid::new(t_min, t_max, count)?))
    }

    pub fn angular_count(&self, profile: TolProfile) -> usize {
        self.angular.unwrap_or(match profile {
            TolProfile::Strict => DEFAULT_ANGULAR,
            TolProfile::Fast => 64,
        })
    }

    pub fn angular_rule(&self, n: usize, profile: TolProfile) -> Result<AngularRef> {
        Ok(Arc::new(AngularRule::new(n, self.angular_count(profile))?))
    }
}

/// Declarative description of an input field, built on the experiment grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FieldSpec {
    /// c · λ^{w}V(λx + x₀e₁) with V the normalized extremal.
    Bubble {
        #[serde(default = "one")]
        scale: f64,
        #[serde(default = "one")]
        factor: f64,
        #[serde(default)]
        shift: f64,
    },
    /// A exp(−(ln r − c)²/(2w²)).
    LogGaussian {
        center: f64,
        width: f64,
        #[serde(default = "one")]
        amplitude: f64,
    },
    /// Log-Gaussian scaled to the D-norm of the canonical bubble, optionally
    /// with its tangent components removed; `renormalize` then restores the D-norm.
    Bump {
        center: f64,
        width: f64,
        #[serde(default)]
        orthogonalize: bool,
        #[serde(default)]
        renormalize: bool,
    },
    /// exp(−(ln r − c)²/(2w²)) (1 + tilt·cosψ).
    AxisymBump {
        center: f64,
        width: f64,
        tilt: f64,
    },
    /// (1 + |x + R e₁|²/ℓ²)^{−power} with R = e^{log_shift}, ℓ = width_fraction·R,
    /// scaled to unit D-norm.
    TranslatedBump {
        log_shift: f64,
        width_fraction: f64,
        #[serde(default = "six")]
        power: f64,
    },
    /// V + ε ζ with V the canonical bubble and ζ the normalized bump.
    Perturbed {
        center: f64,
        width: f64,
        eps: f64,
        #[serde(default)]
        orthogonalize: bool,
    },
    /// Canonical bubble times the smooth cutoff of the ball of radius `radius`.
    MollifiedBubble {
        #[serde(default = "one")]
        scale: f64,
        radius: f64,
    },
    /// A field saved in the snapshot format.
    Snapshot { path: String },
}

fn one() -> f64 {
    1.0
}
fn six() -> f64 {
    6.0
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Settings {
    /// Family size (stability-scan) or grid resolution (ineq-const).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_symmetric: Option<bool>,
    /// Explicit ε schedule.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<Vec<f64>>,
    /// log10 range and count of a log-spaced ε schedule.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_log10: Option<(f64, f64)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_count: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub basis: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variants: Option<Vec<EmbeddingVariant>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub homogeneity_scale: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub big_c1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cases: Option<Vec<u8>>,
    /// Exponents per case, aligned with `cases`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exponents: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probes: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probe_centers: Option<(f64, f64)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probe_width: Option<f64>,
    /// Repeat the computation on a refined grid and report the change.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub refine: Option<bool>,
    /// thm5: `sweep` (Q, N, residual×‖ρ‖ against ε) or `distance`
    /// (residual against ‖u − P_u‖).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variant: Option<String>,
}

impl Settings {
    pub fn eps_schedule(&self) -> Result<Vec<f64>> {
        if let Some(e) = &self.eps {
            return Ok(e.clone());
        }
        match (self.eps_log10, self.eps_count) {
            (Some((lo, hi)), Some(c)) => Ok(crate::optimize::logspace(lo, hi, c)),
            _ => Err(CknError::config(
                "settings.eps",
                "give `eps` or both `eps_log10` and `eps_count`",
            )),
        }
    }

    pub fn basis_size(&self) -> usize {
        self.basis.unwrap_or(DEFAULT_BASIS)
    }
}

/// An acceptance bound on one scalar output: a bare number is an upper bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Tolerance {
    Max(f64),
    Bound(Bound),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bound {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max: Option<f64>,
    /// Strict lower bound.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub above: Option<f64>,
    /// Relative window around `target`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rel: Option<f64>,
}

impl Tolerance {
    pub fn admits(&self, v: f64) -> bool {
        match *self {
            Tolerance::Max(m) => v <= m,
            Tolerance::Bound(b) => {
                b.min.is_none_or(|m| v >= m)
                    && b.max.is_none_or(|m| v <= m)
                    && b.above.is_none_or(|m| v > m)
                    && match (b.target, b.rel) {
                        (Some(t), Some(r)) => (v - t).abs() <= r * t.abs(),
                        (Some(t), None) => v == t,
                        _ => true,
                    }
            }
        }
    }

    pub fn describe(&self) -> String {
        match *self {
            Tolerance::Max(m) => format!("<= {}", num(m)),
            Tolerance::Bound(b) => {
                let mut parts = Vec::new();
                if let Some(m) = b.min {
                    parts.push(format!(">= {}", num(m)));
                }
                if let Some(m) = b.above {
                    parts.push(format!("> {}", num(m)));
                }
                if let Some(m) = b.max {
                    parts.push(format!("<= {}", num(m)));
                }
                if let Some(t) = b.target {
                    parts.push(format!("{} within rel {}", num(t), num(b.rel.unwrap_or(0.0))));
                }
                parts.join(", ")
            }
        }
    }
}

fn num(x: f64) -> String {
    if x == 0.0 || (1e-3..1e4).contains(&x.abs()) {
        x.to_string()
    } else {
        format!("{x:e}")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub id: String,
    pub operation: Operation,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub tol_profile: TolProfile,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub params: Vec<ParamTuple>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub hat: Vec<HatTuple>,
    #[serde(default)]
    pub grid: GridSettings,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub fields: Vec<FieldSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<FamilySpec>,
    #[serde(default)]
    pub settings: Settings,
    /// Bounds on named scalar outputs; a violated bound makes the run fail
    /// with an invariant violation after the record is written.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub tolerances: BTreeMap<String, Tolerance>,
}

impl ExperimentConfig {
    pub fn minimal(id: impl Into<String>, operation: Operation) -> Self {
        ExperimentConfig {
            id: id.into(),
            operation,
            seed: 0,
            tol_profile: TolProfile::Strict,
            params: Vec::new(),
            hat: Vec::new(),
            grid: GridSettings::default(),
            fields: Vec::new(),
            family: None,
            settings: Settings::default(),
            tolerances: BTreeMap::new(),
        }
    }

    /// Config for a single tuple with the stock inputs of each operation, as
    /// used by the inline command-line form.
    pub fn with_defaults(operation: Operation, params: Option<ParamTuple>, hat: Option<HatTuple>) -> Self {
        let mut cfg = ExperimentConfig::minimal(operation.name(), operation);
        cfg.params.extend(params);
        cfg.hat.extend(hat);
        let s = &mut cfg.settings;
        let bump = FieldSpec::Bump {
            center: 0.5,
            width: 0.5,
            orthogonalize: true,
            renormalize: true,
        };
        match operation {
            Operation::Constants | Operation::SpectralGap => {}
            Operation::TransformCheck | Operation::ChainCheck => {
                cfg.fields = vec![
                    FieldSpec::Bubble {
                        scale: 1.0,
                        factor: 1.0,
                        shift: 0.0,
                    },
                    FieldSpec::LogGaussian {
                        center: 0.0,
                        width: 0.8,
                        amplitude: 1.0,
                    },
                    FieldSpec::AxisymBump {
                        center: 0.0,
                        width: 0.8,
                        tilt: 0.4,
                    },
                ]
            }
            Operation::Project | Operation::AltCheck => {
                cfg.fields = vec![FieldSpec::Perturbed {
                    center: 0.5,
                    width: 0.5,
                    eps: 0.05,
                    orthogonalize: false,
                }];
                if operation == Operation::AltCheck {
                    s.c1 = Some(0.5);
                    s.big_c1 = Some(2.0);
                }
            }
            Operation::StabilityScan => {
                cfg.family = Some(FamilySpec {
                    kind: crate::stability::FamilyKind::RandomBumps,
                    center: 0.0,
                    width: 0.5,
                    eps_min: 1e-2,
                    eps_max: 1e-1,
                    orthogonalize: true,
                    bumps: 3,
                    seed: 0,
                });
                s.samples = Some(30);
            }
            Operation::SlopeFit | Operation::Thm5 => {
                cfg.fields = vec![bump];
                s.eps_log10 = Some((-3.0, -1.0));
                s.eps_count = Some(if operation == Operation::Thm5 { 5 } else { 8 });
            }
            Operation::EmbeddingCheck => {
                cfg.fields = vec![FieldSpec::MollifiedBubble {
                    scale: 1.0,
                    radius: 1.0,
                }];
            }
            Operation::IneqConst => {
                s.cases = Some(vec![1]);
                s.exponents = Some(vec![vec![2.5]]);
            }
        }
        cfg
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let value: toml::Value = toml::from_str(text).map_err(|e| CknError::config("", e.message().to_string()))?;
        let cfg: ExperimentConfig = serde_path_to_error::deserialize(value).map_err(|e| {
            let mut path = e.path().to_string();
            let message = e.inner().to_string();
            // name the missing key itself, not only its parent table
            if let Some(rest) = message.strip_prefix("missing field `") {
                if let Some(field) = rest.split('`').next() {
                    path = if path == "." || path.is_empty() {
                        field.to_string()
                    } else {
                        format!("{path}.{field}")
                    };
                }
            }
            CknError::config(path, message)
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CknError::config(path.display().to_string(), e.to_string()))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| CknError::config("", e.to_string()))
    }

    /// Structural checks that do not depend on the numerics.
    pub fn validate(&self) -> Result<()> {
        if self.id.trim().is_empty() {
            return Err(CknError::config("id", "must not be empty"));
        }
        if self.seed > i64::MAX as u64 {
            return Err(CknError::config("seed", "must fit in a signed 64-bit integer"));
        }
        if self.family.as_ref().is_some_and(|f| f.seed > i64::MAX as u64) {
            return Err(CknError::config("family.seed", "must fit in a signed 64-bit integer"));
        }
        let needs_params = !matches!(self.operation, Operation::ChainCheck | Operation::IneqConst);
        if needs_params && self.params.is_empty() {
            return Err(CknError::config("params", "at least one parameter tuple is required"));
        }
        if self.operation == Operation::ChainCheck && self.hat.is_empty() {
            return Err(CknError::config("hat", "at least one hat tuple is required"));
        }
        let needs_fields = matches!(
            self.operation,
            Operation::TransformCheck
                | Operation::Project
                | Operation::SlopeFit
                | Operation::ChainCheck
                | Operation::EmbeddingCheck
                | Operation::Thm5
                | Operation::AltCheck
        );
        if needs_fields && self.fields.is_empty() {
            return Err(CknError::config("fields", "at least one field is required"));
        }
        if self.operation == Operation::StabilityScan && self.family.is_none() {
            return Err(CknError::config("family", "stability-scan needs a family"));
        }
        if self.operation == Operation::AltCheck && (self.settings.c1.is_none() || self.settings.big_c1.is_none()) {
            return Err(CknError::config("settings.c1", "alt-check needs c1 and big_c1"));
        }
        if self.operation == Operation::IneqConst {
            let cases = self.settings.cases.as_ref().map_or(0, |c| c.len());
            let exps = self.settings.exponents.as_ref().map_or(0, |e| e.len());
            if cases == 0 || cases != exps {
                return Err(CknError::config(
                    "settings.exponents",
                    "give one exponent list per entry of `cases`",
                ));
            }
        }
        if let Some(v) = &self.settings.variant {
            if v != "sweep" && v != "distance" {
                return Err(CknError::config("settings.variant", format!("unknown variant {v:?}")));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const CONSTANTS: &str = r#"
id = "constants-3d"
operation = "constants"

[[params]]
n = 3
p = 2.0
a = 0.0
b = 0.0
"#;

    #[test]
    fn parses_and_round_trips() {
        let cfg = ExperimentConfig::from_toml(CONSTANTS).unwrap();
        assert_eq!(cfg.operation, Operation::Constants);
        let again = ExperimentConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(cfg, again);
    }

    #[test]
    fn missing_field_is_named() {
        let text = CONSTANTS.replace("p = 2.0\n", "");
        match ExperimentConfig::from_toml(&text) {
            Err(CknError::Config { path, message }) => {
                assert_eq!(path, "params[0].p");
                assert!(message.contains("`p`"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_keys_rejected() {
        let text = format!("{CONSTANTS}\n[settings]\nbogus = 1\n");
        assert!(matches!(ExperimentConfig::from_toml(&text), Err(CknError::Config { .. })));
    }

    #[test]
    fn tolerance_forms() {
        let t: BTreeMap<String, Tolerance> =
            toml::from_str("a = 1e-6\nb = { target = 2.0, rel = 0.1 }\nc = { above = 0.0 }").unwrap();
        assert!(t["a"].admits(1e-7) && !t["a"].admits(1e-5));
        assert!(t["b"].admits(2.15) && !t["b"].admits(2.25));
        assert!(t["c"].admits(1e-300) && !t["c"].admits(0.0));
    }
}
