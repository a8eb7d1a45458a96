use thiserror::Error;

pub type Result<T> = std::result::Result<T, CknError>;

/// Every failure mode surfaced by the laboratory.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum CknError {
    #[error("parameter region violated: {0}")]
    RegionViolation(String),
    #[error("gamma mismatch: b1 - a1 = {base} but b2 - a2 = {target}")]
    GammaMismatch { base: f64, target: f64 },
    #[error("bad grid specification: {0}")]
    BadGridSpec(String),
    #[error("translations are only admissible when a = 0 (got a = {0})")]
    TranslationForbidden(f64),
    #[error("field carries no gradient data")]
    MissingGradient,
    #[error("field is identically zero: {0}")]
    ZeroField(&'static str),
    #[error("bad exponent {0}")]
    BadExponent(f64),
    #[error("fields live on incompatible grids: {0}")]
    GridMismatch(String),
    #[error("root find failed: {0}")]
    RootFindFailure(String),
    #[error("optimizer stall: {0}")]
    OptimizerStall(String),
    #[error("field lies on the extremal manifold (distance {distance:e})")]
    OnManifold { distance: f64 },
    #[error("family produced no admissible sample")]
    EmptyFamily,
    #[error("degenerate slope fit: {0}")]
    DegenerateFit(String),
    #[error("field is not supported inside the ball of radius {radius}")]
    UnsupportedField { radius: f64 },
    #[error("test basis too small: {0} < 4")]
    BasisTooSmall(usize),
    #[error("perturbation is not orthogonal to the tangent space (max residual {0:e})")]
    NotOrthogonal(f64),
    #[error("field is too far from the manifold: distance {distance:e} exceeds gate {gate:e}")]
    FarFromManifold { distance: f64, gate: f64 },
    #[error("case {case} requires {range}, got {value}")]
    CaseRangeViolation {
        case: u8,
        range: &'static str,
        value: f64,
    },
    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },
    #[error("ledger corrupt at line {line}: {message}")]
    LedgerCorrupt { line: usize, message: String },
    #[error("snapshot format error: {0}")]
    Snapshot(String),
    #[error("invariant violated: {0}")]
    InvariantViolation(String),
    #[error("io error: {0}")]
    Io(String),
}

impl CknError {
    pub(crate) fn region(msg: impl Into<String>) -> Self {
        CknError::RegionViolation(msg.into())
    }

    pub fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        CknError::Config {
            path: path.into(),
            message: message.into(),
        }
    }

    /// Process exit code used by the `ckn` binary.
    pub fn exit_code(&self) -> i32 {
        match self {
            CknError::Config { .. }
            | CknError::RegionViolation(_)
            | CknError::GammaMismatch { .. }
            | CknError::BadGridSpec(_)
            | CknError::CaseRangeViolation { .. }
            | CknError::TranslationForbidden(_) => 2,
            CknError::OptimizerStall(_) | CknError::RootFindFailure(_) => 3,
            CknError::InvariantViolation(_) => 4,
            CknError::Io(_) | CknError::LedgerCorrupt { .. } | CknError::Snapshot(_) => 1,
            _ => 3,
        }
    }
}

impl From<std::io::Error> for CknError {
    fn from(e: std::io::Error) -> Self {
        CknError::Io(e.to_string())
    }
}
