//! Numerical laboratory for the Caffarelli–Kohn–Nirenberg inequality: sharp
//! constants, extremal profiles, weighted functionals, the radial power maps,
//! manifold projection, stability experiments and critical-point diagnostics.

pub mod bubble;
pub mod critical;
pub mod error;
pub mod experiment;
pub mod field;
pub mod functionals;
pub mod grid;
pub mod manifold;
pub mod optimize;
pub mod params;
pub mod quadrature;
pub mod snapshot;
pub mod special;
pub mod stability;
pub mod transforms;

pub use error::{CknError, Result};
pub use field::{AnalyticShape, AxisymField, Field, Measure, RadialProfile};
pub use grid::{AngularRule, GridSpec, RadialGrid};
pub use params::{derive_hat_params, derive_params, sharp_constant, CknParams, HatParams};
