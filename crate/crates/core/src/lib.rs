//! Simulator for fluid flow in a freezing deformable porous medium.
//!
//! The unknowns are the capillary pressure `p`, the relative volume change
//! `w`, the liquid fraction `χ` and the absolute temperature `θ` on an
//! interval. [`solver`] advances them by operator splitting,
//! [`galerkin`] provides an independent spectral reference solution and
//! [`diagnostics`] evaluates energy, entropy and positivity functionals.

pub mod constitutive;
pub mod diagnostics;
pub mod error;
pub mod galerkin;
pub mod geometry;
pub mod scenario;
pub mod solver;
pub mod tridiag;

pub use constitutive::{validate_hypotheses, ConstitutiveModel, MaterialParams};
pub use error::{Error, Result, SubStep};
pub use geometry::{build_domain, BoundarySignal, Domain1D, DomainConfig, Profile};
pub use solver::{FieldState, StepReport};
