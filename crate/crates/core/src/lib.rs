//! Numerical instantiation of trace and index formulas for Dirac-Schrodinger
//! operators `D = i*dslash + A` on odd-dimensional Euclidean space, specialized
//! to finite-dimensional Hermitian matrix potentials.
//!
//! The crate provides:
//! - minimal Clifford representations and signed trace identities ([`clifford`]),
//! - matrix potential fields, cutoff interpolations and hypothesis audits
//!   ([`potential`]),
//! - deterministic simplex/sphere/space quadrature ([`quadrature`]),
//! - the heat-kernel trace formula and its large-time index limit
//!   ([`heat_trace`]),
//! - the surface (Callias-style) index integral ([`callias`]),
//! - evolution systems for one-parameter Hermitian generators ([`evolution`]),
//! - winding-number indices of loop unitaries with degree oracles
//!   ([`witten_ds`]),
//! - a one-dimensional lattice resolvent oracle ([`oned_oracle`]).
//!
//! Everything is deterministic by construction: integration nodes are fixed by
//! the rule parameters, Monte Carlo fallbacks are seeded, and reductions happen
//! in a fixed order, so repeated runs are bitwise identical.

pub mod callias;
pub mod clifford;
pub mod error;
pub mod evolution;
pub mod heat_trace;
pub mod linalg;
pub mod oned_oracle;
pub mod potential;
pub mod quadrature;
pub mod report;
pub mod witten_ds;

pub use error::CoreError;
pub use linalg::CMatrix;
