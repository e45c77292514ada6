//! Deterministic quadrature: simplex rules, sphere product rules, and
//! truncated rules over `R^d` with tail bounds.

pub mod gauss;
pub mod simplex;
pub mod sphere;
pub mod spatial;

pub use gauss::{gauss_legendre, gauss_legendre_on, sphere_area};
pub use simplex::{SimplexKind, SimplexRule};
pub use spatial::{space_integrate, RadialRule, SpaceIntegral, SpatialRule};
pub use sphere::{sphere_integrate, SphereRule};
