//! Scalar fields on the round 2-sphere: grids, quadrature, harmonic
//! transforms, Laplacian, and integral functionals.

pub mod cap;
pub mod grid;
pub mod legendre;
pub mod spectral;

pub use cap::{geodesic_cap_integral, CapEvaluator};
pub use grid::{gauss_legendre, integrate, integrate_product, GridField, SphereGrid};
pub use spectral::{
    analyze, analyze_to, eval_at, eval_point, grad_energy, laplacian, synthesize, SpectralField,
};
