//! Simulator and verification suite for the normalized prescribed-curvature
//! flow u_t = alpha f - K on the 2-sphere, for conformal metrics
//! g = e^{2u} c.
//!
//! Crate layout:
//! - [`sphere`]: grids, quadrature, spherical-harmonic transforms
//! - [`conformal`]: curvature, volume, energies, Moebius gauge
//! - [`curvature`]: the prescribed function f and its hypothesis checks
//! - [`flow`]: time integration, termination, concentration detection
//! - [`diagnostics`]: the per-step identity/inequality audit ledger
//! - [`io`]: run configuration and the on-disk output formats

pub mod conformal;
pub mod curvature;
pub mod diagnostics;
pub mod error;
pub mod flow;
pub mod io;
pub mod rng;
pub mod selftest;
pub mod sphere;

pub use error::{GcError, GcResult};
