//! Numerical core for normalised ground states of the mass-critical
//! Kirchhoff functional
//!
//! `E(u) = a∫|∇u|² + (b/2)(∫|∇u|²)² + ∫V u² − (N/(N+4)) β* ∫|u|^{2+8/N}`
//!
//! on bounded domains with a trapping potential, together with the
//! asymptotic diagnostics used to study concentration as `a → 0`.

// `!(x > 0.0)` also rejects NaN; band and stencil loops index several arrays.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod asymptotics;
pub mod banded;
pub mod domain_potential;
pub mod energy;
pub mod minimizer;
pub mod error;
pub mod numeric;
pub mod scalar_field;

pub use error::{Error, Result};
pub use scalar_field::{closed_form_1d, solve_ground_state, RadialProfile, SharpConstants, ShootingConfig};
