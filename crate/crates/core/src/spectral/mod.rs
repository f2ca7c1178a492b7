//! Spectral Galerkin discretization in the Dirichlet sine eigenbasis,
//! with an exponential time integrator and the energy functional.

mod basis;
mod field;
mod problem;

pub use basis::{Domain, SpectralBasis};
pub use field::{project, Norms, SpectralField};
pub use problem::{
    energy_equality_residual, energy_series, galerkin_rhs, EnergyParts, EnergyRecord,
    GalerkinBundle, GalerkinProblem, IntegratorOptions, Scheme,
};

use std::sync::Arc;

use crate::error::Result;

/// Shared basis with the default `4m` quadrature grid.
pub fn make_basis(m: usize, domain: Domain) -> Result<Arc<SpectralBasis>> {
    Ok(Arc::new(SpectralBasis::new(m, domain)?))
}
