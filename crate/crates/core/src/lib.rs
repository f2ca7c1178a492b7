//! Numerical laboratory for global attractors of the reaction-diffusion
//! problem `u_t − Δu + f(u) = h` with Dirichlet conditions, for merely
//! continuous nonlinearities whose solutions need not be unique.
//!
//! * [`msflow`]: multivalued semiflows over any [`msflow::State`].
//! * [`spectral`]: sine-basis Galerkin discretization and time stepping.
//! * [`nonlinearity`]: reaction terms, certified constants, branching.
//! * [`equilibria`]: stationary solutions, spectra, regularity.
//! * [`attractor`]: dissipativity bounds, manifolds, the connection graph.
//! * [`io`]: columnar trajectory and energy files.

pub mod attractor;
pub mod equilibria;
pub mod error;
pub mod io;
pub mod msflow;
pub mod nonlinearity;
pub mod spectral;

pub use error::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub use msflow::{Metric, SetOfStates, State, TrajectoryBundle, TrajectoryKind, TrajectorySample};
pub use nonlinearity::{BranchMode, BranchPolicy, NonlinearTerm};
pub use spectral::{
    make_basis, Domain, GalerkinBundle, GalerkinProblem, IntegratorOptions, Scheme, SpectralBasis,
    SpectralField,
};
