//! Numerical laboratory for the radial focusing energy-critical wave equation
//! `dtt u = Delta u + |u|^(4/(N-2)) u` at the ground-state energy threshold
//! (N = 3, 4, 5).
//!
//! The crate evaluates the Aubin-Talenti ground state W and its variational
//! constants, computes the spectrum of the linearized operator around W,
//! builds the exponential-series approximate solutions seeded by the unstable
//! eigenmode, evolves radial states in time with outcome classification
//! (convergence to W, dispersal, finite-time blow-up), and verifies the
//! modulation and virial identities that organize the threshold dynamics.
//!
//! All numerics are generic over the scalar type through [`real::Real`]
//! (`f32` or `f64`); the aliases at the crate root fix `f64`, which is what
//! the shipped binaries and the quantitative tolerances assume.

pub mod diagnostics;
pub mod dim;
pub mod error;
pub mod evolver;
pub mod field;
pub mod grid;
pub mod ground_state;
pub mod modulation;
pub mod numerics;
pub mod real;
pub mod series;
pub mod spectrum;

pub use dim::Dimension;
pub use real::Real;

/// Default scalar type of the shipped tools.
pub type Scalar = f64;
/// Radial grid over the default scalar.
pub type Grid = grid::RadialGrid<Scalar>;
/// Radial field over the default scalar.
pub type Field = field::RadialField<Scalar>;
/// Linearized operator over the default scalar.
pub type Operator = spectrum::LinearizedOperator<Scalar>;
/// Ground eigenpair over the default scalar.
pub type Spectral = spectrum::SpectralPair<Scalar>;
/// Approximate-solution bundle over the default scalar.
pub type Approx = series::ApproxSolution<Scalar>;
/// Solver configuration over the default scalar.
pub type Config = evolver::SolverConfig<Scalar>;
