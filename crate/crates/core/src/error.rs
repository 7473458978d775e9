//! Error types shared across the crate.

use thiserror::Error;

/// Errors from grid and field plumbing.
#[derive(Debug, Error)]
pub enum FieldError {
    /// Two fields were combined that do not live on the same grid.
    #[error("mismatched grids: {0}")]
    MismatchedGrids(&'static str),
    /// A symmetry action needs samples beyond the outer radius and the tail
    /// is too large to extrapolate.
    #[error("rescaled support exits r_max (lambda0 = {lambda0}, tail amplitude {tail_amplitude:e})")]
    ScaleExitsDomain { lambda0: f64, tail_amplitude: f64 },
    /// Grid resolution is insufficient for the requested accuracy.
    #[error("grid too coarse: {0}")]
    GridTooCoarse(String),
    /// I/O failure while reading or writing a field.
    #[error("field io: {0}")]
    Io(#[from] std::io::Error),
    /// Malformed field file.
    #[error("field parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// Errors from the linearized-operator machinery.
#[derive(Debug, Error)]
pub enum SpectrumError {
    /// No negative eigenvalue was found (grid too coarse or domain too small).
    #[error("no negative eigenvalue found")]
    NoNegativeEigenvalue,
    /// The matrix and shooting eigensolvers disagree beyond tolerance.
    #[error("eigensolvers disagree: matrix e0 = {matrix}, shooting e0 = {shooting}")]
    MethodsDisagree { matrix: f64, shooting: f64 },
    /// Resolvent shift too close to the point spectrum.
    #[error("resolvent shift {sigma} within {margin} of e0^2")]
    NearSingular { sigma: f64, margin: f64 },
    /// The constrained Rayleigh minimum came out non-positive.
    #[error("coercivity estimate non-positive: {0}")]
    NonPositiveEstimate(f64),
    /// Linear solve broke down (zero pivot).
    #[error("tridiagonal solve breakdown at row {0}")]
    SolveBreakdown(usize),
}

/// Errors from the approximate-solution builder.
#[derive(Debug, Error)]
pub enum SeriesError {
    /// A resolvent solve failed.
    #[error(transparent)]
    Resolvent(#[from] SpectrumError),
    /// N = 5 series left its convergence domain.
    #[error("series domain violation: max |h/W| = {ratio} at reference time")]
    SeriesDomainViolation { ratio: f64 },
    /// Residual cancellation at a constructed order did not hold.
    #[error("order-{order} cancellation failed: relative residual {rel:e}")]
    CancellationFailed { order: usize, rel: f64 },
    /// All residual norms in the window are below the noise floor.
    #[error("residual norms below noise floor {0:e}")]
    NoiseFloor(f64),
    /// Precondition violated.
    #[error("series precondition: {0}")]
    Precondition(String),
}

/// Errors from the time evolver (numeric blow-up is an outcome, not an error).
#[derive(Debug, Error)]
pub enum EvolveError {
    /// Configuration violates an invariant (CFL, light cone, ...).
    #[error("solver config: {0}")]
    Config(String),
    /// Newton iteration for the discrete ground state failed.
    #[error("discrete ground state Newton did not converge (residual {0:e})")]
    GroundNewton(f64),
}

/// Errors from modulation fitting.
#[derive(Debug, Error)]
pub enum ModulationError {
    /// State too far from the ground state for the implicit-function fit.
    #[error("no modulation root: d = {d} exceeds delta0 = {delta0}")]
    NoRoot { d: f64, delta0: f64 },
    /// Root finder failed to bracket.
    #[error("modulation root finder failed to bracket in [{lo}, {hi}]")]
    NoBracket { lo: f64, hi: f64 },
}

/// Errors from the diagnostics functionals.
#[derive(Debug, Error)]
pub enum DiagnosticsError {
    /// The uncut L^2 functional diverges for this tail (W is not in L^2 for N <= 4).
    #[error("divergent tail: u^2 r^(N-1) has log-slope {slope:.3} at r_max")]
    DivergentTail { slope: f64 },
    /// Not enough samples for a finite-difference check.
    #[error("need at least {need} samples, got {got}")]
    TooFewSamples { need: usize, got: usize },
}
