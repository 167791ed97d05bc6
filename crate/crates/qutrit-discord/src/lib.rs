//! Quantum and classical correlations of bipartite qutrit states, together
//! with a simulator for the driven two-spin (electron + nuclear) system used
//! to prepare and tomograph them.
//!
//! The crate has four layers:
//!
//! * [`qudit`]: density matrices, partial trace/transpose, entropy, trace
//!   norm, fidelity on arbitrary bipartite dimensions.
//! * [`correlations`]: mutual information, classical correlation via an
//!   optimized projective measurement, quantum discord, negativity, and the
//!   one-parameter isotropic family the other layers target.
//! * [`nv`]: the nine-level two-spin Hamiltonian, selective two-level pulses,
//!   inhomogeneous dephasing, and the three-stage sequence that turns a
//!   polarized initial state into an isotropic state of tunable purity.
//! * [`tomography`]: photoluminescence readout, the rate-calibration and
//!   state-measurement linear systems, maximum-likelihood reconstruction,
//!   Monte Carlo uncertainty, and purity-parameter estimation.
//!
//! The `qutrit-discord` binary exposes the pipeline as `curves`, `roundtrip`
//! and `reconstruct` subcommands.

pub mod book;
pub mod cli;
pub mod correlations;
pub mod io;
pub mod nv;
pub mod optimize;
pub mod qudit;
pub mod tomography;

use num_complex::Complex64;

/// Complex scalar used throughout.
pub type C64 = Complex64;
/// Dynamically sized complex matrix.
pub type CMatrix = nalgebra::DMatrix<Complex64>;
/// Dynamically sized complex column vector.
pub type CVector = nalgebra::DVector<Complex64>;

/// Numerical tolerances shared by validation and the test suite.
///
/// Each constant is pinned here rather than scattered through call sites so
/// the acceptance tests and the library agree by construction.
pub mod tol {
    /// Maximum entrywise deviation from self-adjointness accepted by
    /// [`crate::qudit::DensityMatrix::new`].
    pub const HERMITICITY: f64 = 1e-12;
    /// Maximum deviation of the trace from one.
    pub const TRACE: f64 = 1e-10;
    /// Most negative eigenvalue accepted as "positive semidefinite up to
    /// rounding". Anything below this is rejected rather than clipped.
    pub const MIN_EIGENVALUE: f64 = -1e-10;
    /// Eigenvalues below this are treated as exactly zero inside entropy
    /// sums (the x log x -> 0 limit).
    pub const EIGENVALUE_ZERO: f64 = 1e-12;
    /// Maximum deviation from unit norm accepted for pure states.
    pub const UNIT_NORM: f64 = 1e-12;
    /// Maximum entrywise Gram-matrix deviation accepted for a measurement
    /// basis.
    pub const BASIS_GRAM: f64 = 1e-10;
    /// Two optimizer candidates within this of each other are considered
    /// tied; the lexicographically smaller parameter vector wins.
    pub const OPTIMIZER_TIE: f64 = 1e-12;
    /// Measurement outcomes with probability below this contribute nothing
    /// to conditional entropy.
    pub const OUTCOME_PROBABILITY: f64 = 1e-12;
    /// Scan resolution for the electron-polarization parameter in the
    /// rate-calibration solve, refined locally afterwards.
    pub const POLARIZATION_SCAN_STEP: f64 = 1e-3;
    /// Interval width at which golden-section searches stop.
    pub const GOLDEN_SECTION: f64 = 1e-6;
    /// Floor applied to the likelihood denominator in the maximum-likelihood
    /// objective.
    pub const LIKELIHOOD_DENOMINATOR_FLOOR: f64 = 1e-6;
    /// Floor applied to propagated element uncertainties before they are
    /// used as weights.
    pub const SIGMA_FLOOR: f64 = 1e-9;
    /// Placeholder uncertainty attached to noiseless simulated records; small
    /// enough that perturbations of this size vanish in f64 rounding at
    /// typical count scales, keeping the record invariant "sigmas > 0".
    pub const NOISELESS_SIGMA: f64 = 1e-30;
}

/// Library-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: String, got: String },
    #[error("matrix has non-finite entries")]
    NonFinite,
    #[error("matrix is not Hermitian (max deviation {deviation:.3e})")]
    NotHermitian { deviation: f64 },
    #[error("trace deviates from one by {deviation:.3e}")]
    TraceNotOne { deviation: f64 },
    #[error("matrix is not positive semidefinite (min eigenvalue {min_eigenvalue:.3e})")]
    NotPositive { min_eigenvalue: f64 },
    #[error("state vector norm deviates from one by {deviation:.3e}")]
    NotNormalized { deviation: f64 },
    #[error("vectors do not form an orthonormal basis (max Gram deviation {deviation:.3e})")]
    NotOrthonormal { deviation: f64 },
    #[error("invalid parameter {name}: {message}")]
    InvalidParameter { name: &'static str, message: String },
    #[error("invalid pulse transition ({m},{n}): {reason}")]
    InvalidTransition { m: usize, n: usize, reason: String },
    #[error("invalid record: {0}")]
    InvalidRecord(String),
    #[error("optimizer failed to converge within {iterations} iterations (best value {best:.6e})")]
    OptimizerFailed { iterations: u64, best: f64 },
    #[error("linear system is singular or near-singular: {0}")]
    SingularSystem(String),
    #[error("solution is unphysical: {0}")]
    UnphysicalSolution(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code the CLI maps this error to: 1 for input or
    /// validation problems, 2 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::OptimizerFailed { .. }
            | Error::SingularSystem(..)
            | Error::UnphysicalSolution(..) => 2,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
