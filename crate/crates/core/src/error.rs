//! Error type shared by every module of the crate.

use std::fmt;

/// One of the admissibility inequalities constraining the scaling constants.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Inequality {
    /// `nu_minus / sqrt(delta) <= 1 / (84.33 (1 + delta^2))`.
    NuMinusUpper,
    /// `nu_plus / sqrt(delta) <= sqrt(2) / 3`.
    NuPlusUpper,
    /// `nu_plus / sqrt(delta) > sqrt(1 + delta^2) / (2 * 6^(1/4))`.
    NuPlusLower,
    /// `2 a_plus^5 / 3 < 1`.
    InnerContraction,
}

impl fmt::Display for Inequality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let text = match self {
            Inequality::NuMinusUpper => "nu_minus/sqrt(delta) <= 1/(84.33 (1+delta^2))",
            Inequality::NuPlusUpper => "nu_plus/sqrt(delta) <= sqrt(2)/3",
            Inequality::NuPlusLower => "nu_plus/sqrt(delta) > sqrt(1+delta^2)/(2 6^(1/4))",
            Inequality::InnerContraction => "2 a_plus^5 / 3 < 1",
        };
        f.write_str(text)
    }
}

/// Errors raised by the library.
#[derive(Debug, Clone, thiserror::Error)]
pub enum Error {
    /// An input lies outside the domain of the requested operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A scaling constant violates one admissibility inequality.
    #[error("admissibility violated: {inequality} (measured {value:.6e}, bound {bound:.6e})")]
    Admissibility {
        inequality: Inequality,
        value: f64,
        bound: f64,
    },

    /// The slow frame loses its two complex pairs of eigenvalues.
    #[error("degenerate slow frame at B0 = {b0}: eps^2 B0^2 (1+delta^2)^2 = {lhs:.6e} exceeds A* = {a_star:.6e}")]
    DegenerateFrame { b0: f64, lhs: f64, a_star: f64 },

    /// A square root of a negative quantity was requested.
    #[error("negative radicand {0:.6e}: state is off the zero level set of the first integral")]
    NegativeRadicand(f64),

    /// Tangent parameters lie outside their ball.
    #[error("tangent parameters of norm {norm:.6e} exceed the ball radius {radius:.6e}")]
    BallViolation { norm: f64, radius: f64 },

    /// The Picard contraction constant is not below one.
    #[error("Picard contraction constant {constant:.6} is not below 1")]
    ContractionViolated { constant: f64 },

    /// An iteration did not reach its tolerance.
    #[error("no convergence after {iterations} iterations (last delta {last:.3e})")]
    NonConvergence {
        iterations: usize,
        last: f64,
        history: Vec<f64>,
    },

    /// The adaptive integrator could not keep the local error under control.
    #[error("step size underflow at x = {x}")]
    StepUnderflow { x: f64, state: Vec<f64> },

    /// The integrated state stopped being finite.
    #[error("non-finite state at x = {x}")]
    NonFinite { x: f64 },

    /// The closed-form matching formula is singular.
    #[error("closed-form matching is singular at rho = {rho} (2 rho^4 = 1)")]
    SingularMatching { rho: f64 },

    /// Newton iteration failed.
    #[error("Newton iteration diverged after {iterations} iterations (residual {residual:.3e}, condition {condition:.3e})")]
    NewtonDivergence {
        iterations: usize,
        residual: f64,
        condition: f64,
    },

    /// The stitched profile has a gap at a junction.
    #[error("junction continuity failure: relative gap {gap:.3e}")]
    JunctionContinuity { gap: f64 },

    /// A linear solve hit an exactly singular pivot.
    #[error("singular matrix at pivot {0}")]
    Singular(usize),

    /// The right-hand side of a pseudo-inverse is not orthogonal to the kernel.
    #[error("solvability violated: integral of f B* is {defect:.3e} (tolerance {tolerance:.3e})")]
    Solvability { defect: f64, tolerance: f64 },

    /// The discretisation grid cannot resolve the operator.
    #[error("grid too coarse: spacing {spacing} exceeds {limit}")]
    GridTooCoarse { spacing: f64, limit: f64 },

    /// A tail is too short for a rate fit.
    #[error("insufficient tail for a decay fit: {0}")]
    InsufficientTail(String),

    /// A sweep does not span enough values.
    #[error("insufficient sweep span: {0}")]
    InsufficientSpan(String),

    /// Unknown symmetry identifier.
    #[error("unknown symmetry '{0}' (expected negA, negB, negAB or reversibility)")]
    UnknownSymmetry(String),

    /// The system at epsilon = 0 is singular.
    #[error("epsilon = 0 makes the system singular; use dynamics::singular_limit instead")]
    SingularEpsilon,

    /// Reading or writing a data file failed.
    #[error("input/output error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl Error {
    /// True when the error stems from invalid input rather than a numerical failure.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Domain(_)
                | Error::Admissibility { .. }
                | Error::BallViolation { .. }
                | Error::UnknownSymmetry(_)
                | Error::SingularEpsilon
                | Error::InsufficientSpan(_)
                | Error::Solvability { .. }
                | Error::GridTooCoarse { .. }
                | Error::Io(_)
        )
    }
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
