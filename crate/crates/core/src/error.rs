use thiserror::Error;

/// Errors shared by all numerical modules.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// The q-series hit the hard term cap before reaching the requested
    /// tolerance. Signals a pathological modular parameter (Im tau too small).
    #[error("theta series did not converge within {max_terms} terms (Im tau too small?)")]
    NonConvergence { max_terms: usize },

    /// An argument came too close to the singular set of the function being
    /// evaluated. `what` names the offending argument or term.
    #[error("{what}: distance {dist:.3e} to the singular set is below the threshold")]
    NearSingular { what: String, dist: f64 },

    /// Im tau must be strictly positive.
    #[error("invalid modular parameter: Im tau must be strictly positive (got {im})")]
    InvalidTau { im: f64 },

    /// A branch-tracking step rotated a factor by more than pi/2 even after
    /// maximal refinement; the path runs into a zero of a theta factor.
    #[error("branch transport failed: step crosses (or touches) a singularity")]
    BranchJump,

    /// Contour construction was given inconsistent geometry.
    #[error("invalid contour geometry: {0}")]
    Geometry(String),

    /// Adaptive quadrature could not reach the requested tolerance.
    #[error("quadrature failure: error estimate {err:.3e} exceeds tolerance {tol:.3e}")]
    QuadratureFailure { tol: f64, err: f64 },

    /// A problem configuration failed validation.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, Error>;
