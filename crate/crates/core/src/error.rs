use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("{context}: row {row} sums to {sum}, not 1 within {tol}")]
    NotADistribution {
        context: &'static str,
        row: usize,
        sum: f64,
        tol: f64,
    },

    #[error("{context}: negative entry {value} at row {row}")]
    NegativeProbability {
        context: &'static str,
        row: usize,
        value: f64,
    },

    #[error("discount factor must lie strictly inside (0,1), got {0}")]
    InvalidGamma(f64),

    #[error("trace decay lambda must lie in [0,1], got {0}")]
    InvalidLambda(f64),

    #[error("behavior chain is not ergodic: {0}")]
    NonErgodic(String),

    #[error("coverage violated at state {state}, action {action}: target probability {pi} > 0 but behavior probability is 0")]
    CoverageViolation {
        state: usize,
        action: usize,
        pi: f64,
    },

    #[error(
        "{what} is singular or near-singular (condition estimate {cond:.3e} exceeds {limit:.1e})"
    )]
    Singular {
        what: &'static str,
        cond: f64,
        limit: f64,
    },

    #[error("M = Phi'*Xi*Phi is rank-deficient; the feature matrix must have full column rank for this quadratic form")]
    RankDeficientM,

    #[error(
        "Lyapunov pair not solvable: {0}; M and -H must have all eigenvalue real parts positive"
    )]
    NotPositiveStable(&'static str),

    #[error("eigenvalue solver failed to converge on {0}")]
    EigenFailure(&'static str),

    #[error("saddle point lies outside the declared domain ({detail}); enlarge the radii")]
    DomainTooSmall { detail: String },

    #[error("empty series passed to {0}")]
    EmptySeries(&'static str),

    #[error("step-size schedule is missing required parameter `{0}`")]
    MissingScheduleParam(&'static str),

    #[error(
        "feature map declares phi_max = {declared} but contains an entry of magnitude {observed}"
    )]
    PhiMaxViolated { declared: f64, observed: f64 },

    #[error("parse error in {file} line {line}: {msg}")]
    Parse {
        file: String,
        line: usize,
        msg: String,
    },

    #[error("unknown environment `{0}`")]
    UnknownEnvironment(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
