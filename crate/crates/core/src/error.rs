use thiserror::Error;

/// Failure modes of the eigenpair iterations.
#[derive(Debug, Clone, PartialEq)]
pub enum SolverFailure {
    /// Maximum iteration count reached with the step size still above tolerance.
    Stalled { iterations: usize, last_diff: f64 },
    /// The operator output collapsed below the numerical floor, so the
    /// normalized iteration cannot continue.
    OperatorDegenerate { norm: f64 },
    /// The finite-difference Jacobian of the polish system is singular.
    JacobianSingular,
    /// The damped Newton iteration failed to reduce the residual.
    Diverged { iterations: usize, residual: f64 },
    /// After polishing, the norm maximum moved to a different derivative or
    /// location and the sphere constraint is no longer met.
    NormIndexMigrated { norm_error: f64 },
}

impl std::fmt::Display for SolverFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SolverFailure::Stalled {
                iterations,
                last_diff,
            } => write!(f, "stalled after {iterations} iterations (last step {last_diff:.3e})"),
            SolverFailure::OperatorDegenerate { norm } => {
                write!(f, "operator-degenerate: |Tu| = {norm:.3e}")
            }
            SolverFailure::JacobianSingular => write!(f, "jacobian-singular"),
            SolverFailure::Diverged {
                iterations,
                residual,
            } => write!(f, "diverged after {iterations} iterations (residual {residual:.3e})"),
            SolverFailure::NormIndexMigrated { norm_error } => {
                write!(f, "norm-index-migrated (|norm - rho| = {norm_error:.3e})")
            }
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("{name} = {value} outside {expected}")]
    Domain {
        name: &'static str,
        value: f64,
        expected: &'static str,
    },
    #[error("second kernel derivative is undefined on the diagonal t = s = {0}")]
    KernelDiagonal(f64),
    #[error("quadrature order {0} outside 1..=512")]
    QuadratureOrder(usize),
    #[error("quadrature rule mismatch between operands")]
    RuleMismatch,
    #[error("layer length {got} does not match rule size {expected}")]
    LayerLength { expected: usize, got: usize },
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("non-finite value while evaluating `{context}`")]
    NonFinite { context: String },
    #[error("problem definition invalid: {0}")]
    InvalidProblem(String),
    #[error("solver failed: {0}")]
    Solver(SolverFailure),
    #[error("{0}")]
    Precondition(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
