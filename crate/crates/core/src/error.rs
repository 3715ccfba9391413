use thiserror::Error;

/// Errors raised anywhere in the preconditioner chain.
#[derive(Debug, Error)]
pub enum DdError {
    #[error("dimension mismatch in {op}: expected {expected}, got {got}")]
    DimMismatch {
        op: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("matrix is not symmetric positive definite: pivot {pivot} = {value:e}")]
    NotSpd { pivot: usize, value: f64 },
    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),
    #[error("singular matrix at pivot {0}")]
    Singular(usize),
    #[error("not a 0/1 restriction matrix: {0}")]
    NotRestriction(String),
    #[error("assumption violated ({assumption}): {detail}")]
    AssumptionViolation {
        assumption: &'static str,
        detail: String,
    },
    #[error("invalid partition: {0}")]
    Partition(String),
    #[error("invalid problem: {0}")]
    Problem(String),
    #[error("{stage}: no convergence after {iterations} iterations (relative residual {relres:e})")]
    NoConvergence {
        stage: String,
        iterations: usize,
        relres: f64,
    },
    #[error("{stage}: Krylov breakdown, operator not positive definite (p'Ap = {curvature:e})")]
    Breakdown { stage: String, curvature: f64 },
    #[error("dense oracle cap exceeded: dimension {dim} > {cap}")]
    OracleCap { dim: usize, cap: usize },
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("{stage}: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<DdError>,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl DdError {
    /// Attach a stage name; Krylov failures get it in place, anything else is wrapped.
    pub fn at_stage(self, name: &str) -> Self {
        match self {
            DdError::NoConvergence { stage, iterations, relres } => DdError::NoConvergence {
                stage: format!("{name} ({stage})"),
                iterations,
                relres,
            },
            DdError::Breakdown { stage, curvature } => DdError::Breakdown {
                stage: format!("{name} ({stage})"),
                curvature,
            },
            other => DdError::Stage {
                stage: name.to_string(),
                source: Box::new(other),
            },
        }
    }

    /// Failures of the numerics (factorization, convergence) rather than of the input.
    pub fn is_numerical(&self) -> bool {
        match self {
            DdError::NotSpd { .. } | DdError::Singular(_) | DdError::NoConvergence { .. } | DdError::Breakdown { .. } => true,
            DdError::Stage { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, DdError>;

pub(crate) fn check_dim(op: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(DdError::DimMismatch { op, expected, got })
    }
}
