use thiserror::Error;

/// Errors raised by the estimation library.
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),

    #[error("eigendecomposition did not converge for a {dim}x{dim} matrix")]
    EigenNonConvergence { dim: usize },

    #[error("matrix is not positive definite (eigenvalue {eigenvalue:e} <= floor {floor:e})")]
    NotPositiveDefinite { eigenvalue: f64, floor: f64 },

    #[error("invalid constraint set: {0}")]
    InvalidConstraints(String),

    #[error("{stage}: iteration cap of {iterations} exceeded (best objective {best:e})")]
    IterationCapExceeded {
        stage: &'static str,
        iterations: usize,
        best: f64,
    },

    #[error("{stage}: line search stalled at step {step:e} (decrement {decrement:e})")]
    LineSearchStall {
        stage: &'static str,
        step: f64,
        decrement: f64,
    },

    #[error("relaxation requires an infeasible problem, but mu = {mu:e}")]
    NotInfeasible { mu: f64 },

    #[error("problem is infeasible (mu = {mu:e}); relaxation is required")]
    Infeasible { mu: f64 },

    #[error("weighted relaxation requires reliability indexes")]
    MissingReliability,

    #[error("amplification factor k = {k} must exceed max(1/d_i) = {min:.6}")]
    KTooSmall { k: f64, min: f64 },

    #[error("amplified data are not infeasible (mu' = {mu:e}); increase k")]
    AmplificationTooWeak { mu: f64 },

    #[error("Frobenius projection did not converge after {iterations} iterations (last change {change:e})")]
    ProjectionNonConvergence { iterations: usize, change: f64 },

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("exponent overflow risk: largest eigenvalue {max_eigenvalue:e} exceeds 700")]
    OverflowRisk { max_eigenvalue: f64 },

    #[error("dual iterates diverge (|lambda| = {lambda_norm:e}); no full-rank solution, re-run the feasibility analysis")]
    NoFullRankSolution { lambda_norm: f64 },

    #[error("invalid POVM: {0}")]
    InvalidPovm(String),

    #[error("outcome probability {probability:e} is negative beyond clip tolerance")]
    NegativeProbability { probability: f64 },

    #[error("invalid rank {rank} for dimension {dim}")]
    InvalidRank { rank: usize, dim: usize },

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// Tags an error with the pipeline stage that produced it.
    pub fn at(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// Strips stage tags.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
