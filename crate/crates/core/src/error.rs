use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("vertex {0} is out of range or not on the cycle")]
    VertexNotOnCycle(usize),

    #[error("generator is not irreducible")]
    NotIrreducible,

    #[error("right-hand side is not centered: pi-mean {0:e}")]
    NotCentered(f64),

    #[error("measure is not invariant: residual {0:e}")]
    NotInvariant(f64),

    #[error("generator is not normalized: equilibrium jump rate {0}")]
    NotNormalized(f64),

    #[error("all rates vanish")]
    ZeroGenerator,

    #[error("more than {0} cycles")]
    CycleBudgetExceeded(usize),

    #[error("too many cycles for grid search: {0}")]
    TooManyCycles(usize),

    #[error("spectrum is ambiguous: second smallest |eigenvalue| = {0:e}")]
    SpectrumAmbiguous(f64),

    #[error("eigenvalue computation did not converge")]
    EigenFailure,

    #[error("direction is not a normalized generator with the given invariant measure")]
    DirectionInvalid,

    #[error("state space too large: {0} vertices")]
    StateSpaceTooLarge(usize),

    #[error("invalid budgets: {0}")]
    BudgetInvalid(String),

    #[error("matrix is singular")]
    SingularMatrix,

    #[error("kernel is the identity")]
    IdentityKernel,

    #[error("invalid tree arcs: {0}")]
    InvalidTrees(String),

    #[error("counterexample search exhausted its grid")]
    SearchExhausted,

    #[error("expected a measure on 3 vertices, found {0}")]
    NotLength3(usize),

    #[error("weights must be strictly positive")]
    NotPositive,

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("consistency check failed for {what}: residual {residual:e}")]
    Consistency { what: &'static str, residual: f64 },

    #[error("did not converge after {0} iterations")]
    NotConverged(usize),
}

impl Error {
    /// Process exit code used by the command-line tool.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::CycleBudgetExceeded(_) | Error::TooManyCycles(_) | Error::StateSpaceTooLarge(_) => 4,
            Error::NotConverged(_)
            | Error::SearchExhausted
            | Error::EigenFailure
            | Error::Consistency { .. }
            | Error::SpectrumAmbiguous(_)
            | Error::SingularMatrix => 3,
            _ => 2,
        }
    }
}
