use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix has rank zero and no full-rank decomposition")]
    ZeroMatrix,

    #[error("matrix is not symmetric (asymmetry {asymmetry:.3e})")]
    NotSymmetric { asymmetry: f64 },

    #[error("eigenvalue iteration did not converge")]
    EigenFailure,

    #[error("matrix A is singular (rank {rank} < {n})")]
    SingularA { rank: usize, n: usize },

    #[error("pencil (E, A) is not regular")]
    NotRegular,

    #[error("consistency space is trivial")]
    TrivialConsistency,

    #[error("internal numerical failure: {0}")]
    Internal(String),

    #[error("rank precondition violated: rank(A-B) = {rank_diff}, rank(A) - rank(B) = {expected}")]
    RankMismatch { rank_diff: usize, expected: isize },

    #[error("A + A^T is not positive definite (min eigenvalue {min_eig:.3e})")]
    NotPD { min_eig: f64 },

    #[error("B + B^T is not positive semidefinite (min eigenvalue {min_eig:.3e})")]
    NotPSD { min_eig: f64 },

    #[error("no Finsler multipliers found in [0, 1e12]")]
    Infeasible,

    #[error("no common Lyapunov matrix found after {iterations} iterations (inconclusive)")]
    CertificateNotFound { iterations: usize },

    #[error("incomplete model: {0}")]
    IncompleteModel(String),

    #[error("decomposition mismatch: {0}")]
    DecompositionMismatch(String),

    #[error("method not applicable: {0}")]
    MethodMismatch(String),

    #[error("initial state is {distance:.3e} away from the consistency space of mode {mode}")]
    InconsistentInitialState { mode: usize, distance: f64 },

    #[error("invalid jump {from} -> {to} at t = {t}: {reason}")]
    InvalidJump {
        from: usize,
        to: usize,
        t: f64,
        reason: String,
    },

    #[error("trajectory does not decay")]
    NoDecay,

    #[error("no admissible epsilon found in (0, 1]")]
    EpsilonNotFound,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
