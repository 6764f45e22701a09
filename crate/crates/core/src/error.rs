use thiserror::Error;

/// Errors shared across the crate. Construction errors carry enough context
/// to point at the offending input; solver errors carry the residual state.
#[derive(Debug, Error)]
pub enum Error {
    #[error("edge weight must be positive: ({u}, {v}, {w})")]
    NonPositiveWeight { u: u32, v: u32, w: f64 },

    #[error("graph is not connected")]
    Disconnected,

    #[error("duplicate undirected edge ({u}, {v})")]
    DuplicateEdge { u: u32, v: u32 },

    #[error("edge list parse error at line {line}: {msg}")]
    ParseError { line: usize, msg: String },

    #[error("vertex count {got} exceeds size limit {limit}")]
    SizeLimit { got: usize, limit: usize },

    #[error("generator set is not closed under inversion")]
    AsymmetricGenerators,

    #[error("radius {radius} must stay below trust radius {trust}")]
    RadiusExceedsTrust { radius: usize, trust: usize },

    #[error("exhaustion radii must be strictly increasing")]
    NotStrictlyIncreasing,

    #[error("killed system is singular: the domain covers the whole host")]
    SingularSystem,

    #[error("pole lies outside the solve domain")]
    PoleOutsideDomain,

    #[error("solver stopped above tolerance: gap {gap:.3e} after {iterations} iterations")]
    SolverDiverged { gap: f64, iterations: usize },

    #[error(
        "capacity formulations disagree: dual {dual:.9e}, potential {potential:.9e}, \
         laplacian {laplacian:.9e}"
    )]
    EquivalenceViolation {
        dual: f64,
        potential: f64,
        laplacian: f64,
    },

    #[error("volume profile does not cover radius {needed}")]
    InsufficientProfile { needed: usize },

    #[error("heat kernel horizon {horizon} too short, need at least {needed}")]
    HorizonTooShort { horizon: usize, needed: usize },

    #[error("ball of {size} vertices exceeds dense solve cap {cap}")]
    BallTooLarge { size: usize, cap: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T> = std::result::Result<T, Error>;
