use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("matrix is not symmetric (max asymmetry {0:.3e})")]
    NonSymmetric(f64),

    #[error("grid set is empty")]
    EmptySet,

    #[error("cone cap is active: atom mass {used:.6e} reached radius {radius:.6e}")]
    CapActive { radius: f64, used: f64 },

    #[error("no progress at iteration {iteration}: dual gap {gap:.3e} stalled above tolerance")]
    NoProgress { iteration: usize, gap: f64 },

    #[error("convex solver called with a non-convex data fit")]
    NonConvexFit,

    #[error("no feasible pivot step (both kernel signs blocked)")]
    InfeasibleStep,

    #[error("quotient projector inconsistent with d = {d}")]
    QuotientRankDeficiency { d: usize },

    #[error("instance too large: {0}")]
    TooLarge(String),

    #[error("operation needs a polyhedral gauge, got {0}")]
    NotPolyhedral(&'static str),

    #[error("atom family {0} is not enumerable")]
    NotEnumerable(&'static str),

    #[error("polyhedron is unbounded but no rays were enumerated")]
    UnboundedWithoutRays,

    #[error("polyhedron contains a line")]
    ContainsLine,

    #[error("problem is infeasible")]
    Infeasible,
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}
