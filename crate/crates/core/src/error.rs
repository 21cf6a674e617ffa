use thiserror::Error;

/// Errors raised by the simulation and analysis routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(&'static str),
    #[error("could not place {n} nodes with minimum separation {delta_min} after {attempts} redraws")]
    GeometryInfeasible { n: usize, delta_min: f64, attempts: usize },
    #[error("node index {index} out of range for {len} nodes")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("nodes {0} and {1} coincide")]
    DegenerateGeometry(usize, usize),
    #[error("operation requires {expected} geometry")]
    InvalidGeometry { expected: &'static str },
    #[error("eigensolver did not converge: {0}")]
    ConvergenceFailure(&'static str),
    #[error("decay rate {gamma} at index {index} is below the roundoff floor")]
    NonPositiveDecayRate { index: usize, gamma: f64 },
    #[error("fit window holds {points} points, at least {required} required")]
    WindowTooNarrow { points: usize, required: usize },
    #[error("non-positive value in log-log fit")]
    NonPositiveValues,
    #[error("need at least two distinct system sizes")]
    InsufficientPoints,
    #[error("need at least two distinct positive rates")]
    InsufficientData,
    #[error("realization {index}: {source}")]
    Realization {
        index: usize,
        #[source]
        source: alloc::boxed::Box<Error>,
    },
}

/// Crate result alias.
pub type Result<T> = core::result::Result<T, Error>;
