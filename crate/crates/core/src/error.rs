use thiserror::Error;

/// Errors raised by the tensor substrate, the multi-time engine, the
/// measurement constructors and the sequential oracle.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Operand shapes do not fit the requested operation.
    #[error("shape error: {0}")]
    Shape(String),

    /// A tensor would exceed the configured maximum number of entries.
    #[error("capacity exceeded: {requested} entries requested, limit is {limit}")]
    CapacityExceeded { requested: usize, limit: usize },

    /// Bra and ket boundaries of a system do not alternate in time.
    #[error("alternation error: {0}")]
    Alternation(String),

    /// A multi-time state with all amplitudes zero.
    #[error("state has zero norm")]
    ZeroNormState,

    /// A measurement period of the state received no operator.
    #[error("no operator assigned to measurement period {0}")]
    MissingPeriod(String),

    /// An operator refers to a period the state does not have, or a
    /// period was assigned twice.
    #[error("invalid period assignment: {0}")]
    PeriodAssignment(String),

    /// Total relative weight of all outcomes vanished.
    #[error("impossible post-selection (total weight {total:.3e})")]
    ImpossiblePostselection { total: f64 },

    /// Two states that were to be composed share or interleave boundaries.
    #[error("overlap error: {0}")]
    Overlap(String),

    /// Kept periods are correlated with discarded ones.
    #[error("periods are entangled with the rest of the state (singular value ratio {ratio:.3e})")]
    EntangledPeriods { ratio: f64 },

    #[error("operator is not Hermitian (deviation {deviation:.3e})")]
    NotHermitian { deviation: f64 },

    #[error("operator is not unitary (deviation {deviation:.3e})")]
    NotUnitary { deviation: f64 },

    /// Kraus operators do not resolve the identity.
    #[error("Kraus set is not complete (max deviation {deviation:.3e})")]
    IncompleteKraus { deviation: f64 },

    #[error("grouping does not cover outcome '{0}'")]
    IncompleteGrouping(String),

    #[error("observable terms overlap on period {0}")]
    OverlappingPeriods(String),

    /// Malformed experiment script.
    #[error("invalid script: {0}")]
    Script(String),

    /// Requested operation is not supported by the selected engine.
    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("invalid tolerance: {0}")]
    Tolerance(String),
}

pub type Result<T> = std::result::Result<T, Error>;
