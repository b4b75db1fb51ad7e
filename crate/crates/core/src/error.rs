use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A matrix is not a valid density matrix (trace or Hermiticity).
    #[error("invalid state: {0}")]
    InvalidState(String),

    /// A density matrix has a negative eigenvalue beyond tolerance.
    #[error("non-physical state: minimum eigenvalue {min_eigenvalue:e}")]
    NonPhysicalState { min_eigenvalue: f64 },

    /// A caller broke an operation contract (incomplete Kraus set,
    /// non-unitary gate, reused ancilla, ...).
    #[error("contract violation: {0}")]
    Contract(String),

    /// Information diverges or a quantity is undefined at a pure state or a
    /// deterministic measurement outcome.
    #[error("singular point: {0}")]
    Singular(String),

    /// Solver or finite-difference configuration is unusable.
    #[error("configuration error: {0}")]
    Config(String),

    /// The observed frequency cannot be produced by the channel model.
    #[error("observation outside model: {0}")]
    OutOfModel(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub(crate) fn singular(msg: impl Into<String>) -> Self {
        Error::Singular(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
