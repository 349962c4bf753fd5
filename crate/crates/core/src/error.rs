use thiserror::Error;

/// Errors raised by the simulation library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("bid from genco {genco_id} has price {price} above the cap {cap}")]
    BidAboveCap { genco_id: usize, price: f64, cap: f64 },
    #[error("bid from genco {genco_id} is invalid: {reason}")]
    InvalidBid { genco_id: usize, reason: String },
    #[error("demand must be non-negative, got {0}")]
    NegativeDemand(f64),
    #[error("qubit count {0} outside supported range 1..=12")]
    QubitCountOutOfRange(usize),
    #[error("qubit index {index} out of range for {n_qubits} qubits")]
    QubitIndexOutOfRange { index: usize, n_qubits: usize },
    #[error("cnot control and target must differ (both {0})")]
    CnotEqualIndices(usize),
    #[error("entangler needs at least 2 qubits, register has {0}")]
    EntanglerTooSmall(usize),
    #[error("observable has {got} weights, state has {expected} qubits")]
    ObservableLengthMismatch { got: usize, expected: usize },
    #[error("feature {index} is not finite")]
    NonFiniteFeature { index: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("malformed demand profile: {0}")]
    MalformedDemandProfile(String),
    #[error("empty batch")]
    EmptyBatch,
    #[error("genco dataset invalid: {0}")]
    InvalidGencoDataset(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
