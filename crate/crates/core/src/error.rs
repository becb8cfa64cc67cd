use thiserror::Error;

/// Errors raised by the band-structure pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("conflicting hoppings for orbitals ({alpha}, {beta}) at displacement {delta:?}: {first} vs {second}")]
    ConflictingHopping {
        alpha: usize,
        beta: usize,
        delta: [f64; 3],
        first: String,
        second: String,
    },

    #[error("model is not hermitian-closed; call close_hermitian first")]
    NotClosed,

    #[error("matrix is not hermitian (max deviation {0:e})")]
    NotHermitian(f64),

    #[error("invalid k-path: {0}")]
    InvalidKPath(String),

    #[error("invalid Pauli word: {0}")]
    InvalidPauli(String),

    #[error("qubit count mismatch: expected {expected}, got {got}")]
    QubitMismatch { expected: usize, got: usize },

    #[error("{0} qubits exceeds the dense-matrix guard of {1}")]
    TooManyQubits(usize, usize),

    #[error("invalid circuit: {0}")]
    InvalidCircuit(String),

    #[error("expected {expected} ansatz parameters, got {got}")]
    ParameterLength { expected: usize, got: usize },

    #[error("words {0} and {1} are not qubit-wise commuting")]
    NotQubitwiseCommuting(String, String),

    #[error("singular calibration matrix (condition number {0:e})")]
    SingularCalibration(f64),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("energy bounds [{lo}, {hi}] do not bracket the spectrum [{spec_lo}, {spec_hi}]")]
    BoundsDoNotBracket {
        lo: f64,
        hi: f64,
        spec_lo: f64,
        spec_hi: f64,
    },

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
