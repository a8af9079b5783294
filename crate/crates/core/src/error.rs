use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Eigenvector basis too ill-conditioned (or a Jordan structure the
    /// decomposition does not handle).
    #[error("defective matrix: {0}")]
    DefectiveMatrix(String),

    #[error("matrix logarithm undefined: eigenvalue {re:.6e}{im:+.6e}i lies on the closed negative real axis")]
    LogDomain { re: f64, im: f64 },

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("harmonics violate Nyquist: highest {highest_hz} Hz >= {nyquist_hz} Hz")]
    Nyquist { highest_hz: f64, nyquist_hz: f64 },

    #[error("record too short: need {needed} samples, have {have}")]
    InsufficientData { needed: usize, have: usize },

    #[error("Riccati iteration failed: {0}")]
    Riccati(String),

    #[error("ambiguous block matching: {0}; change the frequency content of the excitation")]
    AmbiguousMatch(String),

    #[error("block count mismatch: {0}")]
    CountMismatch(String),

    #[error("rank deficient {system}: rank {rank} < {cols} columns; {remedy}")]
    RankDeficient {
        system: &'static str,
        rank: usize,
        cols: usize,
        remedy: &'static str,
    },

    #[error("input record is not persistently exciting: {0}")]
    NotPersistentlyExciting(String),
}
