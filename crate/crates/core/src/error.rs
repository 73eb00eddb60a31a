use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("photon number {n} exceeds cutoff {cutoff}")]
    PhotonOutOfRange { n: usize, cutoff: usize },

    #[error("flat index {index} out of range for dimension {dim}")]
    FlatIndexOutOfRange { index: usize, dim: usize },

    #[error("unsupported Pauli matrix σ{0}; only σ1 and σ3 are available")]
    UnsupportedPauli(u8),

    #[error("unknown polynomial token `{0}` (expected `a` or `ad`)")]
    UnknownToken(String),

    #[error("malformed complex number `{0}` (expected `re+im i`)")]
    MalformedComplex(String),

    #[error("shape mismatch: expected {expected}x{expected}, got {rows}x{cols}")]
    ShapeMismatch {
        expected: usize,
        rows: usize,
        cols: usize,
    },

    #[error("matrix is not Hermitian: deviation {deviation:e} exceeds {tolerance:e}")]
    NotHermitian { deviation: f64, tolerance: f64 },

    #[error("invalid model parameter: {0}")]
    InvalidParameter(String),

    #[error("pump is not symmetric on the interior (deviation {0:e})")]
    PumpNotSymmetric(f64),

    #[error("superoperator entry couples (n={n}, n'={n_prime}) to (k={k}, k'={k_prime}) beyond bandwidth {bandwidth}")]
    BandViolation {
        n: usize,
        n_prime: usize,
        k: usize,
        k_prime: usize,
        bandwidth: usize,
    },

    #[error("dense superoperator refused: dimension {dim} exceeds the dense limit {limit} (force to override)")]
    DenseRefused { dim: usize, limit: usize },

    #[error("invalid sample request: {0}")]
    InvalidSample(String),

    #[error(
        "matrix exponential overflow: scaled norm {norm:e} is too large for the scaling strategy"
    )]
    ExpmOverflow { norm: f64 },

    #[error("Taylor series did not converge within {0} terms")]
    ExpmNoConvergence(usize),

    #[error("singular Padé denominator")]
    SingularPade,

    #[error("invalid time grid: {0}")]
    InvalidGrid(String),

    #[error("solver diverged at t = {t}: HS norm {norm:e} exceeds {limit:e}")]
    Divergence { t: f64, norm: f64, limit: f64 },

    #[error("invalid probe: {0}")]
    InvalidProbe(String),

    #[error("initial state not representable: {0}")]
    InitialState(String),
}
