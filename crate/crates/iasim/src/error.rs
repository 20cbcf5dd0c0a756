use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix entries must be finite")]
    NonFinite,

    #[error("matrix is singular to working precision (sigma_min = {sigma_min:.3e})")]
    SingularMatrix { sigma_min: f64 },

    #[error("singular channel link ({i},{k})")]
    SingularLink { i: usize, k: usize },

    #[error("eigenvalue iteration did not converge")]
    NumericalFailure,

    #[error("input already spans the full space; complement is empty")]
    EmptyComplement,

    #[error("rank-deficient input")]
    RankDeficient,

    #[error("cannot normalize the zero matrix")]
    ZeroMatrix,

    #[error("codebook of 2^{bits} words exceeds the supported maximum 2^{max}")]
    CodebookTooLarge { bits: u32, max: u32 },

    #[error("per-TX solve failed at TX {tx}: {source}")]
    TxSolve { tx: usize, source: Box<Error> },

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("too few points for the requested fit window")]
    TooFewPoints,

    #[error("sweep aborted at {snr_db} dB: {failed}/{trials} trials failed (first: {first})")]
    SweepFailed {
        snr_db: f64,
        failed: u64,
        trials: u64,
        first: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
