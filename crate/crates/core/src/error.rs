use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("wrong IDX magic number: expected {expected}, found {found}")]
    WrongMagic { expected: u32, found: u32 },

    #[error("IDX file length mismatch: header implies {expected} bytes, got {actual}")]
    TruncatedFile { expected: usize, actual: usize },

    #[error("IDX header declares a zero dimension")]
    ZeroDimension,

    #[error("dataset selection is empty")]
    EmptySelection,

    #[error("requested rank {requested} exceeds the available {available}")]
    RankTooLarge { requested: usize, available: usize },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("singular value decomposition did not converge")]
    ConvergenceFailure,

    #[error("index {index} is out of range for {len} modes")]
    IndexOutOfRank { index: usize, len: usize },

    #[error("Bose-Einstein occupation diverges: exp(-alpha + beta*eps) = {0} <= 1")]
    BoseDivergence(f64),

    #[error("infeasible constraints: {0}")]
    InfeasibleConstraints(String),

    #[error("singular value {index} is too small to invert ({ratio:e} of the largest)")]
    ZeroSingularValue { index: usize, ratio: f64 },

    #[error("zero variance in variable {0}")]
    ZeroVariance(usize),

    #[error("optimizer diverged at iteration {iteration}: error {error:e}")]
    Diverged { iteration: usize, error: f64 },

    #[error("not converged after {iterations} iterations (deviation {deviation:e})")]
    NotConverged { iterations: usize, deviation: f64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Stable variant name used in CLI diagnostics.
    pub fn name(&self) -> &'static str {
        match self {
            Error::WrongMagic { .. } => "WrongMagic",
            Error::TruncatedFile { .. } => "TruncatedFile",
            Error::ZeroDimension => "ZeroDimension",
            Error::EmptySelection => "EmptySelection",
            Error::RankTooLarge { .. } => "RankTooLarge",
            Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::ConvergenceFailure => "ConvergenceFailure",
            Error::IndexOutOfRank { .. } => "IndexOutOfRank",
            Error::BoseDivergence(_) => "BoseDivergence",
            Error::InfeasibleConstraints(_) => "InfeasibleConstraints",
            Error::ZeroSingularValue { .. } => "ZeroSingularValue",
            Error::ZeroVariance(_) => "ZeroVariance",
            Error::Diverged { .. } => "Diverged",
            Error::NotConverged { .. } => "NotConverged",
            Error::InvalidInput(_) => "InvalidInput",
            Error::Parse { .. } => "Parse",
            Error::Io(_) => "Io",
        }
    }
}

pub(crate) fn check_len(expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(Error::DimensionMismatch { expected, actual });
    }
    Ok(())
}
