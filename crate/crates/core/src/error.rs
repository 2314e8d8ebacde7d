use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: {detail}")]
    DimensionMismatch { op: &'static str, detail: String },

    #[error("matrix contains non-finite entries")]
    NonFinite,

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("rank {rank} out of range 1..={max}")]
    RankOutOfRange { rank: usize, max: usize },

    #[error("equality constraints are rank deficient (KKT system singular)")]
    DegenerateConstraints,

    #[error("atom {index} is the zero vector")]
    ZeroAtom { index: usize },

    #[error("atom {index} is not unit norm (norm = {norm})")]
    NotNormalized { index: usize, norm: f64 },

    #[error("pattern corruption needs {needed} free slots but only {available} exist")]
    InsufficientComplement { needed: usize, available: usize },

    #[error("signal is identically zero; SNR scaling is undefined")]
    DegenerateSignal,

    #[error("row {row}: linear system is rank deficient, recovery is not unique")]
    AmbiguousRow { row: usize },

    #[error("row {row}: smallest singular vector has a vanishing last entry")]
    ScalingDegenerate { row: usize },

    #[error("data matrix has rank {rank}, at least {required} needed")]
    RankCollapse { rank: usize, required: usize },

    #[error("inverse estimate is rank deficient (rank {rank} of {required})")]
    SingularInverse { rank: usize, required: usize },

    #[error("instance size {size} exceeds the configured cap {cap}")]
    SizeCapExceeded { size: usize, cap: usize },

    #[error("column {column}: {source}")]
    Column {
        column: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("block {block}: {source}")]
    Block {
        block: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("argument out of domain: {0}")]
    Domain(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn dims(op: &'static str, detail: impl Into<String>) -> Self {
        Error::DimensionMismatch {
            op,
            detail: detail.into(),
        }
    }

    /// True for failures of the numerical kernels, as opposed to bad input or configuration.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::Numerical(_)
            | Error::NonFinite
            | Error::DegenerateConstraints
            | Error::AmbiguousRow { .. }
            | Error::ScalingDegenerate { .. }
            | Error::RankCollapse { .. }
            | Error::SingularInverse { .. }
            | Error::DegenerateSignal => true,
            Error::Column { source, .. } | Error::Block { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}
