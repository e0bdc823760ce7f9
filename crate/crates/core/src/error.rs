use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("cannot open {path}: {source}")]
    Open {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("empty store")]
    EmptyStore,

    #[error("unterminated final line")]
    UnterminatedFinalLine,

    #[error("offset {offset} out of range 0..={n_f}")]
    OffsetOutOfRange { offset: u64, n_f: u64 },

    #[error("offset {offset} is not a line header")]
    NotAHeader { offset: u64 },

    #[error("non-numeric field {field:?} in line at offset {offset}")]
    Parse { offset: u64, field: String },

    #[error("at offset {offset}: {source}")]
    AtOffset { offset: u64, source: Box<Error> },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("index memory budget exceeded: cache with {entries} entries needs {needed} bytes, budget is {budget}")]
    BudgetExceeded {
        entries: u64,
        needed: u64,
        budget: u64,
    },

    #[error("statistic undefined: {0}")]
    Undefined(&'static str),

    #[error("design matrix is rank deficient")]
    RankDeficient,

    #[error("mixed statistic kinds in one aggregate")]
    MixedKinds,

    #[error("no closed-form Var* for {0}")]
    NoClosedForm(&'static str),

    #[error("malformed input: {0}")]
    Malformed(String),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
