use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: expected {expected} fields, found {found}")]
    RaggedRow {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("line {line}, column {column}: negative count `{value}`")]
    NegativeCount {
        line: usize,
        column: usize,
        value: String,
    },
    #[error("line {line}, column {column}: `{value}` is not an integer count")]
    NonIntegerCount {
        line: usize,
        column: usize,
        value: String,
    },
    #[error("line {line}: duplicate sample id `{id}`")]
    DuplicateSample { line: usize, id: String },
    #[error("malformed table: {0}")]
    Malformed(String),
    #[error("table has no data rows")]
    EmptyTable,
    #[error("nothing left: no {0}")]
    EmptyResult(&'static str),
    #[error("sample `{sample}` has zero total reads")]
    ZeroTotal { sample: String },
    #[error("group {0} of the rank test is empty")]
    EmptyGroup(char),
    #[error("p-value at index {index} is outside [0, 1]: {value}")]
    InvalidPValue { index: usize, value: f64 },
    #[error("expected two class labels, found {0}")]
    NonBinaryLabels(usize),
    #[error("table has no class labels")]
    MissingLabels,
    #[error("OTU `{0}` has no positive counts")]
    DegenerateOtu(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    Misaligned { expected: usize, found: usize },
    #[error("non-finite input: {0}")]
    NonFinite(&'static str),
    #[error("weight fit did not converge (best objective {objective})")]
    FitFailure { objective: f64, best: Vec<f64> },
    #[error("no mixture component explains count {0}")]
    DegeneratePosterior(u64),
    #[error("adaptive quadrature failed to reach tolerance (estimated error {0})")]
    Quadrature(f64),
    #[error("class `{0}` has no training samples")]
    EmptyClass(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("unknown scenario {0} (expected 1-6)")]
    UnknownScenario(u32),
    #[error("OTU sets differ: {0}")]
    OtuMismatch(String),
    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// Whether the error comes from invalid input or configuration, as opposed
    /// to a failure while computing or writing results.
    pub fn is_validation(&self) -> bool {
        match self {
            Error::Context { source, .. } => source.is_validation(),
            Error::FitFailure { .. }
            | Error::DegeneratePosterior(_)
            | Error::Quadrature(_)
            | Error::Io(_) => false,
            Error::Csv(e) => !e.is_io_error(),
            _ => true,
        }
    }
}
