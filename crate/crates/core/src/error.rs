use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("node {node} cannot reach any sink")]
    Disconnected { node: usize },
    #[error("no sink in the network")]
    NoSink,
    #[error("search space of {size:.3e} placement vectors exceeds the guard of {limit:.0e}")]
    SpaceTooLarge { size: f64, limit: f64 },
    #[error("could not generate a connected topology after {attempts} attempts; increase node density")]
    GenerationFailed { attempts: usize },
    #[error("LP parse error at line {line}: {message}")]
    LpParse { line: usize, message: String },
    #[error("enumeration budget of {limit} nodes exhausted")]
    EnumerationBudget { limit: u64 },
}

pub type Result<T> = std::result::Result<T, Error>;
