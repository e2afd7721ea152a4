use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid config field `{field}`: {reason}")]
    Config { field: String, reason: String },
    #[error("action violates {constraint}")]
    Constraint { constraint: String },
    #[error("allocation {name} = {value} is below the floor {floor}")]
    AllocationFloor {
        name: &'static str,
        value: f64,
        floor: f64,
    },
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    Dimension {
        context: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("lifecycle: {0}")]
    Lifecycle(&'static str),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("oracle refuses M = {mds}: enumeration budget is M <= {max}")]
    OracleBudget { mds: usize, max: usize },
    #[error("training diverged: {0}")]
    Diverged(String),
    #[error("federated round {round} failed at agent {agent}: {source}")]
    Round {
        round: u64,
        agent: usize,
        #[source]
        source: Box<Error>,
    },
    #[error(transparent)]
    Nn(#[from] fran_nn::NnError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("config parse error: {0}")]
    Toml(#[from] toml::de::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn config_error(field: &str, reason: impl Into<String>) -> Error {
    Error::Config {
        field: field.to_string(),
        reason: reason.into(),
    }
}
