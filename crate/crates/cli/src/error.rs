use thiserror::Error;

/// Failure classes, each with its own process exit code.
#[derive(Debug, Error)]
pub enum Failure {
    #[error("config error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("property violation: {0}")]
    Property(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Config(_) => 2,
            Failure::Numerical(_) => 3,
            Failure::Property(_) => 4,
            Failure::Io(_) => 1,
        }
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Failure::Config(msg.into())
    }
}

impl From<kedmd_core::Error> for Failure {
    fn from(e: kedmd_core::Error) -> Self {
        use kedmd_core::Error as E;
        match e {
            E::NotPositiveDefinite { .. } | E::TooManyRejectedClusters { .. } | E::DuplicatePoints { .. } => {
                Failure::Numerical(e.to_string())
            }
            E::IdentityViolated { .. } => Failure::Property(e.to_string()),
            _ => Failure::Config(e.to_string()),
        }
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Failure::Config(format!("csv: {e}"))
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Config(format!("json: {e}"))
    }
}

pub type Result<T> = std::result::Result<T, Failure>;
