use thiserror::Error;

/// Failure classes of a scenario run, each with its own process exit code.
#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(tdhf_core::Error),
    #[error("i/o error: {0}")]
    Io(String),
}

impl ScenarioError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 2,
            Self::Numerical(_) => 3,
            Self::Io(_) => 4,
        }
    }
}

impl From<tdhf_core::Error> for ScenarioError {
    fn from(e: tdhf_core::Error) -> Self {
        use tdhf_core::Error as E;
        match e {
            E::Container(_) | E::Integrity { .. } | E::Io(_) | E::Json(_) => Self::Io(e.to_string()),
            other => Self::Numerical(other),
        }
    }
}

impl From<std::io::Error> for ScenarioError {
    fn from(e: std::io::Error) -> Self {
        Self::Io(e.to_string())
    }
}
