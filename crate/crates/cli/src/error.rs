use serde_json::json;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("criterion failure: {0}")]
    Criterion(String),

    #[error("numeric abort: {0}")]
    Numeric(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, CliError>;

impl CliError {
    /// Process exit code: 2 config, 3 criterion, 4 numeric, 1 anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Criterion(_) => 3,
            CliError::Numeric(_) => 4,
            CliError::Io(_) | CliError::Json(_) => 1,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Criterion(_) => "criterion",
            CliError::Numeric(_) => "numeric",
            CliError::Io(_) => "io",
            CliError::Json(_) => "serialization",
        }
    }

    /// The machine-readable form printed on failure.
    pub fn to_json(&self) -> serde_json::Value {
        json!({ "error": self.kind(), "exit_code": self.exit_code(), "message": self.to_string() })
    }
}

impl From<gibbs_bvs::Error> for CliError {
    fn from(e: gibbs_bvs::Error) -> Self {
        use gibbs_bvs::Error as E;
        match e {
            E::NumericAbort(_) => CliError::Numeric(e.to_string()),
            E::Io(io) => CliError::Io(io),
            // Everything else traces back to what the config asked for.
            other => CliError::Config(other.to_string()),
        }
    }
}

impl From<toml::de::Error> for CliError {
    fn from(e: toml::de::Error) -> Self {
        CliError::Config(e.to_string())
    }
}
