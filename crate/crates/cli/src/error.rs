use egw_core::EgwError;
use serde_json::json;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Solver(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Solver(_) => 3,
            CliError::Io(_) => 4,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Validation(_) => "validation",
            CliError::Solver(_) => "solver",
            CliError::Io(_) => "io",
        }
    }

    pub fn to_json(&self) -> String {
        json!({
            "error": self.kind(),
            "message": self.to_string(),
            "exit_code": self.exit_code(),
        })
        .to_string()
    }

    pub fn io(context: impl std::fmt::Display, err: impl std::fmt::Display) -> Self {
        CliError::Io(format!("{context}: {err}"))
    }
}

fn is_io(err: &EgwError) -> bool {
    match err {
        EgwError::Io(_) => true,
        EgwError::Stage { source, .. } => is_io(source),
        _ => false,
    }
}

impl From<EgwError> for CliError {
    fn from(err: EgwError) -> Self {
        if is_io(&err) {
            CliError::Io(err.to_string())
        } else if err.is_validation() {
            CliError::Validation(err.to_string())
        } else {
            CliError::Solver(err.to_string())
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
