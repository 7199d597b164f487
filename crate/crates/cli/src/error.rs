use kwr_core::KwrError;
use serde_json::json;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid config at `{path}`: {message}")]
    Usage { path: String, message: String },

    #[error(transparent)]
    Core(#[from] KwrError),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    /// 1 for bad input or domain errors, 2 for exhausted resources and I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage { .. } => 1,
            CliError::Core(e) if e.is_resource() => 2,
            CliError::Core(_) => 1,
            CliError::Io(_) | CliError::Csv(_) | CliError::Json(_) => 2,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Usage { .. } => "usage",
            CliError::Core(e) if e.is_resource() => "resource",
            CliError::Core(_) => "domain",
            _ => "io",
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        let mut v = json!({"error": {"kind": self.kind(), "message": self.to_string()}});
        if let CliError::Usage { path, .. } = self {
            v["error"]["path"] = json!(path);
        }
        v
    }
}
