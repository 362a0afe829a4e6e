use std::path::{Path, PathBuf};

use elastrm_core::Error as CoreError;
use serde_json::json;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    /// Invalid input data (scene geometry, scattering-matrix files).
    #[error("invalid input: {0}")]
    Input(CoreError),

    #[error("solver failure: {0}")]
    Solver(CoreError),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io { path: path.to_path_buf(), source }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Input(_) => 2,
            CliError::Solver(_) => 3,
            CliError::Io { .. } => 4,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Input(_) => "input",
            CliError::Solver(_) => "solver",
            CliError::Io { .. } => "io",
        }
    }

    /// Machine-readable report written on failure.
    pub fn report(&self) -> serde_json::Value {
        let mut v = json!({
            "status": "error",
            "kind": self.kind(),
            "exit_code": self.exit_code(),
            "message": self.to_string(),
        });
        if let CliError::Solver(CoreError::Convergence { iterations, residual, history }) = self {
            v["iterations"] = json!(iterations);
            v["residual"] = json!(residual);
            v["history"] = json!(history);
        }
        if let CliError::Solver(CoreError::Column { column, .. }) = self {
            v["column"] = json!(column);
        }
        v
    }
}
