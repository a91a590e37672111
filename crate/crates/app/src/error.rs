use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use scholarchat_core::classify::ClassifyError;
use scholarchat_core::cluster::ClusterError;
use scholarchat_core::eval::EvalError;
use scholarchat_core::ingest::IngestError;
use scholarchat_core::provider::ProviderError;
use scholarchat_core::snapshot::SnapshotError;

/// A command failure. Input problems exit with 2, everything else with 1.
#[derive(Debug, Error)]
pub enum AppError {
    #[error("{}: file not found", path.display())]
    MissingInput { path: PathBuf },
    #[error("{}{message}", path.as_ref().map(|p| format!("{}: ", p.display())).unwrap_or_default())]
    Input {
        path: Option<PathBuf>,
        message: String,
    },
    #[error("config: {0}")]
    Config(String),
    #[error("{stage}: {message}")]
    Stage {
        stage: &'static str,
        message: String,
    },
    #[error("provider: {0}")]
    Provider(#[from] ProviderError),
}

/// The JSON line written to stderr on failure.
#[derive(Debug, Serialize)]
pub struct ErrorReport {
    pub error: &'static str,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
}

impl AppError {
    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::MissingInput { .. } | AppError::Input { .. } | AppError::Config(_) => 2,
            AppError::Stage { .. } | AppError::Provider(_) => 1,
        }
    }

    pub fn report(&self) -> ErrorReport {
        let (error, path) = match self {
            AppError::MissingInput { path } => ("missing_input", Some(path)),
            AppError::Input { path, .. } => ("invalid_input", path.as_ref()),
            AppError::Config(_) => ("config", None),
            AppError::Stage { .. } => ("stage_failed", None),
            AppError::Provider(_) => ("provider", None),
        };
        ErrorReport {
            error,
            message: self.to_string(),
            path: path.map(|p| p.display().to_string()),
        }
    }

    pub fn input(path: &Path, message: impl ToString) -> Self {
        AppError::Input {
            path: Some(path.to_path_buf()),
            message: message.to_string(),
        }
    }

    pub fn stage(stage: &'static str, e: impl ToString) -> Self {
        AppError::Stage {
            stage,
            message: e.to_string(),
        }
    }
}

/// Fails with [`AppError::MissingInput`] unless `path` exists.
pub fn require(path: &Path) -> Result<&Path, AppError> {
    if path.exists() {
        Ok(path)
    } else {
        Err(AppError::MissingInput {
            path: path.to_path_buf(),
        })
    }
}

impl From<IngestError> for AppError {
    fn from(e: IngestError) -> Self {
        match e {
            IngestError::Io { path, source } => AppError::input(&path, source),
            other => AppError::Input {
                path: None,
                message: other.to_string(),
            },
        }
    }
}

impl From<SnapshotError> for AppError {
    fn from(e: SnapshotError) -> Self {
        match e {
            SnapshotError::Io { path, message } | SnapshotError::Format { path, message } => {
                AppError::Input {
                    path: Some(path),
                    message,
                }
            }
            SnapshotError::Ingest(e) => e.into(),
            SnapshotError::Unclustered | SnapshotError::MissingEmbedding(_) => AppError::Input {
                path: None,
                message: e.to_string(),
            },
            other => AppError::stage("snapshot", other),
        }
    }
}

impl From<ClusterError> for AppError {
    fn from(e: ClusterError) -> Self {
        AppError::stage("cluster", e)
    }
}

impl From<ClassifyError> for AppError {
    fn from(e: ClassifyError) -> Self {
        AppError::stage("classify", e)
    }
}

impl From<EvalError> for AppError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::InvalidScript { .. } | EvalError::UnknownLabel { .. } => AppError::Input {
                path: None,
                message: e.to_string(),
            },
            other => AppError::stage("eval", other),
        }
    }
}
