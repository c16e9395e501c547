use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}{}: {reason}", line.map(|l| format!(" line {l}")).unwrap_or_default())]
    Malformed { path: PathBuf, line: Option<u64>, reason: String },
    #[error("{path}: format version {found}, expected {expected}")]
    VersionMismatch { path: PathBuf, found: u32, expected: u32 },
    #[error("config error at `{key}`: {reason}")]
    Config { key: String, reason: String },
    #[error("missing upstream artifact {0}")]
    MissingArtifact(PathBuf),
    #[error("{path} does not match the digest recorded in its manifest")]
    DigestMismatch { path: PathBuf },
    #[error("audit failed: {0}")]
    AuditFailed(String),
    #[error(transparent)]
    Core(#[from] fovguide_core::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io { path: path.into(), source }
    }

    pub fn malformed(path: impl Into<PathBuf>, line: Option<u64>, reason: impl ToString) -> Self {
        Self::Malformed { path: path.into(), line, reason: reason.to_string() }
    }

    pub fn config(key: impl Into<String>, reason: impl ToString) -> Self {
        Self::Config { key: key.into(), reason: reason.to_string() }
    }

    /// Process exit code: 2 config, 3 upstream missing or stale, 4 audit failure, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config { .. } => 2,
            Self::MissingArtifact(_) | Self::DigestMismatch { .. } => 3,
            Self::AuditFailed(_) => 4,
            _ => 1,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(Error::config("a.b", "bad").exit_code(), 2);
        assert_eq!(Error::MissingArtifact("x".into()).exit_code(), 3);
        assert_eq!(Error::DigestMismatch { path: "x".into() }.exit_code(), 3);
        assert_eq!(Error::AuditFailed("x".into()).exit_code(), 4);
        assert_eq!(Error::malformed("x", Some(3), "bad").exit_code(), 1);
        assert_eq!(Error::malformed("x", Some(3), "bad").to_string(), "x line 3: bad");
    }
}
