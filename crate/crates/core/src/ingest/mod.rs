//! Acquiring shells and the production sequence, and forming the asset
//! hierarchy from Bills of Material.

mod aasx;
mod hierarchy;
mod server;

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::aas::{parse_shell, AasError, AdministrationShell};

pub use aasx::{read_aasx, AasxPackage, MANIFEST_PATH};
pub use hierarchy::{build_hierarchy, unreferenced_shells, HierarchyTree};
pub use server::{fetch_shells, FetchConfig, FetchOutcome, ShellFailure};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("archive error: {0}")]
    Archive(String),
    #[error("in `{path}`: {source}")]
    Document {
        path: String,
        #[source]
        source: AasError,
    },
    #[error("shell `{id}`: {source}")]
    Shell {
        id: String,
        #[source]
        source: AasError,
    },
    #[error("i/o error on `{path}`: {message}")]
    Io { path: String, message: String },
    #[error("transport error for `{url}`: {message}")]
    Transport { url: String, message: String },
    #[error("{} shell(s) failed: {}", .0.len(), summarize(.0))]
    Partial(Vec<ShellFailure>),
    #[error("syntax error: {0}")]
    Syntax(String),
    #[error("invalid production sequence: {0}")]
    Validation(String),
    #[error("duplicate shell id `{0}`")]
    DuplicateShellId(String),
    #[error("asset `{0}` is not among the ingested shells")]
    UnknownAsset(String),
    #[error("bill-of-material cycle: {}", .path.join(" -> "))]
    Cycle { path: Vec<String> },
    #[error("`{from}` references `{to}`, which was not ingested")]
    DanglingReference { from: String, to: String },
    #[error("asset `{asset}` is listed by both `{first}` and `{second}`")]
    MultipleParents {
        asset: String,
        first: String,
        second: String,
    },
}

fn summarize(failures: &[ShellFailure]) -> String {
    failures
        .iter()
        .map(|f| format!("{} ({})", f.id, f.error))
        .collect::<Vec<_>>()
        .join("; ")
}

impl IngestError {
    /// Stable machine-readable error code.
    pub fn code(&self) -> &'static str {
        match self {
            IngestError::Archive(_) => "ArchiveError",
            IngestError::Document { source, .. } | IngestError::Shell { source, .. } => {
                aas_code(source)
            }
            IngestError::Io { .. } => "IoError",
            IngestError::Transport { .. } => "TransportError",
            IngestError::Partial(_) => "PartialIngestError",
            IngestError::Syntax(_) => "SyntaxError",
            IngestError::Validation(_) => "ValidationError",
            IngestError::DuplicateShellId(_) => "DuplicateShellId",
            IngestError::UnknownAsset(_) => "UnknownAsset",
            IngestError::Cycle { .. } => "CycleError",
            IngestError::DanglingReference { .. } => "DanglingReference",
            IngestError::MultipleParents { .. } => "MultipleParents",
        }
    }

    pub fn path(&self) -> Option<String> {
        match self {
            IngestError::Document { path, source } => Some(match source.path() {
                Some(inner) if !inner.is_empty() => format!("{path}:{inner}"),
                _ => path.clone(),
            }),
            IngestError::Shell { id, source } => Some(match source.path() {
                Some(inner) if !inner.is_empty() => format!("{id}:{inner}"),
                _ => id.clone(),
            }),
            IngestError::Io { path, .. } => Some(path.clone()),
            IngestError::Transport { url, .. } => Some(url.clone()),
            _ => None,
        }
    }
}

pub(crate) fn aas_code(error: &AasError) -> &'static str {
    match error {
        AasError::Syntax { .. } => "SyntaxError",
        AasError::Schema { .. } => "SchemaError",
        AasError::NotFound { .. } => "NotFound",
    }
}

/// Ordered process chain of assets within one production system.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ProductionSequence {
    pub system_id: String,
    pub steps: Vec<String>,
}

impl ProductionSequence {
    pub fn new(system_id: impl Into<String>, steps: Vec<String>) -> Result<Self, IngestError> {
        let sequence = ProductionSequence {
            system_id: system_id.into(),
            steps,
        };
        sequence.validate()?;
        Ok(sequence)
    }

    pub fn validate(&self) -> Result<(), IngestError> {
        if self.system_id.trim().is_empty() {
            return Err(IngestError::Validation("systemId must be non-empty".into()));
        }
        if self.steps.is_empty() {
            return Err(IngestError::Validation("steps must be non-empty".into()));
        }
        let mut seen = std::collections::HashSet::new();
        for step in &self.steps {
            if !seen.insert(step) {
                return Err(IngestError::Validation(format!("duplicate step `{step}`")));
            }
        }
        Ok(())
    }

    pub fn position(&self, asset_id: &str) -> Option<usize> {
        self.steps.iter().position(|s| s == asset_id)
    }
}

pub fn load_sequence(json: &str) -> Result<ProductionSequence, IngestError> {
    let sequence: ProductionSequence =
        serde_json::from_str(json).map_err(|e| IngestError::Syntax(e.to_string()))?;
    sequence.validate()?;
    Ok(sequence)
}

/// Reads every `*.json` file in `dir` as a canonical shell document, in
/// file-name order.
pub fn read_dir(dir: &Path) -> Result<Vec<AdministrationShell>, IngestError> {
    let io_err = |path: &Path, e: std::io::Error| IngestError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    };
    let mut paths = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| io_err(dir, e))? {
        let path = entry.map_err(|e| io_err(dir, e))?.path();
        if path.is_file() && path.extension().is_some_and(|ext| ext == "json") {
            paths.push(path);
        }
    }
    paths.sort();
    paths
        .iter()
        .map(|path| {
            let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
            parse_shell(&text).map_err(|source| IngestError::Document {
                path: path.display().to_string(),
                source,
            })
        })
        .collect()
}

/// Rejects collections in which two shells share an id.
pub fn check_unique_ids(shells: &[AdministrationShell]) -> Result<(), IngestError> {
    let mut seen = std::collections::HashSet::new();
    for shell in shells {
        if !seen.insert(shell.id.as_str()) {
            return Err(IngestError::DuplicateShellId(shell.id.clone()));
        }
    }
    Ok(())
}
