//! JSON-lines utterance manifests: one object per line with `id`,
//! `audio`, `text`, optional `tokens`, and (after scoring) `score`.

use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("manifest i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("manifest line {line}: {source}")]
    Json {
        line: usize,
        source: serde_json::Error,
    },
    #[error("manifest line {line}: duplicate utterance id `{id}`")]
    DuplicateId { id: String, line: usize },
}

/// One training example: an audio reference, its transcript, optional
/// token ids, and a difficulty score once a metric has been applied.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredUtterance {
    pub id: String,
    pub audio: String,
    pub text: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tokens: Option<Vec<u32>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
}

/// Parses a JSON-lines manifest. Blank lines are ignored; ids must be
/// unique.
pub fn parse_manifest<R: BufRead>(reader: R) -> Result<Vec<ScoredUtterance>, ManifestError> {
    let mut entries = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let entry: ScoredUtterance =
            serde_json::from_str(&line).map_err(|source| ManifestError::Json { line: idx + 1, source })?;
        if !seen.insert(entry.id.clone()) {
            return Err(ManifestError::DuplicateId { id: entry.id, line: idx + 1 });
        }
        entries.push(entry);
    }
    Ok(entries)
}

pub fn read_manifest<P: AsRef<Path>>(path: P) -> Result<Vec<ScoredUtterance>, ManifestError> {
    let file = std::fs::File::open(path)?;
    parse_manifest(std::io::BufReader::new(file))
}

pub fn write_manifest<W: Write>(mut writer: W, entries: &[ScoredUtterance]) -> Result<(), ManifestError> {
    for entry in entries {
        let line = serde_json::to_string(entry).expect("manifest entries serialize");
        writeln!(writer, "{line}")?;
    }
    Ok(())
}
