//! Difficulty metrics for training examples.
//!
//! Three scores are supported:
//!
//! * **CR** — compression ratio of the raw PCM payload,
//!   `1 - compressed/original`, using gzip at level 6. Cleaner signals
//!   compress further and score higher; noisy signals score lower, so
//!   for CR a *lower* score means a *harder* example. Values may be
//!   negative for incompressible payloads and are deliberately not
//!   clamped: they simply rank as hardest.
//! * **SL** — sentence length, the token count.
//! * **SN** — sentence norm, the Euclidean norm of the mean token
//!   embedding vector.

use std::io::Write;
use std::path::Path;

use flate2::write::GzEncoder;
use flate2::Compression;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audio::{read_wav, AudioError};
use crate::embedding::EmbeddingTable;
use crate::manifest::ScoredUtterance;

/// gzip level used for every compression-ratio score. Rankings depend
/// on the level, so it is fixed rather than configurable.
pub const GZIP_LEVEL: u32 = 6;

#[derive(Debug, Error)]
pub enum ScoringError {
    #[error("payload is empty")]
    EmptyPayload,
    #[error("token sequence is empty")]
    EmptyTokens,
    #[error("token {token} is missing from the embedding table")]
    MissingToken { token: u32 },
    #[error("metric SN requires an embedding table")]
    MissingEmbeddings,
    #[error("utterance `{id}` has no tokens; metric {metric} needs a tokenized transcript")]
    MissingTokens { id: String, metric: Metric },
    #[error("utterance `{id}`: {source}")]
    Audio { id: String, source: AudioError },
}

/// Which difficulty metric produced a score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Metric {
    #[serde(rename = "CR")]
    CompressionRatio,
    #[serde(rename = "SL")]
    SentenceLength,
    #[serde(rename = "SN")]
    SentenceNorm,
}

impl Metric {
    /// True when a lower raw score means a harder example (compression
    /// ratio); length and norm grow with hardness.
    pub fn harder_is_lower(self) -> bool {
        matches!(self, Metric::CompressionRatio)
    }

    /// Orientation-adjusted score: larger always means harder.
    pub fn difficulty(self, score: f64) -> f64 {
        if self.harder_is_lower() {
            -score
        } else {
            score
        }
    }
}

impl std::fmt::Display for Metric {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Metric::CompressionRatio => write!(f, "CR"),
            Metric::SentenceLength => write!(f, "SL"),
            Metric::SentenceNorm => write!(f, "SN"),
        }
    }
}

impl std::str::FromStr for Metric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "CR" => Ok(Metric::CompressionRatio),
            "SL" => Ok(Metric::SentenceLength),
            "SN" => Ok(Metric::SentenceNorm),
            other => Err(format!("unknown metric `{other}`; expected CR, SL or SN")),
        }
    }
}

/// Compression ratio `1 - compressed/original` of a byte payload under
/// gzip at [`GZIP_LEVEL`]. Always below 1; negative when the gzip
/// overhead exceeds the savings, which is typical for high-entropy
/// input.
pub fn compression_ratio(payload: &[u8]) -> Result<f64, ScoringError> {
    if payload.is_empty() {
        return Err(ScoringError::EmptyPayload);
    }
    let mut encoder = GzEncoder::new(Vec::new(), Compression::new(GZIP_LEVEL));
    encoder.write_all(payload).expect("writing to a Vec cannot fail");
    let compressed = encoder.finish().expect("finishing a Vec-backed encoder cannot fail");
    Ok(1.0 - compressed.len() as f64 / payload.len() as f64)
}

/// Token count as a real number; empty sequences score 0.
pub fn sentence_length(tokens: &[u32]) -> f64 {
    tokens.len() as f64
}

/// Euclidean norm of the arithmetic mean of the token vectors.
pub fn sentence_norm(tokens: &[u32], table: &EmbeddingTable) -> Result<f64, ScoringError> {
    if tokens.is_empty() {
        return Err(ScoringError::EmptyTokens);
    }
    let mut mean = vec![0.0_f64; table.dimension()];
    for &token in tokens {
        let vector = table.get(token).ok_or(ScoringError::MissingToken { token })?;
        for (m, v) in mean.iter_mut().zip(vector) {
            *m += v;
        }
    }
    let n = tokens.len() as f64;
    Ok(mean.iter().map(|m| (m / n).powi(2)).sum::<f64>().sqrt())
}

/// Applies a metric to every utterance in a manifest, preserving input
/// order. Utterances are scored in parallel; relative audio paths are
/// resolved against `audio_root` when given.
pub fn score_manifest(
    entries: &[ScoredUtterance],
    metric: Metric,
    table: Option<&EmbeddingTable>,
    audio_root: Option<&Path>,
) -> Result<Vec<ScoredUtterance>, ScoringError> {
    if metric == Metric::SentenceNorm && table.is_none() {
        return Err(ScoringError::MissingEmbeddings);
    }

    let results: Vec<Result<ScoredUtterance, ScoringError>> = entries
        .par_iter()
        .map(|entry| {
            let score = score_one(entry, metric, table, audio_root)?;
            let mut scored = entry.clone();
            scored.score = Some(score);
            Ok(scored)
        })
        .collect();

    results.into_iter().collect()
}

fn score_one(
    entry: &ScoredUtterance,
    metric: Metric,
    table: Option<&EmbeddingTable>,
    audio_root: Option<&Path>,
) -> Result<f64, ScoringError> {
    match metric {
        Metric::CompressionRatio => {
            let path = Path::new(&entry.audio);
            let resolved = match audio_root {
                Some(root) if path.is_relative() => root.join(path),
                _ => path.to_path_buf(),
            };
            let audio = read_wav(&resolved)
                .map_err(|source| ScoringError::Audio { id: entry.id.clone(), source })?;
            compression_ratio(&audio.pcm_bytes())
        }
        Metric::SentenceLength => {
            let tokens = non_empty_tokens(entry, metric)?;
            Ok(sentence_length(tokens))
        }
        Metric::SentenceNorm => {
            let tokens = non_empty_tokens(entry, metric)?;
            sentence_norm(tokens, table.expect("checked by score_manifest"))
        }
    }
}

fn non_empty_tokens(entry: &ScoredUtterance, metric: Metric) -> Result<&[u32], ScoringError> {
    match entry.tokens.as_deref() {
        Some(tokens) if !tokens.is_empty() => Ok(tokens),
        _ => Err(ScoringError::MissingTokens { id: entry.id.clone(), metric }),
    }
}
