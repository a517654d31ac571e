//! Run traces: one JSON header line with the run configuration, then
//! one JSON line per step. The per-epoch policy means exported from a
//! trace are the data behind policy-over-time plots.

use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scheduler::RunConfig;

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("trace i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("trace file is empty")]
    Empty,
    #[error("trace line {line}: {source}")]
    Json {
        line: usize,
        source: serde_json::Error,
    },
    #[error("trace line {line}: step {step} does not increase over the previous record")]
    OutOfOrder { line: usize, step: u64 },
}

/// Everything observed at one scheduler step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub step: u64,
    pub epoch: u64,
    /// 1-based task the learner actually trained on.
    pub chosen_k: usize,
    /// True when the bandit's pick was exhausted and another task was
    /// substituted by policy rank.
    pub fallback_used: bool,
    pub raw_gain: f64,
    pub mapped_reward: f64,
    /// Policy vector after this step's bandit update.
    pub policy: Vec<f64>,
    pub train_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub config: RunConfig,
    pub records: Vec<TraceRecord>,
}

impl RunTrace {
    pub fn write_to<W: Write>(&self, mut writer: W) -> Result<(), TraceError> {
        let header = serde_json::to_string(&self.config).expect("config serializes");
        writeln!(writer, "{header}")?;
        for record in &self.records {
            let line = serde_json::to_string(record).expect("records serialize");
            writeln!(writer, "{line}")?;
        }
        Ok(())
    }

    pub fn write_to_file<P: AsRef<Path>>(&self, path: P) -> Result<(), TraceError> {
        let file = std::fs::File::create(path)?;
        let mut writer = std::io::BufWriter::new(file);
        self.write_to(&mut writer)?;
        writer.flush()?;
        Ok(())
    }

    pub fn read_from<R: BufRead>(reader: R) -> Result<Self, TraceError> {
        let mut lines = reader.lines().enumerate();
        let config: RunConfig = loop {
            match lines.next() {
                Some((idx, line)) => {
                    let line = line?;
                    if line.trim().is_empty() {
                        continue;
                    }
                    break serde_json::from_str(&line).map_err(|source| TraceError::Json { line: idx + 1, source })?;
                }
                None => return Err(TraceError::Empty),
            }
        };

        let mut records: Vec<TraceRecord> = Vec::new();
        for (idx, line) in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let record: TraceRecord =
                serde_json::from_str(&line).map_err(|source| TraceError::Json { line: idx + 1, source })?;
            if let Some(last) = records.last() {
                if record.step <= last.step {
                    return Err(TraceError::OutOfOrder { line: idx + 1, step: record.step });
                }
            }
            records.push(record);
        }
        Ok(Self { config, records })
    }

    pub fn read_from_file<P: AsRef<Path>>(path: P) -> Result<Self, TraceError> {
        let file = std::fs::File::open(path)?;
        Self::read_from(std::io::BufReader::new(file))
    }
}
