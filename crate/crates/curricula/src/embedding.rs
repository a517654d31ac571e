//! Token-embedding tables in a plain text format: a header line
//! `<vocab_size> <dimension>` followed by one `<token_id> <v1> ... <vd>`
//! line per token.

use std::collections::HashMap;
use std::io::BufRead;
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error("embedding i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("embedding table is empty")]
    Empty,
    #[error("embedding header line {line}: expected `<vocab_size> <dimension>`, got `{text}`")]
    BadHeader { line: usize, text: String },
    #[error("embedding dimension must be positive")]
    ZeroDimension,
    #[error("embedding line {line}: expected {expected} fields, found {found}")]
    WrongFieldCount { line: usize, expected: usize, found: usize },
    #[error("embedding line {line}: cannot parse `{text}` as a number")]
    BadNumber { line: usize, text: String },
    #[error("embedding line {line}: duplicate token id {token}")]
    DuplicateToken { token: u32, line: usize },
    #[error("embedding table declares {declared} vectors but contains {found}")]
    CountMismatch { declared: usize, found: usize },
}

/// Dense vectors keyed by token id; every vector has exactly
/// `dimension` entries.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dimension: usize,
    vectors: HashMap<u32, Vec<f64>>,
}

impl EmbeddingTable {
    pub fn new(dimension: usize) -> Result<Self, EmbeddingError> {
        if dimension == 0 {
            return Err(EmbeddingError::ZeroDimension);
        }
        Ok(Self { dimension, vectors: HashMap::new() })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// Inserts a vector; the length must match the table dimension.
    pub fn insert(&mut self, token: u32, vector: Vec<f64>) -> Result<(), EmbeddingError> {
        if vector.len() != self.dimension {
            return Err(EmbeddingError::WrongFieldCount {
                line: 0,
                expected: self.dimension,
                found: vector.len(),
            });
        }
        self.vectors.insert(token, vector);
        Ok(())
    }

    pub fn get(&self, token: u32) -> Option<&[f64]> {
        self.vectors.get(&token).map(Vec::as_slice)
    }
}

/// Parses the text format described in the module docs.
pub fn parse_embeddings<R: BufRead>(reader: R) -> Result<EmbeddingTable, EmbeddingError> {
    let mut lines = reader.lines().enumerate();

    let (header_idx, header) = loop {
        match lines.next() {
            Some((idx, line)) => {
                let line = line?;
                if !line.trim().is_empty() {
                    break (idx, line);
                }
            }
            None => return Err(EmbeddingError::Empty),
        }
    };
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 2 {
        return Err(EmbeddingError::BadHeader { line: header_idx + 1, text: header.clone() });
    }
    let declared: usize = fields[0]
        .parse()
        .map_err(|_| EmbeddingError::BadHeader { line: header_idx + 1, text: header.clone() })?;
    let dimension: usize = fields[1]
        .parse()
        .map_err(|_| EmbeddingError::BadHeader { line: header_idx + 1, text: header.clone() })?;
    if dimension == 0 {
        return Err(EmbeddingError::ZeroDimension);
    }

    let mut table = EmbeddingTable::new(dimension)?;
    for (idx, line) in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != dimension + 1 {
            return Err(EmbeddingError::WrongFieldCount {
                line: idx + 1,
                expected: dimension + 1,
                found: fields.len(),
            });
        }
        let token: u32 = fields[0]
            .parse()
            .map_err(|_| EmbeddingError::BadNumber { line: idx + 1, text: fields[0].to_string() })?;
        if table.get(token).is_some() {
            return Err(EmbeddingError::DuplicateToken { token, line: idx + 1 });
        }
        let mut vector = Vec::with_capacity(dimension);
        for f in &fields[1..] {
            let v: f64 = f
                .parse()
                .map_err(|_| EmbeddingError::BadNumber { line: idx + 1, text: (*f).to_string() })?;
            vector.push(v);
        }
        table.insert(token, vector)?;
    }

    if table.len() != declared {
        return Err(EmbeddingError::CountMismatch { declared, found: table.len() });
    }
    Ok(table)
}

pub fn read_embeddings<P: AsRef<Path>>(path: P) -> Result<EmbeddingTable, EmbeddingError> {
    let file = std::fs::File::open(path)?;
    parse_embeddings(std::io::BufReader::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_valid_table() {
        let input = "2 3\n0 1.0 2.0 3.0\n7 -1 0.5 0\n";
        let table = parse_embeddings(input.as_bytes()).unwrap();
        assert_eq!(table.dimension(), 3);
        assert_eq!(table.len(), 2);
        assert_eq!(table.get(7), Some(&[-1.0, 0.5, 0.0][..]));
        assert_eq!(table.get(1), None);
    }

    #[test]
    fn rejects_bad_header() {
        assert!(matches!(parse_embeddings(&b"nope\n"[..]), Err(EmbeddingError::BadHeader { line: 1, .. })));
        assert!(matches!(parse_embeddings(&b""[..]), Err(EmbeddingError::Empty)));
        assert!(matches!(parse_embeddings(&b"1 0\n"[..]), Err(EmbeddingError::ZeroDimension)));
    }

    #[test]
    fn rejects_wrong_field_count() {
        let input = "1 3\n0 1.0 2.0\n";
        assert!(matches!(
            parse_embeddings(input.as_bytes()),
            Err(EmbeddingError::WrongFieldCount { line: 2, expected: 4, found: 3 })
        ));
    }

    #[test]
    fn rejects_duplicates_and_count_mismatch() {
        let dup = "2 1\n0 1.0\n0 2.0\n";
        assert!(matches!(
            parse_embeddings(dup.as_bytes()),
            Err(EmbeddingError::DuplicateToken { token: 0, line: 3 })
        ));
        let short = "3 1\n0 1.0\n1 2.0\n";
        assert!(matches!(
            parse_embeddings(short.as_bytes()),
            Err(EmbeddingError::CountMismatch { declared: 3, found: 2 })
        ));
    }

    #[test]
    fn rejects_unparseable_numbers() {
        let input = "1 2\n0 1.0 abc\n";
        assert!(matches!(parse_embeddings(input.as_bytes()), Err(EmbeddingError::BadNumber { line: 2, .. })));
    }
}
