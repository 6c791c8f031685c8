//! Line-delimited input: JSON records or plain text, one document per line.

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use serde_json::Value;
use thiserror::Error;

use crate::instance::Label;
use crate::textpipe::Document;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {malformed} of {lines} lines are malformed (first at line {first})")]
    TooManyMalformed {
        path: PathBuf,
        malformed: u64,
        lines: u64,
        first: u64,
    },
}

/// Parses one input line; `None` for malformed lines. Plain-text lines get
/// the id `line-<n>`.
pub fn parse_line(line: &str, line_no: u64) -> Option<Document> {
    let trimmed = line.trim();
    if trimmed.is_empty() {
        return None;
    }
    if !trimmed.starts_with('{') {
        return Some(Document {
            id: format!("line-{line_no}"),
            text: trimmed.to_string(),
            ..Document::default()
        });
    }
    let Value::Object(record) = serde_json::from_str::<Value>(trimmed).ok()? else {
        return None;
    };
    let text = record.get("text")?.as_str()?;
    if text.trim().is_empty() {
        return None;
    }
    let id = match record.get("id") {
        Some(Value::String(s)) => s.clone(),
        Some(Value::Number(n)) => n.to_string(),
        _ => format!("line-{line_no}"),
    };
    let lang = record.get("lang").and_then(Value::as_str).map(str::to_string);
    let timestamp = match record.get("created_at") {
        Some(Value::Number(n)) => n.as_i64(),
        Some(Value::String(s)) => s.parse().ok(),
        _ => None,
    };
    let label = match record.get("label") {
        None | Some(Value::Null) => None,
        Some(Value::String(s)) => Some(s.parse::<Label>().ok()?),
        // 0 / 2 / 4 polarity codes
        Some(Value::Number(n)) => Some(match n.as_i64()? {
            0 => Label::Negative,
            2 => Label::Neutral,
            4 => Label::Positive,
            _ => return None,
        }),
        Some(_) => return None,
    };
    Some(Document {
        id,
        text: text.to_string(),
        lang,
        timestamp,
        label,
    })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct IngestStats {
    pub lines: u64,
    pub malformed: u64,
    pub first_malformed: Option<u64>,
}

/// Validates the whole file without keeping any document, so a run can be
/// refused before it starts.
pub fn scan(path: &Path) -> Result<IngestStats, IngestError> {
    let io = |source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    };
    let reader = BufReader::new(File::open(path).map_err(io)?);
    let mut stats = IngestStats::default();
    for line in reader.lines() {
        let line = line.map_err(io)?;
        stats.lines += 1;
        if parse_line(&line, stats.lines).is_none() {
            stats.malformed += 1;
            stats.first_malformed.get_or_insert(stats.lines);
        }
    }
    if stats.malformed * 2 > stats.lines {
        return Err(IngestError::TooManyMalformed {
            path: path.to_path_buf(),
            malformed: stats.malformed,
            lines: stats.lines,
            first: stats.first_malformed.unwrap_or(0),
        });
    }
    Ok(stats)
}

/// Lazily yields the well-formed documents of a file in order.
pub struct DocumentReader {
    lines: std::io::Lines<BufReader<File>>,
    line_no: u64,
    malformed: u64,
}

impl DocumentReader {
    pub fn open(path: &Path) -> Result<Self, IngestError> {
        let file = File::open(path).map_err(|source| IngestError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Ok(Self {
            lines: BufReader::new(file).lines(),
            line_no: 0,
            malformed: 0,
        })
    }

    pub fn malformed(&self) -> u64 {
        self.malformed
    }
}

impl Iterator for DocumentReader {
    type Item = Document;

    fn next(&mut self) -> Option<Document> {
        loop {
            let line = self.lines.next()?.ok()?;
            self.line_no += 1;
            match parse_line(&line, self.line_no) {
                Some(d) => return Some(d),
                None => self.malformed += 1,
            }
        }
    }
}

/// Checks then opens `path`.
pub fn ingest(path: &Path) -> Result<(IngestStats, DocumentReader), IngestError> {
    let stats = scan(path)?;
    Ok((stats, DocumentReader::open(path)?))
}
