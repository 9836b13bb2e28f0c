//! JSON Lines reading and writing: one UTF-8 record per line.

use std::io::{self, BufRead, Write};

use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;

use crate::error::RecordError;
use crate::record::{parse_record, ByproductRecord, ParseMode};

#[derive(Debug, Error)]
pub enum JsonlError {
    #[error("line {line}: {source}")]
    Record { line: usize, source: RecordError },
    #[error("line {line}: {source}")]
    Json {
        line: usize,
        source: serde_json::Error,
    },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Reads and validates byproduct records. Blank lines are skipped; line
/// numbers in errors are 1-based.
pub fn read_records<R: ByproductRecord>(
    reader: impl BufRead,
    mode: ParseMode,
) -> Result<Vec<R>, JsonlError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = parse_record(line.as_bytes(), mode)
            .map_err(|source| JsonlError::Record { line: i + 1, source })?;
        out.push(rec);
    }
    Ok(out)
}

pub fn write_records<R: ByproductRecord>(
    mut writer: impl Write,
    records: &[R],
) -> io::Result<()> {
    for r in records {
        writer.write_all(r.to_json_string().as_bytes())?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}

/// Reads arbitrary serde rows (ground truth, verdicts, events).
pub fn read_json_lines<T: DeserializeOwned>(reader: impl BufRead) -> Result<Vec<T>, JsonlError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row = serde_json::from_str(&line).map_err(|source| JsonlError::Json { line: i + 1, source })?;
        out.push(row);
    }
    Ok(out)
}

pub fn write_json_lines<T: Serialize>(mut writer: impl Write, rows: &[T]) -> io::Result<()> {
    for r in rows {
        serde_json::to_writer(&mut writer, r)?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}
