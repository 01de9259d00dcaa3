//! Persisted JSON-lines event log.

use std::fs::File;
use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;

use pheromone_core::events::EventMessage;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LogError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("line {line}: {source}")]
    Parse {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
}

pub fn to_line(msg: &EventMessage) -> String {
    serde_json::to_string(msg).expect("event messages always serialize")
}

/// Appends one message per line, flushing after each.
pub struct EventLogWriter<W: Write> {
    inner: W,
}

impl<W: Write> EventLogWriter<W> {
    pub fn new(inner: W) -> Self {
        Self { inner }
    }

    pub fn write(&mut self, msg: &EventMessage) -> io::Result<()> {
        self.write_line(&to_line(msg))
    }

    pub fn write_line(&mut self, line: &str) -> io::Result<()> {
        self.inner.write_all(line.as_bytes())?;
        self.inner.write_all(b"\n")?;
        self.inner.flush()
    }

    pub fn into_inner(self) -> W {
        self.inner
    }
}

/// Parses a log; blank lines are skipped.
pub fn read_event_log<R: BufRead>(reader: R) -> Result<Vec<EventMessage>, LogError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let msg = serde_json::from_str(&line).map_err(|source| LogError::Parse { line: i + 1, source })?;
        out.push(msg);
    }
    Ok(out)
}

pub fn read_event_log_path(path: &Path) -> Result<Vec<EventMessage>, LogError> {
    read_event_log(BufReader::new(File::open(path)?))
}
