//! Cycle CSV files and their label sidecars.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use chrono::{DateTime, FixedOffset};
use pheromone_core::domain::{AntCycle, ProductionCalendar, READINGS_PER_CYCLE};
use pheromone_core::metrics::{EpisodeLabel, Truth};
use serde::Deserialize;
use thiserror::Error;

pub const CSV_HEADER: [&str; 9] = ["timestamp", "t1", "t2", "t3", "t4", "t5", "t6", "t7", "t8"];
pub const LABEL_HEADER: [&str; 4] = ["start", "end", "truth", "tag"];
/// ISO-8601 at minute precision with an explicit offset.
pub const TIMESTAMP_FORMAT: &str = "%Y-%m-%dT%H:%M%:z";

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("missing header: expected `{}`, found `{found}`", CSV_HEADER.join(","))]
    MissingHeader { found: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// A row that could not be turned into a cycle; ingestion continues past it.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {reason}")]
pub struct UnparsableRow {
    pub line: u64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Ingested {
    pub cycles: Vec<AntCycle>,
    pub errors: Vec<UnparsableRow>,
}

pub fn parse_timestamp(s: &str) -> Result<DateTime<FixedOffset>, chrono::ParseError> {
    DateTime::parse_from_str(s, TIMESTAMP_FORMAT).or_else(|_| DateTime::parse_from_rfc3339(s))
}

pub fn format_timestamp(ts: &DateTime<FixedOffset>) -> String {
    ts.format(TIMESTAMP_FORMAT).to_string()
}

/// Reads cycles in file order. An empty input yields no cycles.
pub fn ingest_csv<R: Read>(reader: R, calendar: &ProductionCalendar) -> Result<Ingested, IngestError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(reader);
    let mut records = rdr.records();
    let mut out = Ingested::default();
    match records.next() {
        None => return Ok(out),
        Some(header) => {
            let header = header?;
            if header.iter().ne(CSV_HEADER) {
                return Err(IngestError::MissingHeader {
                    found: header.iter().collect::<Vec<_>>().join(","),
                });
            }
        }
    }
    for row in records {
        let row = match row {
            Ok(row) => row,
            Err(e) => {
                let line = e.position().map_or(0, |p| p.line());
                out.errors.push(UnparsableRow {
                    line,
                    reason: e.to_string(),
                });
                continue;
            }
        };
        let line = row.position().map_or(0, |p| p.line());
        match parse_row(&row, calendar) {
            Ok(cycle) => out.cycles.push(cycle),
            Err(reason) => out.errors.push(UnparsableRow { line, reason }),
        }
    }
    Ok(out)
}

fn parse_row(row: &csv::StringRecord, calendar: &ProductionCalendar) -> Result<AntCycle, String> {
    let mut fields = row.iter();
    let ts = fields.next().ok_or("empty row")?;
    let ts = parse_timestamp(ts.trim()).map_err(|e| format!("bad timestamp `{ts}`: {e}"))?;
    let readings = fields
        .map(|f| {
            f.trim()
                .parse::<f64>()
                .map_err(|_| format!("bad temperature `{f}`"))
        })
        .collect::<Result<Vec<_>, _>>()?;
    calendar
        .validate_cycle(&readings, ts)
        .map_err(|e| e.to_string())
}

pub fn ingest_csv_path(path: &Path, calendar: &ProductionCalendar) -> Result<Ingested, IngestError> {
    ingest_csv(File::open(path)?, calendar)
}

/// Writes cycles with the exact header; temperatures use the shortest
/// representation that parses back to the same value.
pub fn write_cycles_csv<'a, W: Write>(
    writer: W,
    cycles: impl IntoIterator<Item = &'a AntCycle>,
) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(CSV_HEADER)?;
    for c in cycles {
        let mut row = Vec::with_capacity(READINGS_PER_CYCLE + 1);
        row.push(format_timestamp(&c.timestamp));
        row.extend(c.readings.iter().map(f64::to_string));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Deserialize)]
struct LabelRow {
    start: DateTime<FixedOffset>,
    end: DateTime<FixedOffset>,
    truth: Truth,
    tag: Option<String>,
}

pub fn write_labels_csv<'a, W: Write>(
    writer: W,
    labels: impl IntoIterator<Item = &'a EpisodeLabel>,
) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(LABEL_HEADER)?;
    for l in labels {
        let truth = match l.truth {
            Truth::OutOfControl => "OutC",
            Truth::InControl => "InC",
        };
        w.write_record([
            l.start.to_rfc3339(),
            l.end.to_rfc3339(),
            truth.to_string(),
            l.tag.clone().unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_labels_csv<R: Read>(reader: R) -> csv::Result<Vec<EpisodeLabel>> {
    csv::Reader::from_reader(reader)
        .deserialize::<LabelRow>()
        .map(|row| {
            row.map(|r| EpisodeLabel {
                start: r.start,
                end: r.end,
                truth: r.truth,
                tag: r.tag.filter(|t| !t.is_empty()),
            })
        })
        .collect()
}

pub fn read_labels_path(path: &Path) -> Result<Vec<EpisodeLabel>, IngestError> {
    Ok(read_labels_csv(File::open(path)?)?)
}
