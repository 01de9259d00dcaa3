//! Per-day score distributions and the hour-by-day TS grid.

use std::collections::BTreeMap;
use std::io::Write;

use chrono::{NaiveDate, Timelike};
use pheromone_core::scoring::ScoreRecord;
use statrs::statistics::{Data, Distribution, Max, Min, OrderStatistics};

/// Score columns summarised per day, with their output names.
const SCORES: [(&str, fn(&ScoreRecord) -> f64); 5] = [
    ("BS", |r| r.bs),
    ("MBS", |r| r.mbs),
    ("ThS", |r| r.ths),
    ("ES", |r| r.es),
    ("TS", |r| r.ts),
];

pub const SUMMARY_HEADER: [&str; 10] =
    ["day", "score", "count", "min", "p25", "median", "p75", "max", "mean", "std"];

#[derive(Debug, Clone, PartialEq)]
pub struct DailyRow {
    pub day: NaiveDate,
    pub score: &'static str,
    pub count: usize,
    pub min: f64,
    pub p25: f64,
    pub median: f64,
    pub p75: f64,
    pub max: f64,
    pub mean: f64,
    pub std: f64,
}

fn by_day<'a>(records: impl IntoIterator<Item = &'a ScoreRecord>) -> BTreeMap<NaiveDate, Vec<&'a ScoreRecord>> {
    let mut days: BTreeMap<NaiveDate, Vec<&ScoreRecord>> = BTreeMap::new();
    for r in records {
        days.entry(r.day).or_default().push(r);
    }
    days
}

pub fn daily_summary<'a>(records: impl IntoIterator<Item = &'a ScoreRecord>) -> Vec<DailyRow> {
    let mut rows = Vec::new();
    for (day, recs) in by_day(records) {
        for (score, get) in SCORES {
            let mut data = Data::new(recs.iter().map(|r| get(r)).collect::<Vec<_>>());
            rows.push(DailyRow {
                day,
                score,
                count: recs.len(),
                min: data.min(),
                p25: data.lower_quartile(),
                median: data.median(),
                p75: data.upper_quartile(),
                max: data.max(),
                mean: data.mean().unwrap_or(f64::NAN),
                std: data.std_dev().unwrap_or(f64::NAN),
            });
        }
    }
    rows
}

fn fmt(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.4}")
    } else {
        String::new()
    }
}

pub fn write_daily_summary<W: Write>(writer: W, rows: &[DailyRow]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(SUMMARY_HEADER)?;
    for r in rows {
        w.write_record([
            r.day.to_string(),
            r.score.to_string(),
            r.count.to_string(),
            fmt(r.min),
            fmt(r.p25),
            fmt(r.median),
            fmt(r.p75),
            fmt(r.max),
            fmt(r.mean),
            fmt(r.std),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Production hours in schedule order, 07 through 02.
pub fn production_hours() -> impl Iterator<Item = u32> {
    (7..24).chain(0..3)
}

/// Mean TS per (production hour, day). Rows are hours 07..02, columns days.
pub fn write_ts_grid<'a, W: Write>(
    writer: W,
    records: impl IntoIterator<Item = &'a ScoreRecord>,
) -> csv::Result<()> {
    let days = by_day(records);
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["hour".to_string()];
    header.extend(days.keys().map(NaiveDate::to_string));
    w.write_record(&header)?;
    for hour in production_hours() {
        let mut row = vec![format!("{hour:02}")];
        for recs in days.values() {
            let ts: Vec<f64> = recs
                .iter()
                .filter(|r| r.timestamp.hour() == hour)
                .map(|r| r.ts)
                .collect();
            row.push(if ts.is_empty() {
                String::new()
            } else {
                fmt(ts.iter().sum::<f64>() / ts.len() as f64)
            });
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::{Duration, FixedOffset, TimeZone};
    use pheromone_core::scoring::ScoreStatus;

    fn rec(day: u32, minute: i64, ts: f64) -> ScoreRecord {
        let start = FixedOffset::east_opt(0)
            .unwrap()
            .with_ymd_and_hms(2025, 4, day, 7, 0, 0)
            .unwrap();
        ScoreRecord {
            day: NaiveDate::from_ymd_opt(2025, 4, day).unwrap(),
            cycle_id: (minute / 2) as u32,
            timestamp: start + Duration::minutes(minute),
            bs: ts / 2.0,
            t1: 1.0,
            t2: 1.0,
            mbs: ts / 2.0,
            ths: 0.0,
            es: 0.0,
            ts,
            status: ScoreStatus::Finalized,
            lookahead: 5,
            es_complete: false,
            warmup: false,
        }
    }

    #[test]
    fn quartiles_per_day() {
        let records: Vec<_> = (0..5).map(|i| rec(7, 2 * i, f64::from(i as u32))).collect();
        let rows = daily_summary(&records);
        assert_eq!(rows.len(), 5);
        let ts = rows.iter().find(|r| r.score == "TS").unwrap();
        assert_eq!((ts.count, ts.min, ts.median, ts.max, ts.mean), (5, 0.0, 2.0, 4.0, 2.0));
    }

    #[test]
    fn grid_layout() {
        let records = vec![rec(7, 0, 2.0), rec(7, 2, 4.0), rec(8, 60 * 18, 9.0)];
        let mut buf = Vec::new();
        write_ts_grid(&mut buf, &records).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "hour,2025-04-07,2025-04-08");
        assert_eq!(lines[1], "07,3.0000,");
        assert_eq!(lines.len(), 21);
        assert_eq!(lines[20], "02,,");
        assert!(lines.contains(&"01,,9.0000"));
    }
}
