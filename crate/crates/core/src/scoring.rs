//! The pheromone score stack and the streaming pipeline that computes it.
//!
//! Per cycle: the base score `BS` from banded reading counts, the tuned
//! `MBS = T1 * T2 * BS` (T1 needs the next five cycles' BS), the threat score
//! `ThS` from the annotation, the environmental score `ES` from the previous
//! thirty MBS values and the total `TS = MBS + ThS + ES`.

use std::collections::VecDeque;

use chrono::{DateTime, FixedOffset, NaiveDate};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::annotator::{Annotation, Annotator};
use crate::domain::{AntCycle, ProductionCalendar};

/// Future cycles needed to finalise T1.
pub const LOOKAHEAD: usize = 5;
/// Cycles in one environmental-score block.
pub const ES_BLOCK: usize = 10;
/// Past MBS values feeding the environmental score.
pub const ES_HISTORY: usize = 3 * ES_BLOCK;
/// Block weights from oldest to newest.
pub const ES_WEIGHTS: [f64; 3] = [0.5, 0.75, 1.0];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScoringError {
    #[error("minimum reading {0} is not positive")]
    NonPositiveMin(f64),
    #[error("T1 needs {LOOKAHEAD} subsequent base scores, got {0}")]
    InsufficientLookahead(usize),
    #[error("ES needs {ES_HISTORY} prior MBS values, got {0}")]
    InsufficientHistory(usize),
    #[error("cycle at {got} does not follow {previous}")]
    OutOfOrder {
        previous: DateTime<FixedOffset>,
        got: DateTime<FixedOffset>,
    },
}

/// Counts of readings strictly above 184, 188, 192 and strictly below 180.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct BandCounts {
    pub above_184: u8,
    pub above_188: u8,
    pub above_192: u8,
    pub below_180: u8,
}

impl BandCounts {
    /// `(N184 + N188 + N192 - N180) / 2`
    pub fn multiplier(&self) -> f64 {
        (f64::from(self.above_184) + f64::from(self.above_188) + f64::from(self.above_192)
            - f64::from(self.below_180))
            / 2.0
    }
}

pub fn band_counts(readings: &[f64]) -> BandCounts {
    let count = |pred: &dyn Fn(f64) -> bool| readings.iter().filter(|&&t| pred(t)).count() as u8;
    BandCounts {
        above_184: count(&|t| t > 184.0),
        above_188: count(&|t| t > 188.0),
        above_192: count(&|t| t > 192.0),
        below_180: count(&|t| t < 180.0),
    }
}

/// `BS = (max / min) * multiplier`.
pub fn base_score(readings: &[f64]) -> Result<f64, ScoringError> {
    let max = readings.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = readings.iter().copied().fold(f64::INFINITY, f64::min);
    if !(min > 0.0) {
        return Err(ScoringError::NonPositiveMin(min));
    }
    Ok(max / min * band_counts(readings).multiplier())
}

/// T1 over exactly five subsequent base scores.
pub fn tuning_t1(bs: f64, next: &[f64]) -> Result<f64, ScoringError> {
    if next.len() < LOOKAHEAD {
        return Err(ScoringError::InsufficientLookahead(next.len()));
    }
    Ok(partial_t1(bs, &next[..LOOKAHEAD]))
}

/// The raw T1 counting rule over however many future values are supplied.
///
/// A value that is both negative and larger than `bs` counts in both terms.
pub fn partial_t1(bs: f64, next: &[f64]) -> f64 {
    let rising = next.iter().filter(|&&b| b > bs).count() as f64;
    let negative = next.iter().filter(|&&b| b < 0.0).count() as f64;
    1.0 + 0.1 * rising - 0.05 * negative
}

/// 1.1 when the last four readings strictly increase, 0.9 when the last three
/// strictly decrease, 1.0 otherwise.
pub fn tuning_t2(readings: &[f64]) -> f64 {
    let n = readings.len();
    if n < 4 {
        return 1.0;
    }
    let tail = &readings[n - 4..];
    if tail.windows(2).all(|w| w[0] < w[1]) {
        1.1
    } else if tail[1..].windows(2).all(|w| w[0] > w[1]) {
        0.9
    } else {
        1.0
    }
}

pub fn modified_base_score(bs: f64, t1: f64, t2: f64) -> f64 {
    t1 * t2 * bs
}

/// `ThS = CP + M + m + R` with `M, R in {0, 1}` and `m in {-0.5, 0}`.
pub fn threat_score(annotation: &Annotation) -> f64 {
    let mut score = f64::from(annotation.cp_count);
    if annotation.flag_max {
        score += 1.0;
    }
    if annotation.flag_min {
        score -= 0.5;
    }
    if annotation.flag_range {
        score += 1.0;
    }
    score
}

/// Weighted sum of the three ten-cycle block means of `window` (oldest first).
pub fn environmental_score(window: &[f64]) -> Result<f64, ScoringError> {
    if window.len() != ES_HISTORY {
        return Err(ScoringError::InsufficientHistory(window.len()));
    }
    let mean = |block: &[f64]| block.iter().sum::<f64>() / ES_BLOCK as f64;
    Ok(window
        .chunks_exact(ES_BLOCK)
        .zip(ES_WEIGHTS)
        .map(|(block, w)| w * mean(block))
        .sum())
}

pub fn total_score(mbs: f64, ths: f64, es: f64) -> f64 {
    mbs + ths + es
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScoreStatus {
    Provisional,
    Finalized,
}

/// All scores for one cycle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub day: NaiveDate,
    pub cycle_id: u32,
    pub timestamp: DateTime<FixedOffset>,
    #[serde(rename = "BS")]
    pub bs: f64,
    #[serde(rename = "T1")]
    pub t1: f64,
    #[serde(rename = "T2")]
    pub t2: f64,
    #[serde(rename = "MBS")]
    pub mbs: f64,
    #[serde(rename = "ThS")]
    pub ths: f64,
    #[serde(rename = "ES")]
    pub es: f64,
    #[serde(rename = "TS")]
    pub ts: f64,
    pub status: ScoreStatus,
    /// Future base scores that went into T1 (fewer than five only at day end).
    pub lookahead: u8,
    /// False while fewer than thirty same-day MBS values precede the cycle.
    pub es_complete: bool,
    pub warmup: bool,
}

impl ScoreRecord {
    pub fn is_finalized(&self) -> bool {
        self.status == ScoreStatus::Finalized
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Emission {
    Provisional {
        record: ScoreRecord,
        annotation: Annotation,
    },
    Finalized {
        record: ScoreRecord,
        annotation: Annotation,
    },
}

impl Emission {
    pub fn record(&self) -> &ScoreRecord {
        match self {
            Emission::Provisional { record, .. } | Emission::Finalized { record, .. } => record,
        }
    }

    pub fn annotation(&self) -> &Annotation {
        match self {
            Emission::Provisional { annotation, .. } | Emission::Finalized { annotation, .. } => {
                annotation
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct PendingCycle {
    cycle: AntCycle,
    annotation: Annotation,
    bs: f64,
    t2: f64,
    ths: f64,
}

/// Same-day MBS history plus the cycles still waiting for their lookahead.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScoreWindow {
    history: VecDeque<f64>,
    pending: VecDeque<PendingCycle>,
}

impl ScoreWindow {
    /// Finalised MBS values of the current day, oldest first (at most thirty).
    pub fn history(&self) -> impl Iterator<Item = f64> + '_ {
        self.history.iter().copied()
    }

    pub fn pending_len(&self) -> usize {
        self.pending.len()
    }

    fn push_history(&mut self, mbs: f64) {
        if self.history.len() == ES_HISTORY {
            self.history.pop_front();
        }
        self.history.push_back(mbs);
    }

    fn clear(&mut self) {
        self.history.clear();
        self.pending.clear();
    }
}

fn es_or_zero(window: &[f64]) -> (f64, bool) {
    match environmental_score(window) {
        Ok(es) => (es, true),
        Err(_) => (0.0, false),
    }
}

/// Single-writer streaming scorer for one production line.
#[derive(Debug, Clone)]
pub struct Pipeline {
    annotator: Annotator,
    calendar: ProductionCalendar,
    window: ScoreWindow,
    last: Option<(NaiveDate, u32, DateTime<FixedOffset>)>,
}

impl Pipeline {
    pub fn new(annotator: Annotator, calendar: ProductionCalendar) -> Self {
        Self {
            annotator,
            calendar,
            window: ScoreWindow::default(),
            last: None,
        }
    }

    pub fn window(&self) -> &ScoreWindow {
        &self.window
    }

    pub fn annotator(&self) -> &Annotator {
        &self.annotator
    }

    /// Scores `cycle`, returning any finalised records followed by the new
    /// cycle's provisional record.
    ///
    /// A cycle from a later production day first flushes the previous day.
    pub fn push_cycle(&mut self, cycle: AntCycle) -> Result<Vec<Emission>, ScoringError> {
        let mut out = Vec::new();
        if let Some((day, id, ts)) = self.last {
            let regress = cycle.day < day || (cycle.day == day && cycle.cycle_id <= id);
            if regress {
                return Err(ScoringError::OutOfOrder {
                    previous: ts,
                    got: cycle.timestamp,
                });
            }
            if cycle.day != day {
                out.extend(self.finish_day());
            }
        }
        let bs = base_score(&cycle.readings)?;
        self.last = Some((cycle.day, cycle.cycle_id, cycle.timestamp));

        if self.window.pending.len() == LOOKAHEAD {
            let next: Vec<f64> = self
                .window
                .pending
                .iter()
                .skip(1)
                .map(|p| p.bs)
                .chain(std::iter::once(bs))
                .collect();
            out.push(self.finalize_front(&next));
        }

        let annotation = self.annotator.annotate(&cycle);
        let pending = PendingCycle {
            t2: tuning_t2(&cycle.readings),
            ths: threat_score(&annotation),
            bs,
            annotation,
            cycle,
        };
        out.push(self.provisional(&pending));
        self.window.pending.push_back(pending);
        Ok(out)
    }

    /// Finalises every pending cycle with whatever lookahead remains and
    /// clears the day's history.
    pub fn finish_day(&mut self) -> Vec<Emission> {
        let mut out = Vec::with_capacity(self.window.pending.len());
        while !self.window.pending.is_empty() {
            let next: Vec<f64> = self.window.pending.iter().skip(1).map(|p| p.bs).collect();
            out.push(self.finalize_front(&next));
        }
        self.window.clear();
        out
    }

    fn finalize_front(&mut self, next: &[f64]) -> Emission {
        let p = self
            .window
            .pending
            .pop_front()
            .expect("finalize_front on empty queue");
        let t1 = partial_t1(p.bs, next);
        let mbs = modified_base_score(p.bs, t1, p.t2);
        let recent: Vec<f64> = self.window.history().collect();
        let (es, es_complete) = es_or_zero(&recent);
        self.window.push_history(mbs);
        let record = ScoreRecord {
            day: p.cycle.day,
            cycle_id: p.cycle.cycle_id,
            timestamp: p.cycle.timestamp,
            bs: p.bs,
            t1,
            t2: p.t2,
            mbs,
            ths: p.ths,
            es,
            ts: total_score(mbs, p.ths, es),
            status: ScoreStatus::Finalized,
            lookahead: next.len() as u8,
            es_complete,
            warmup: self.calendar.is_warmup(&p.cycle.timestamp),
        };
        Emission::Finalized {
            record,
            annotation: p.annotation,
        }
    }

    /// Interim record with a neutral T1; ES mixes finalised and provisional MBS.
    fn provisional(&self, p: &PendingCycle) -> Emission {
        let t1 = 1.0;
        let mbs = modified_base_score(p.bs, t1, p.t2);
        let recent: Vec<f64> = self
            .window
            .history()
            .chain(
                self.window
                    .pending
                    .iter()
                    .map(|q| modified_base_score(q.bs, 1.0, q.t2)),
            )
            .collect();
        let tail = &recent[recent.len().saturating_sub(ES_HISTORY)..];
        let (es, es_complete) = es_or_zero(tail);
        let record = ScoreRecord {
            day: p.cycle.day,
            cycle_id: p.cycle.cycle_id,
            timestamp: p.cycle.timestamp,
            bs: p.bs,
            t1,
            t2: p.t2,
            mbs,
            ths: p.ths,
            es,
            ts: total_score(mbs, p.ths, es),
            status: ScoreStatus::Provisional,
            lookahead: 0,
            es_complete,
            warmup: self.calendar.is_warmup(&p.cycle.timestamp),
        };
        Emission::Provisional {
            record,
            annotation: p.annotation.clone(),
        }
    }
}

/// Scores one production day with all data available up front.
///
/// Cycles must belong to one day and be in order.
pub fn score_day(
    cycles: &[AntCycle],
    annotator: &Annotator,
    calendar: &ProductionCalendar,
) -> Result<Vec<(ScoreRecord, Annotation)>, ScoringError> {
    let bs = cycles
        .iter()
        .map(|c| base_score(&c.readings))
        .collect::<Result<Vec<_>, _>>()?;
    let n = cycles.len();
    let mut mbs = Vec::with_capacity(n);
    let mut out = Vec::with_capacity(n);
    for (k, cycle) in cycles.iter().enumerate() {
        let next = &bs[k + 1..(k + 1 + LOOKAHEAD).min(n)];
        let t1 = partial_t1(bs[k], next);
        let t2 = tuning_t2(&cycle.readings);
        let m = modified_base_score(bs[k], t1, t2);
        let annotation = annotator.annotate(cycle);
        let ths = threat_score(&annotation);
        let (es, es_complete) = if k >= ES_HISTORY {
            (environmental_score(&mbs[k - ES_HISTORY..k])?, true)
        } else {
            (0.0, false)
        };
        mbs.push(m);
        out.push((
            ScoreRecord {
                day: cycle.day,
                cycle_id: cycle.cycle_id,
                timestamp: cycle.timestamp,
                bs: bs[k],
                t1,
                t2,
                mbs: m,
                ths,
                es,
                ts: total_score(m, ths, es),
                status: ScoreStatus::Finalized,
                lookahead: next.len() as u8,
                es_complete,
                warmup: calendar.is_warmup(&cycle.timestamp),
            },
            annotation,
        ));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::{FixedOffset, NaiveDate};

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} != {b} (tol {tol})");
    }

    const MIXED: [f64; 8] = [178., 181., 185., 189., 193., 186., 182., 179.];

    fn day_cycles(day: NaiveDate, readings: &[[f64; 8]]) -> Vec<AntCycle> {
        let cal = ProductionCalendar::default();
        let off = FixedOffset::east_opt(0).unwrap();
        readings
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let ts = cal.slot_time(day, i as u32, off).unwrap();
                cal.validate_cycle(r, ts).unwrap()
            })
            .collect()
    }

    #[test]
    fn band_count_examples() {
        let c = band_counts(&[193.0; 8]);
        assert_eq!((c.above_184, c.above_188, c.above_192, c.below_180), (8, 8, 8, 0));
        assert_eq!(band_counts(&[182.0; 8]), BandCounts::default());
        let c = band_counts(&MIXED);
        assert_eq!((c.above_184, c.above_188, c.above_192, c.below_180), (4, 2, 1, 2));
        // 184 itself sits in no upper band
        assert_eq!(band_counts(&[184.0; 8]).above_184, 0);
    }

    #[test]
    fn base_score_examples() {
        assert_eq!(base_score(&[180., 184., 182., 181., 183., 180., 184., 182.]).unwrap(), 0.0);
        assert_eq!(base_score(&[193.0; 8]).unwrap(), 12.0);
        assert_close(base_score(&MIXED).unwrap(), 193.0 / 178.0 * 2.5, 1e-12);
        assert_close(base_score(&MIXED).unwrap(), 2.7107, 1e-4);
        assert!(matches!(
            base_score(&[0.0, 180., 180., 180., 180., 180., 180., 180.]),
            Err(ScoringError::NonPositiveMin(_))
        ));
    }

    #[test]
    fn t1_examples() {
        assert_close(tuning_t1(5.0, &[6., 7., 4., -1., -2.]).unwrap(), 1.1, 1e-12);
        assert_close(tuning_t1(0.0, &[1., 2., 3., 4., 5.]).unwrap(), 1.5, 1e-12);
        assert_close(tuning_t1(0.0, &[-1., -2., -3., -4., -5.]).unwrap(), 0.75, 1e-12);
        // negative and rising both count
        assert_close(tuning_t1(-3.0, &[-1.; 5]).unwrap(), 1.25, 1e-12);
        assert_eq!(
            tuning_t1(0.0, &[1., 2.]),
            Err(ScoringError::InsufficientLookahead(2))
        );
        assert_close(partial_t1(0.0, &[1., 2.]), 1.2, 1e-12);
        assert_eq!(partial_t1(0.0, &[]), 1.0);
    }

    #[test]
    fn t2_examples() {
        assert_eq!(tuning_t2(&[180., 180., 180., 180., 183., 185., 187., 189.]), 1.1);
        assert_eq!(tuning_t2(&[180., 180., 180., 180., 186., 185., 183., 181.]), 0.9);
        assert_eq!(tuning_t2(&[180., 180., 180., 180., 183., 185., 185., 189.]), 1.0);
        assert_eq!(tuning_t2(&[180.0; 8]), 1.0);
    }

    #[test]
    fn mbs_examples() {
        assert_close(modified_base_score(12.0, 1.5, 1.1), 19.8, 1e-12);
        assert_eq!(modified_base_score(0.0, 1.3, 0.9), 0.0);
        assert_close(modified_base_score(12.88, 1.2, 1.0), 15.456, 1e-12);
    }

    #[test]
    fn threat_examples() {
        let a = Annotation {
            cp_count: 3,
            flag_max: true,
            flag_range: true,
            ..Default::default()
        };
        assert_eq!(threat_score(&a), 5.0);
        assert_eq!(threat_score(&Annotation::default()), 0.0);
        let a = Annotation {
            cp_count: 2,
            flag_max: true,
            flag_min: true,
            flag_range: true,
            ..Default::default()
        };
        assert_eq!(threat_score(&a), 3.5);
    }

    #[test]
    fn es_examples() {
        assert_close(environmental_score(&[4.0; 30]).unwrap(), 9.0, 1e-12);
        let mut w = vec![4.0; 10];
        w.extend([8.0; 10]);
        w.extend([12.0; 10]);
        assert_close(environmental_score(&w).unwrap(), 20.0, 1e-12);
        assert_eq!(environmental_score(&[0.0; 30]).unwrap(), 0.0);
        assert_eq!(
            environmental_score(&[1.0; 29]),
            Err(ScoringError::InsufficientHistory(29))
        );
    }

    #[test]
    fn ts_examples() {
        assert_eq!(total_score(0.0, 0.0, 0.0), 0.0);
        assert_close(total_score(18.79, 0.0, 12.0), 30.79, 1e-12);
        assert_close(total_score(16.94, 0.5, 13.95), 31.39, 1e-12);
    }

    #[test]
    fn first_cycle_is_provisional_until_five_more() {
        let day = NaiveDate::from_ymd_opt(2025, 4, 7).unwrap();
        let cycles = day_cycles(day, &[[182.0; 8]; 7]);
        let mut p = Pipeline::new(Annotator::default(), ProductionCalendar::default());
        let mut it = cycles.into_iter();
        let first = p.push_cycle(it.next().unwrap()).unwrap();
        assert_eq!(first.len(), 1);
        assert!(matches!(first[0], Emission::Provisional { .. }));
        for _ in 0..4 {
            let e = p.push_cycle(it.next().unwrap()).unwrap();
            assert_eq!(e.len(), 1);
            assert_eq!(p.window().pending_len() <= LOOKAHEAD, true);
        }
        let sixth = p.push_cycle(it.next().unwrap()).unwrap();
        assert_eq!(sixth.len(), 2);
        match &sixth[0] {
            Emission::Finalized { record, .. } => {
                assert_eq!(record.cycle_id, 0);
                assert_eq!(record.lookahead, 5);
            }
            other => panic!("expected finalised record, got {other:?}"),
        }
        assert!(matches!(sixth[1], Emission::Provisional { .. }));
    }

    #[test]
    fn constant_day_scores_zero() {
        let day = NaiveDate::from_ymd_opt(2025, 4, 7).unwrap();
        let cycles = day_cycles(day, &vec![[182.0; 8]; 600]);
        let mut p = Pipeline::new(Annotator::default(), ProductionCalendar::default());
        let mut finals = Vec::new();
        for c in cycles {
            for e in p.push_cycle(c).unwrap() {
                if let Emission::Finalized { record, .. } = e {
                    finals.push(record);
                }
            }
        }
        for e in p.finish_day() {
            finals.push(e.record().clone());
        }
        assert_eq!(finals.len(), 600);
        for r in &finals {
            assert_eq!((r.bs, r.mbs, r.es, r.ts), (0.0, 0.0, 0.0, 0.0));
        }
        assert!(!finals[29].es_complete);
        assert!(finals[30].es_complete);
        assert_eq!(finals[599].lookahead, 0);
        assert_eq!(finals[595].lookahead, 4);
    }

    #[test]
    fn out_of_order_is_rejected() {
        let day = NaiveDate::from_ymd_opt(2025, 4, 7).unwrap();
        let cycles = day_cycles(day, &[[182.0; 8]; 3]);
        let mut p = Pipeline::new(Annotator::default(), ProductionCalendar::default());
        p.push_cycle(cycles[1].clone()).unwrap();
        assert!(matches!(
            p.push_cycle(cycles[0].clone()),
            Err(ScoringError::OutOfOrder { .. })
        ));
        assert!(matches!(
            p.push_cycle(cycles[1].clone()),
            Err(ScoringError::OutOfOrder { .. })
        ));
        assert!(p.push_cycle(cycles[2].clone()).is_ok());
    }

    #[test]
    fn new_day_flushes_previous() {
        let d1 = NaiveDate::from_ymd_opt(2025, 4, 7).unwrap();
        let d2 = NaiveDate::from_ymd_opt(2025, 4, 8).unwrap();
        let mut p = Pipeline::new(Annotator::default(), ProductionCalendar::default());
        for c in day_cycles(d1, &[[186.0; 8]; 40]) {
            p.push_cycle(c).unwrap();
        }
        let e = p.push_cycle(day_cycles(d2, &[[186.0; 8]])[0].clone()).unwrap();
        let finals = e.iter().filter(|e| matches!(e, Emission::Finalized { .. })).count();
        assert_eq!(finals, 5);
        let last = e.last().unwrap().record();
        assert_eq!(last.day, d2);
        assert_eq!(last.es, 0.0);
        assert!(!last.es_complete);
    }
}
