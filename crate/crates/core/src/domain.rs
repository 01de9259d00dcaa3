//! Core value types shared by every stage of the pipeline: the frying cycle
//! ("ant"), the production calendar and the in-control temperature model.

use chrono::{DateTime, Datelike, Duration, FixedOffset, NaiveDate, NaiveTime, Timelike, Weekday};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Number of temperature readings taken during one cycle.
pub const READINGS_PER_CYCLE: usize = 8;

/// Minutes between the starts of two consecutive cycles.
pub const CYCLE_MINUTES: i64 = 2;

/// Eight temperatures in degrees Celsius, in acquisition order.
pub type Readings = [f64; READINGS_PER_CYCLE];

/// One two-minute frying cycle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AntCycle {
    /// Production day the cycle belongs to (the calendar date of its 07:00 start).
    pub day: NaiveDate,
    /// Slot index within the production day; restarts at 0 every day.
    pub cycle_id: u32,
    pub timestamp: DateTime<FixedOffset>,
    pub readings: Readings,
}

impl AntCycle {
    pub fn max(&self) -> f64 {
        self.readings.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.readings.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn range(&self) -> f64 {
        self.max() - self.min()
    }

    pub fn mean(&self) -> f64 {
        self.readings.iter().sum::<f64>() / READINGS_PER_CYCLE as f64
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ValidationError {
    #[error("expected {expected} readings, got {got}")]
    WrongArity { expected: usize, got: usize },
    #[error("reading {index} is not finite")]
    NonFinite { index: usize },
    #[error("reading {index} is not strictly positive ({value})")]
    NonPositive { index: usize, value: f64 },
    #[error("timestamp {timestamp} is outside the production schedule")]
    OutsideSchedule { timestamp: DateTime<FixedOffset> },
}

/// Operating schedule: Monday to Saturday, 07:00 until 03:00 the next morning.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProductionCalendar {
    /// Minutes after the daily start during which alarms are suppressed.
    pub warmup_minutes: u32,
}

impl Default for ProductionCalendar {
    fn default() -> Self {
        Self { warmup_minutes: 10 }
    }
}

impl ProductionCalendar {
    pub const DAY_START: NaiveTime = match NaiveTime::from_hms_opt(7, 0, 0) {
        Some(t) => t,
        None => unreachable!(),
    };
    pub const DAY_END: NaiveTime = match NaiveTime::from_hms_opt(3, 0, 0) {
        Some(t) => t,
        None => unreachable!(),
    };
    /// Length of one production day in minutes (07:00 to 03:00).
    pub const DAY_MINUTES: i64 = 20 * 60;
    /// Number of cycle slots in one production day.
    pub const CYCLES_PER_DAY: u32 = (Self::DAY_MINUTES / CYCLE_MINUTES) as u32;

    pub fn new(warmup_minutes: u32) -> Self {
        Self { warmup_minutes }
    }

    /// Production day that `ts` falls into, or `None` when the line is shut down.
    ///
    /// Times between midnight and 03:00 belong to the previous calendar date.
    pub fn production_day(&self, ts: &DateTime<FixedOffset>) -> Option<NaiveDate> {
        let local = ts.naive_local();
        let time = local.time();
        let day = if time >= Self::DAY_START {
            local.date()
        } else if time < Self::DAY_END {
            local.date().pred_opt()?
        } else {
            return None;
        };
        (day.weekday() != Weekday::Sun).then_some(day)
    }

    /// Whole minutes elapsed since the start of the production day containing `ts`.
    pub fn minutes_into_day(&self, ts: &DateTime<FixedOffset>) -> Option<i64> {
        let day = self.production_day(ts)?;
        let start = day.and_time(Self::DAY_START);
        let elapsed = ts.naive_local() - start;
        Some(elapsed.num_minutes())
    }

    pub fn is_operating(&self, ts: &DateTime<FixedOffset>) -> bool {
        self.production_day(ts).is_some()
    }

    /// True iff `ts` is earlier than day start plus the warmup duration.
    pub fn is_warmup(&self, ts: &DateTime<FixedOffset>) -> bool {
        self.minutes_into_day(ts)
            .is_some_and(|m| m < i64::from(self.warmup_minutes))
    }

    /// Timestamp of slot `cycle_id` on production day `day`.
    pub fn slot_time(
        &self,
        day: NaiveDate,
        cycle_id: u32,
        offset: FixedOffset,
    ) -> Option<DateTime<FixedOffset>> {
        if cycle_id >= Self::CYCLES_PER_DAY {
            return None;
        }
        let naive = day.and_time(Self::DAY_START)
            + Duration::minutes(i64::from(cycle_id) * CYCLE_MINUTES);
        naive.and_local_timezone(offset).single()
    }

    /// The `n`-th operating day (0-based) on or after `first`.
    pub fn nth_operating_day(&self, first: NaiveDate, n: u32) -> NaiveDate {
        let mut day = first;
        let mut seen = 0;
        loop {
            if day.weekday() != Weekday::Sun {
                if seen == n {
                    return day;
                }
                seen += 1;
            }
            day = day.succ_opt().expect("date overflow");
        }
    }

    /// Checks arity, finiteness, positivity and schedule, then assigns the slot index.
    pub fn validate_cycle(
        &self,
        raw_readings: &[f64],
        timestamp: DateTime<FixedOffset>,
    ) -> Result<AntCycle, ValidationError> {
        let readings: Readings =
            raw_readings
                .try_into()
                .map_err(|_| ValidationError::WrongArity {
                    expected: READINGS_PER_CYCLE,
                    got: raw_readings.len(),
                })?;
        if let Some(index) = readings.iter().position(|r| !r.is_finite()) {
            return Err(ValidationError::NonFinite { index });
        }
        if let Some(index) = readings.iter().position(|&r| r <= 0.0) {
            return Err(ValidationError::NonPositive {
                index,
                value: readings[index],
            });
        }
        let day = self
            .production_day(&timestamp)
            .ok_or(ValidationError::OutsideSchedule { timestamp })?;
        let minutes = self
            .minutes_into_day(&timestamp)
            .ok_or(ValidationError::OutsideSchedule { timestamp })?;
        // seconds are dropped: timestamps carry minute resolution
        let cycle_id = (minutes / CYCLE_MINUTES) as u32;
        Ok(AntCycle {
            day,
            cycle_id,
            timestamp: timestamp.with_second(0).unwrap_or(timestamp),
            readings,
        })
    }
}

/// Gaussian law of a single reading while the process is in control.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InControlModel {
    pub mu: f64,
    pub sigma: f64,
}

impl Default for InControlModel {
    fn default() -> Self {
        Self {
            mu: 180.0,
            sigma: 4.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("in-control sigma must be positive and finite, got {0}")]
pub struct InvalidModel(pub f64);

impl InControlModel {
    pub fn new(mu: f64, sigma: f64) -> Result<Self, InvalidModel> {
        if sigma.is_finite() && sigma > 0.0 {
            Ok(Self { mu, sigma })
        } else {
            Err(InvalidModel(sigma))
        }
    }
}
