//! Labelled synthetic production days.
//!
//! In-control readings are independent `Normal(mu, sigma^2)` draws. With a
//! small per-cycle probability an out-of-control regime starts; every injected
//! regime gets one covering [`EpisodeLabel`].

use chrono::{FixedOffset, NaiveDate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{AntCycle, InControlModel, ProductionCalendar, READINGS_PER_CYCLE};
use crate::engine::{Engine, EngineConfig};
use crate::events::EventMessage;
use crate::metrics::{EpisodeLabel, Truth};
use crate::monitor::AlarmEvent;
use crate::scoring::{ScoreRecord, ScoreStatus};
use crate::annotator::Annotation;

/// Linear upward drift: the cycle mean rises by `delta` every cycle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Drift {
    pub delta: f64,
    pub min_cycles: u32,
    pub max_cycles: u32,
}

impl Default for Drift {
    fn default() -> Self {
        Self {
            delta: 1.0,
            min_cycles: 15,
            max_cycles: 25,
        }
    }
}

/// Temporary dip from loading a fresh batch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BatchDrop {
    pub depth: f64,
    pub cycles: u32,
}

impl Default for BatchDrop {
    fn default() -> Self {
        Self {
            depth: 8.0,
            cycles: 3,
        }
    }
}

/// Heater overshoot followed by an overcorrection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JouleOvershoot {
    pub spike: f64,
    pub undershoot: f64,
    pub undershoot_cycles: u32,
}

impl Default for JouleOvershoot {
    fn default() -> Self {
        Self {
            spike: 18.0,
            undershoot: 12.0,
            undershoot_cycles: 2,
        }
    }
}

/// Cold, noisy first cycles of every production day.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StartupTransient {
    pub cycles: u32,
    pub depression: f64,
    pub sigma_factor: f64,
}

impl Default for StartupTransient {
    fn default() -> Self {
        Self {
            cycles: 3,
            depression: 8.0,
            sigma_factor: 2.0,
        }
    }
}

/// Enabled regimes; a disabled regime is `None`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RegimeSet {
    pub drift: Option<Drift>,
    pub batch_drop: Option<BatchDrop>,
    pub joule_overshoot: Option<JouleOvershoot>,
    pub startup_transient: Option<StartupTransient>,
}

impl Default for RegimeSet {
    fn default() -> Self {
        Self {
            drift: Some(Drift::default()),
            batch_drop: Some(BatchDrop::default()),
            joule_overshoot: Some(JouleOvershoot::default()),
            startup_transient: Some(StartupTransient::default()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegimeKind {
    Drift,
    BatchDrop,
    JouleOvershoot,
    StartupTransient,
}

impl RegimeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            RegimeKind::Drift => "drift",
            RegimeKind::BatchDrop => "batch_drop",
            RegimeKind::JouleOvershoot => "joule_overshoot",
            RegimeKind::StartupTransient => "startup_transient",
        }
    }

    /// Batch drops and startup are normal operation; the rest are faults.
    pub fn truth(self) -> Truth {
        match self {
            RegimeKind::Drift | RegimeKind::JouleOvershoot => Truth::OutOfControl,
            RegimeKind::BatchDrop | RegimeKind::StartupTransient => Truth::InControl,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub in_control: InControlModel,
    /// Per-cycle probability that a surge regime begins.
    pub surge_probability: f64,
    pub regimes: RegimeSet,
    pub seed: u64,
    pub days: u32,
    /// First simulated production day; Sundays are skipped.
    pub first_day: NaiveDate,
    /// UTC offset of generated timestamps, in minutes.
    pub utc_offset_minutes: i32,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            in_control: InControlModel::default(),
            surge_probability: 0.008,
            regimes: RegimeSet::default(),
            seed: 0,
            days: 1,
            first_day: NaiveDate::from_ymd_opt(2025, 1, 2).expect("valid date"),
            utc_offset_minutes: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimConfigError {
    #[error("surge probability {0} outside [0, 1]")]
    Probability(f64),
    #[error("in-control sigma must be positive, got {0}")]
    Sigma(f64),
    #[error("regime parameter {0} must be positive")]
    Regime(&'static str),
    #[error("utc offset {0} minutes is out of range")]
    Offset(i32),
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimConfigError> {
        if !(0.0..=1.0).contains(&self.surge_probability) {
            return Err(SimConfigError::Probability(self.surge_probability));
        }
        if !(self.in_control.sigma > 0.0) {
            return Err(SimConfigError::Sigma(self.in_control.sigma));
        }
        let r = &self.regimes;
        if let Some(d) = r.drift {
            if !(d.delta > 0.0) || d.min_cycles == 0 || d.max_cycles < d.min_cycles {
                return Err(SimConfigError::Regime("drift"));
            }
        }
        if let Some(b) = r.batch_drop {
            if !(b.depth > 0.0) || b.cycles == 0 {
                return Err(SimConfigError::Regime("batch_drop"));
            }
        }
        if let Some(j) = r.joule_overshoot {
            if !(j.spike > 0.0) || !(j.undershoot > 0.0) || j.undershoot_cycles == 0 {
                return Err(SimConfigError::Regime("joule_overshoot"));
            }
        }
        if let Some(s) = r.startup_transient {
            if !(s.depression > 0.0) || !(s.sigma_factor > 0.0) || s.cycles == 0 {
                return Err(SimConfigError::Regime("startup_transient"));
            }
        }
        self.offset()?;
        Ok(())
    }

    fn offset(&self) -> Result<FixedOffset, SimConfigError> {
        FixedOffset::east_opt(self.utc_offset_minutes * 60)
            .ok_or(SimConfigError::Offset(self.utc_offset_minutes))
    }

    fn surge_kinds(&self) -> Vec<RegimeKind> {
        let r = &self.regimes;
        [
            r.drift.map(|_| RegimeKind::Drift),
            r.batch_drop.map(|_| RegimeKind::BatchDrop),
            r.joule_overshoot.map(|_| RegimeKind::JouleOvershoot),
        ]
        .into_iter()
        .flatten()
        .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InjectedRegime {
    pub kind: RegimeKind,
    pub first_cycle: u32,
    pub last_cycle: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimDay {
    pub date: NaiveDate,
    pub cycles: Vec<AntCycle>,
    pub labels: Vec<EpisodeLabel>,
    pub regimes: Vec<InjectedRegime>,
    /// Surge starts drawn, including those absorbed by an already active regime.
    pub surge_starts: u32,
}

/// Per-cycle mean offset and noise scale over one regime.
fn regime_profile(kind: RegimeKind, config: &SimConfig, rng: &mut ChaCha8Rng) -> Vec<(f64, f64)> {
    let r = &config.regimes;
    match kind {
        RegimeKind::Drift => {
            let d = r.drift.unwrap_or_default();
            let len = rng.random_range(d.min_cycles..=d.max_cycles);
            (1..=len).map(|j| (d.delta * f64::from(j), 1.0)).collect()
        }
        RegimeKind::BatchDrop => {
            let b = r.batch_drop.unwrap_or_default();
            vec![(-b.depth, 1.0); b.cycles as usize]
        }
        RegimeKind::JouleOvershoot => {
            let j = r.joule_overshoot.unwrap_or_default();
            std::iter::once((j.spike, 1.0))
                .chain(std::iter::repeat_n((-j.undershoot, 1.0), j.undershoot_cycles as usize))
                .collect()
        }
        RegimeKind::StartupTransient => {
            let s = r.startup_transient.unwrap_or_default();
            vec![(-s.depression, s.sigma_factor); s.cycles as usize]
        }
    }
}

/// Generates production day number `day_index` of the configured run.
///
/// Output depends only on `(config, day_index)`. The config is assumed valid
/// (see [`SimConfig::validate`]).
pub fn simulate_day(config: &SimConfig, day_index: u32) -> SimDay {
    let calendar = ProductionCalendar::default();
    let offset = config.offset().expect("validated offset");
    let date = calendar.nth_operating_day(config.first_day, day_index);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(u64::from(day_index));

    let n = ProductionCalendar::CYCLES_PER_DAY as usize;
    let mut shape = vec![(0.0f64, 1.0f64); n];
    let mut regimes = Vec::new();
    let mut busy_until = 0usize;

    if config.regimes.startup_transient.is_some() {
        let profile = regime_profile(RegimeKind::StartupTransient, config, &mut rng);
        let len = profile.len().min(n);
        shape[..len].copy_from_slice(&profile[..len]);
        regimes.push(InjectedRegime {
            kind: RegimeKind::StartupTransient,
            first_cycle: 0,
            last_cycle: len as u32 - 1,
        });
        busy_until = len;
    }

    let kinds = config.surge_kinds();
    let mut surge_starts = 0;
    for c in 0..n {
        if !rng.random_bool(config.surge_probability) {
            continue;
        }
        surge_starts += 1;
        if c < busy_until || kinds.is_empty() {
            continue;
        }
        let kind = kinds[rng.random_range(0..kinds.len())];
        let profile = regime_profile(kind, config, &mut rng);
        let len = profile.len().min(n - c);
        shape[c..c + len].copy_from_slice(&profile[..len]);
        regimes.push(InjectedRegime {
            kind,
            first_cycle: c as u32,
            last_cycle: (c + len - 1) as u32,
        });
        busy_until = c + len;
    }

    let noise = Normal::new(0.0, 1.0).expect("unit normal");
    let model = config.in_control;
    let cycles = shape
        .iter()
        .enumerate()
        .map(|(c, &(shift, scale))| {
            let mut readings = [0.0; READINGS_PER_CYCLE];
            for r in &mut readings {
                let t: f64 = model.mu + shift + model.sigma * scale * noise.sample(&mut rng);
                // keep the max/min ratio defined
                *r = t.max(1.0);
            }
            let timestamp = calendar
                .slot_time(date, c as u32, offset)
                .expect("slot inside day");
            AntCycle {
                day: date,
                cycle_id: c as u32,
                timestamp,
                readings,
            }
        })
        .collect::<Vec<_>>();

    let labels = regimes
        .iter()
        .map(|r| EpisodeLabel {
            start: cycles[r.first_cycle as usize].timestamp,
            end: cycles[r.last_cycle as usize].timestamp,
            truth: r.kind.truth(),
            tag: Some(r.kind.as_str().to_string()),
        })
        .collect();

    SimDay {
        date,
        cycles,
        labels,
        regimes,
        surge_starts,
    }
}

/// All configured days, in order.
pub fn simulate(config: &SimConfig) -> Result<Vec<SimDay>, SimConfigError> {
    config.validate()?;
    Ok((0..config.days).map(|i| simulate_day(config, i)).collect())
}

/// Scores and alarms for one replayed day, with its ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplayDay {
    pub date: NaiveDate,
    pub labels: Vec<EpisodeLabel>,
    pub regimes: Vec<InjectedRegime>,
    pub records: Vec<ScoreRecord>,
    pub annotations: Vec<Annotation>,
    pub alarms: Vec<AlarmEvent>,
    pub events: Vec<EventMessage>,
}

/// Streams simulated days through a fresh [`Engine`].
pub fn replay(days: &[SimDay], config: EngineConfig) -> Vec<ReplayDay> {
    let mut engine = Engine::new(config);
    days.iter()
        .map(|day| {
            let mut events = Vec::new();
            for cycle in &day.cycles {
                events.extend(
                    engine
                        .push_cycle(cycle.clone())
                        .expect("simulated cycles are ordered and positive"),
                );
            }
            events.extend(engine.finish());
            let mut records = Vec::new();
            let mut annotations = Vec::new();
            let mut alarms = Vec::new();
            for e in &events {
                match e {
                    EventMessage::Score(r) if r.status == ScoreStatus::Finalized => {
                        records.push(r.clone())
                    }
                    EventMessage::Annotation(a) => annotations.push(a.annotation.clone()),
                    EventMessage::Alarm(a) | EventMessage::Forecast(a) => alarms.push(a.clone()),
                    _ => {}
                }
            }
            ReplayDay {
                date: day.date,
                labels: day.labels.clone(),
                regimes: day.regimes.clone(),
                records,
                annotations,
                alarms,
                events,
            }
        })
        .collect()
}
