//! Alarm policy and the in-control / out-of-control state machine.

use std::collections::VecDeque;

use chrono::{DateTime, Duration, FixedOffset, NaiveDate};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::{compute_metrics, match_episodes, ConfusionMatrix, EpisodeLabel, MetricsError};
use crate::scoring::ScoreRecord;

/// Alarm-free finalised cycles after which a suspected line returns to InC.
pub const CLEAR_AFTER_QUIET: u32 = 15;
/// Further alarmed cycles after which a suspected line is considered halted.
pub const HALT_AFTER_ALARMED: u32 = 5;
/// Window of ES values used for the forecast slope.
pub const FORECAST_WINDOW: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ScoreKind {
    #[serde(rename = "BS")]
    Base,
    #[serde(rename = "MBS")]
    Modified,
    #[serde(rename = "ES")]
    Environmental,
    #[serde(rename = "TS")]
    Total,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AlarmPolicy {
    pub theta_bs: f64,
    pub theta_mbs: f64,
    pub theta_es: f64,
    pub theta_ts: f64,
    /// Consecutive finalised cycles a threshold must hold before alarming.
    pub sustain: u32,
    /// Minimum least-squares ES slope per cycle that raises a forecast.
    pub forecast_slope: f64,
    pub suppress_warmup: bool,
}

impl Default for AlarmPolicy {
    fn default() -> Self {
        Self {
            theta_bs: 12.0,
            theta_mbs: 15.0,
            theta_es: 8.5,
            theta_ts: 20.0,
            sustain: 1,
            forecast_slope: 0.5,
            suppress_warmup: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PolicyError {
    #[error("threshold {name} must be positive, got {value}")]
    NonPositiveThreshold { name: &'static str, value: f64 },
    #[error("sustain must be at least 1")]
    ZeroSustain,
}

impl AlarmPolicy {
    pub fn validate(&self) -> Result<(), PolicyError> {
        for (name, value) in [
            ("theta_BS", self.theta_bs),
            ("theta_MBS", self.theta_mbs),
            ("theta_ES", self.theta_es),
            ("theta_TS", self.theta_ts),
        ] {
            if !(value > 0.0) {
                return Err(PolicyError::NonPositiveThreshold { name, value });
            }
        }
        if self.sustain == 0 {
            return Err(PolicyError::ZeroSustain);
        }
        Ok(())
    }

    /// Scores at or above their threshold.
    pub fn triggers(&self, r: &ScoreRecord) -> Vec<ScoreKind> {
        [
            (ScoreKind::Base, r.bs >= self.theta_bs),
            (ScoreKind::Modified, r.mbs >= self.theta_mbs),
            (ScoreKind::Environmental, r.es >= self.theta_es),
            (ScoreKind::Total, r.ts >= self.theta_ts),
        ]
        .into_iter()
        .filter_map(|(k, hit)| hit.then_some(k))
        .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventKind {
    Alarm,
    Forecast,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum OperatorAction {
    #[default]
    None,
    Halt,
    MaintenanceNote,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlarmEvent {
    pub id: u64,
    pub kind: EventKind,
    pub day: NaiveDate,
    /// Cycle whose finalised scores raised the event.
    pub cycle_id: u32,
    pub timestamp: DateTime<FixedOffset>,
    pub trigger: Vec<ScoreKind>,
    pub acknowledged: bool,
    pub operator_action: OperatorAction,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LineState {
    InC,
    SuspectedOutC,
    #[serde(rename = "OutC_halted")]
    OutCHalted,
    #[serde(rename = "warmup")]
    Warmup,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SystemState {
    pub state: LineState,
    pub since: DateTime<FixedOffset>,
}

/// Operator commands accepted by the monitor.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "lowercase")]
pub enum Command {
    Acknowledge { alarm_id: u64 },
    Halt,
    Resume,
    Note { text: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CommandError {
    #[error("no open alarm with id {0}")]
    UnknownAlarm(u64),
    #[error("{command} is not allowed in state {state:?}")]
    InvalidTransition {
        command: &'static str,
        state: Option<LineState>,
    },
}

/// Everything the state machine remembers between records.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MonitorState {
    pub system: Option<SystemState>,
    pub day: Option<NaiveDate>,
    /// Consecutive cycles with at least one threshold hit.
    pub streak: u32,
    pub alarmed: bool,
    /// Consecutive cycles without an active alarm condition.
    pub quiet: u32,
    /// Alarmed cycles since the line became suspected.
    pub escalation: u32,
    pub recent_es: VecDeque<f64>,
    pub forecasting: bool,
    pub next_alarm_id: u64,
    /// Alarms raised since the line last returned to InC.
    pub open_alarms: Vec<AlarmEvent>,
}

impl MonitorState {
    pub fn line_state(&self) -> Option<LineState> {
        self.system.map(|s| s.state)
    }

    fn enter(&mut self, state: LineState, at: DateTime<FixedOffset>) {
        if self.line_state() != Some(state) {
            self.system = Some(SystemState { state, since: at });
        }
    }

    fn new_day(&mut self, day: NaiveDate) {
        *self = MonitorState {
            next_alarm_id: self.next_alarm_id,
            day: Some(day),
            ..Default::default()
        };
    }

    fn raise(&mut self, kind: EventKind, record: &ScoreRecord, trigger: Vec<ScoreKind>) -> AlarmEvent {
        let event = AlarmEvent {
            id: self.next_alarm_id,
            kind,
            day: record.day,
            cycle_id: record.cycle_id,
            timestamp: record.timestamp,
            trigger,
            acknowledged: false,
            operator_action: OperatorAction::None,
            note: None,
        };
        self.next_alarm_id += 1;
        event
    }
}

/// Outcome of feeding one finalised record to the state machine.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Transition {
    pub alarm: Option<AlarmEvent>,
    pub forecast: Option<AlarmEvent>,
    pub state_changed: bool,
}

/// Least-squares slope of equally spaced values.
pub fn least_squares_slope(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    if values.len() < 2 {
        return 0.0;
    }
    let x_mean = (n - 1.0) / 2.0;
    let y_mean = values.iter().sum::<f64>() / n;
    let (num, den) = values
        .iter()
        .enumerate()
        .fold((0.0, 0.0), |(num, den), (i, y)| {
            let dx = i as f64 - x_mean;
            (num + dx * (y - y_mean), den + dx * dx)
        });
    num / den
}

/// True when the last five ES values rise at least `forecast_slope` per cycle.
pub fn forecast_flag(history: &[f64], policy: &AlarmPolicy) -> bool {
    if history.len() < FORECAST_WINDOW {
        return false;
    }
    least_squares_slope(&history[history.len() - FORECAST_WINDOW..]) >= policy.forecast_slope
}

/// Advances the state machine by one finalised record.
///
/// Alarms fire on the rising edge of the alarm condition (some score at or
/// above its threshold for `sustain` consecutive cycles) unless the record is
/// in the warmup window and suppression is on.
pub fn update_state(
    record: &ScoreRecord,
    policy: &AlarmPolicy,
    state: &MonitorState,
) -> (MonitorState, Transition) {
    let mut s = state.clone();
    let before = s.system;
    let mut out = Transition::default();
    let at = record.timestamp;

    if s.day != Some(record.day) {
        s.new_day(record.day);
    }
    s.recent_es.push_back(record.es);
    if s.recent_es.len() > FORECAST_WINDOW {
        s.recent_es.pop_front();
    }

    let halted = s.line_state() == Some(LineState::OutCHalted);
    if policy.suppress_warmup && record.warmup {
        s.streak = 0;
        s.alarmed = false;
        s.forecasting = false;
        if !halted {
            s.enter(LineState::Warmup, at);
        }
        out.state_changed = s.system != before;
        return (s, out);
    }
    if matches!(s.line_state(), None | Some(LineState::Warmup)) {
        s.enter(LineState::InC, at);
    }

    let trigger = policy.triggers(record);
    s.streak = if trigger.is_empty() { 0 } else { s.streak + 1 };
    let alarmed_now = s.streak >= policy.sustain;
    let rising = alarmed_now && !s.alarmed;
    s.quiet = if alarmed_now { 0 } else { s.quiet + 1 };

    match s.line_state() {
        Some(LineState::InC) => {
            if rising {
                let alarm = s.raise(EventKind::Alarm, record, trigger);
                s.open_alarms.push(alarm.clone());
                out.alarm = Some(alarm);
                s.escalation = 0;
                s.enter(LineState::SuspectedOutC, at);
            }
        }
        Some(LineState::SuspectedOutC) => {
            if alarmed_now {
                if rising {
                    let alarm = s.raise(EventKind::Alarm, record, trigger);
                    s.open_alarms.push(alarm.clone());
                    out.alarm = Some(alarm);
                }
                s.escalation += 1;
                if s.escalation >= HALT_AFTER_ALARMED {
                    s.enter(LineState::OutCHalted, at);
                }
            } else if s.quiet >= CLEAR_AFTER_QUIET {
                s.open_alarms.clear();
                s.escalation = 0;
                s.enter(LineState::InC, at);
            }
        }
        _ => {}
    }
    s.alarmed = alarmed_now;

    let flag = s.line_state() == Some(LineState::InC)
        && !alarmed_now
        && forecast_flag(s.recent_es.make_contiguous(), policy);
    if flag && !s.forecasting {
        out.forecast = Some(s.raise(EventKind::Forecast, record, vec![ScoreKind::Environmental]));
    }
    s.forecasting = flag;

    out.state_changed = s.system != before;
    (s, out)
}

/// Applies an operator command to the state.
pub fn apply_command(
    state: &mut MonitorState,
    command: &Command,
    at: DateTime<FixedOffset>,
) -> Result<(), CommandError> {
    let current = state.line_state();
    match command {
        Command::Acknowledge { alarm_id } => {
            let alarm = state
                .open_alarms
                .iter_mut()
                .find(|a| a.id == *alarm_id)
                .ok_or(CommandError::UnknownAlarm(*alarm_id))?;
            alarm.acknowledged = true;
        }
        Command::Halt => {
            if current == Some(LineState::OutCHalted) {
                return Err(CommandError::InvalidTransition {
                    command: "halt",
                    state: current,
                });
            }
            if let Some(last) = state.open_alarms.last_mut() {
                last.operator_action = OperatorAction::Halt;
            }
            state.enter(LineState::OutCHalted, at);
        }
        Command::Resume => {
            if !matches!(
                current,
                Some(LineState::OutCHalted) | Some(LineState::SuspectedOutC)
            ) {
                return Err(CommandError::InvalidTransition {
                    command: "resume",
                    state: current,
                });
            }
            state.open_alarms.clear();
            state.escalation = 0;
            state.enter(LineState::InC, at);
        }
        Command::Note { text } => {
            if let Some(last) = state.open_alarms.last_mut() {
                if last.operator_action == OperatorAction::None {
                    last.operator_action = OperatorAction::MaintenanceNote;
                }
                last.note = Some(text.clone());
            }
        }
    }
    Ok(())
}

/// Owned policy plus state.
#[derive(Debug, Clone, PartialEq)]
pub struct Monitor {
    policy: AlarmPolicy,
    state: MonitorState,
}

impl Monitor {
    pub fn new(policy: AlarmPolicy) -> Self {
        Self {
            policy,
            state: MonitorState::default(),
        }
    }

    pub fn policy(&self) -> &AlarmPolicy {
        &self.policy
    }

    pub fn state(&self) -> &MonitorState {
        &self.state
    }

    pub fn observe(&mut self, record: &ScoreRecord) -> Transition {
        let (next, t) = update_state(record, &self.policy, &self.state);
        self.state = next;
        t
    }

    pub fn apply(&mut self, command: &Command, at: DateTime<FixedOffset>) -> Result<(), CommandError> {
        apply_command(&mut self.state, command, at)
    }
}

/// Stand-in for the operator during offline replays: resumes a halted line
/// once it has been alarm-free for `resume_after_quiet` cycles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AutoResume {
    pub resume_after_quiet: u32,
}

impl Default for AutoResume {
    fn default() -> Self {
        Self {
            resume_after_quiet: CLEAR_AFTER_QUIET,
        }
    }
}

impl AutoResume {
    pub fn should_resume(&self, state: &MonitorState) -> bool {
        state.line_state() == Some(LineState::OutCHalted) && state.quiet >= self.resume_after_quiet
    }
}

/// Runs a policy over finalised records and returns every alarm and forecast.
pub fn run_policy<'a>(
    records: impl IntoIterator<Item = &'a ScoreRecord>,
    policy: &AlarmPolicy,
    auto_resume: Option<AutoResume>,
) -> Vec<AlarmEvent> {
    let mut monitor = Monitor::new(policy.clone());
    let mut events = Vec::new();
    for r in records {
        let t = monitor.observe(r);
        events.extend(t.alarm);
        events.extend(t.forecast);
        if let Some(auto) = auto_resume {
            if auto.should_resume(monitor.state()) {
                monitor
                    .apply(&Command::Resume, r.timestamp)
                    .expect("resume from halted is always valid");
            }
        }
    }
    events
}

/// Finalised scores and ground truth for one training day.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDay {
    pub records: Vec<ScoreRecord>,
    pub labels: Vec<EpisodeLabel>,
}

/// Candidate values per threshold; the search covers the cartesian product.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdGrid {
    pub theta_bs: Vec<f64>,
    pub theta_mbs: Vec<f64>,
    pub theta_es: Vec<f64>,
    pub theta_ts: Vec<f64>,
}

impl Default for ThresholdGrid {
    fn default() -> Self {
        Self {
            theta_bs: vec![10.0, 11.0, 12.0, 13.0],
            theta_mbs: vec![13.0, 15.0, 17.0],
            theta_es: vec![7.0, 8.5, 10.0],
            theta_ts: vec![18.0, 20.0, 22.0],
        }
    }
}

impl ThresholdGrid {
    pub fn policies<'a>(&'a self, base: &'a AlarmPolicy) -> impl Iterator<Item = AlarmPolicy> + 'a {
        self.theta_bs.iter().flat_map(move |&bs| {
            self.theta_mbs.iter().flat_map(move |&mbs| {
                self.theta_es.iter().flat_map(move |&es| {
                    self.theta_ts.iter().map(move |&ts| AlarmPolicy {
                        theta_bs: bs,
                        theta_mbs: mbs,
                        theta_es: es,
                        theta_ts: ts,
                        ..base.clone()
                    })
                })
            })
        })
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TuneError {
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("threshold grid is empty")]
    EmptyGrid,
    #[error(transparent)]
    Labels(#[from] MetricsError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TunedPolicy {
    pub policy: AlarmPolicy,
    pub confusion: ConfusionMatrix,
    pub balanced_accuracy: f64,
    pub specificity: f64,
}

/// Confusion matrix of `policy` over labelled days.
pub fn evaluate_policy(
    days: &[LabeledDay],
    policy: &AlarmPolicy,
    lead_window: Duration,
    auto_resume: Option<AutoResume>,
) -> Result<ConfusionMatrix, MetricsError> {
    let mut total = ConfusionMatrix::default();
    for day in days {
        let events = run_policy(&day.records, policy, auto_resume);
        total = total + match_episodes(&events, &day.labels, lead_window)?;
    }
    Ok(total)
}

/// Grid search maximising balanced accuracy; ties go to higher specificity,
/// then to the earlier grid point.
pub fn tune_thresholds(
    days: &[LabeledDay],
    grid: &ThresholdGrid,
    base: &AlarmPolicy,
    lead_window: Duration,
    auto_resume: Option<AutoResume>,
) -> Result<TunedPolicy, TuneError> {
    if days.is_empty() || days.iter().all(|d| d.records.is_empty()) {
        return Err(TuneError::EmptyTrainingSet);
    }
    let mut best: Option<TunedPolicy> = None;
    for policy in grid.policies(base) {
        let cm = evaluate_policy(days, &policy, lead_window, auto_resume)?;
        let m = compute_metrics(&cm);
        let bacc = m.bacc.unwrap_or(f64::NEG_INFINITY);
        let tnr = m.tnr.unwrap_or(f64::NEG_INFINITY);
        let better = match &best {
            None => true,
            Some(b) => bacc > b.balanced_accuracy || (bacc == b.balanced_accuracy && tnr > b.specificity),
        };
        if better {
            best = Some(TunedPolicy {
                policy,
                confusion: cm,
                balanced_accuracy: bacc,
                specificity: tnr,
            });
        }
    }
    best.ok_or(TuneError::EmptyGrid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scoring::ScoreStatus;
    use chrono::TimeZone;

    fn record(cycle_id: u32, bs: f64, mbs: f64, es: f64, ts: f64) -> ScoreRecord {
        let day = NaiveDate::from_ymd_opt(2025, 3, 10).unwrap();
        let start = FixedOffset::east_opt(0)
            .unwrap()
            .with_ymd_and_hms(2025, 3, 10, 7, 0, 0)
            .unwrap();
        ScoreRecord {
            day,
            cycle_id,
            timestamp: start + Duration::minutes(2 * i64::from(cycle_id)),
            bs,
            t1: 1.0,
            t2: 1.0,
            mbs,
            ths: 0.0,
            es,
            ts,
            status: ScoreStatus::Finalized,
            lookahead: 5,
            es_complete: true,
            warmup: cycle_id < 5,
        }
    }

    fn quiet(cycle_id: u32) -> ScoreRecord {
        record(cycle_id, 0.0, 0.0, 0.0, 0.0)
    }

    fn hot(cycle_id: u32) -> ScoreRecord {
        record(cycle_id, 13.0, 16.0, 9.0, 25.0)
    }

    #[test]
    fn zero_day_stays_in_control() {
        let mut m = Monitor::new(AlarmPolicy::default());
        for id in 0..600 {
            let t = m.observe(&quiet(id));
            assert!(t.alarm.is_none() && t.forecast.is_none());
        }
        assert_eq!(m.state().line_state(), Some(LineState::InC));
    }

    #[test]
    fn warmup_suppresses_alarm() {
        let mut m = Monitor::new(AlarmPolicy::default());
        let t = m.observe(&record(1, 11.96, 0.0, 0.0, 0.0));
        assert!(t.alarm.is_none());
        let t = m.observe(&record(2, 12.5, 0.0, 0.0, 0.0));
        assert!(t.alarm.is_none());
        assert_eq!(m.state().line_state(), Some(LineState::Warmup));
    }

    #[test]
    fn drift_raises_exactly_one_alarm() {
        let mut m = Monitor::new(AlarmPolicy::default());
        let mut alarms = Vec::new();
        for id in 0..40 {
            // TS climbs from 5 to 25 over cycles 20..30
            let ts = if id < 20 {
                5.0
            } else {
                (5.0 + 2.0 * f64::from(id - 20)).min(25.0)
            };
            let t = m.observe(&record(id, 0.0, 0.0, 0.0, ts));
            alarms.extend(t.alarm);
            if id == 30 {
                break;
            }
        }
        assert_eq!(alarms.len(), 1);
        assert_eq!(alarms[0].cycle_id, 28);
        assert_eq!(alarms[0].trigger, vec![ScoreKind::Total]);
        assert_eq!(m.state().line_state(), Some(LineState::SuspectedOutC));
    }

    #[test]
    fn sustain_delays_alarm() {
        let policy = AlarmPolicy {
            sustain: 3,
            ..Default::default()
        };
        let mut m = Monitor::new(policy);
        for id in 0..10 {
            m.observe(&quiet(id));
        }
        let mut fired = None;
        for id in 10..20 {
            if let Some(a) = m.observe(&hot(id)).alarm {
                fired.get_or_insert(a.cycle_id);
            }
        }
        assert_eq!(fired, Some(12));
    }

    #[test]
    fn suspected_escalates_then_clears() {
        let mut m = Monitor::new(AlarmPolicy::default());
        for id in 0..10 {
            m.observe(&quiet(id));
        }
        m.observe(&hot(10));
        for id in 11..15 {
            m.observe(&hot(id));
            assert_eq!(m.state().line_state(), Some(LineState::SuspectedOutC));
        }
        m.observe(&hot(15));
        assert_eq!(m.state().line_state(), Some(LineState::OutCHalted));

        let mut m = Monitor::new(AlarmPolicy::default());
        for id in 0..10 {
            m.observe(&quiet(id));
        }
        m.observe(&hot(10));
        for id in 11..25 {
            m.observe(&quiet(id));
            assert_eq!(m.state().line_state(), Some(LineState::SuspectedOutC));
        }
        m.observe(&quiet(25));
        assert_eq!(m.state().line_state(), Some(LineState::InC));
        assert!(m.state().open_alarms.is_empty());
    }

    #[test]
    fn forecast_examples() {
        let p = AlarmPolicy::default();
        assert!(!forecast_flag(&[3.0; 5], &p));
        assert!(forecast_flag(&[2., 3., 4., 5., 6.], &p));
        assert!(!forecast_flag(&[6., 5., 4., 3., 2.], &p));
        assert!(!forecast_flag(&[2., 3., 4., 5.], &p));
        assert!((least_squares_slope(&[2., 3., 4., 5., 6.]) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn forecast_fires_once_on_rising_es() {
        let mut m = Monitor::new(AlarmPolicy::default());
        let mut forecasts = 0;
        for id in 0..20 {
            let es = if id < 10 { 0.0 } else { f64::from(id - 10) * 0.8 };
            if m.observe(&record(id, 0.0, 0.0, es, es)).forecast.is_some() {
                forecasts += 1;
            }
        }
        assert_eq!(forecasts, 1);
    }

    #[test]
    fn commands() {
        let mut m = Monitor::new(AlarmPolicy::default());
        for id in 0..10 {
            m.observe(&quiet(id));
        }
        let at = quiet(10).timestamp;
        assert_eq!(
            m.apply(&Command::Resume, at),
            Err(CommandError::InvalidTransition {
                command: "resume",
                state: Some(LineState::InC)
            })
        );
        let alarm = m.observe(&hot(10)).alarm.unwrap();
        assert_eq!(
            m.apply(&Command::Acknowledge { alarm_id: 99 }, at),
            Err(CommandError::UnknownAlarm(99))
        );
        m.apply(&Command::Acknowledge { alarm_id: alarm.id }, at).unwrap();
        assert!(m.state().open_alarms[0].acknowledged);
        m.apply(&Command::Halt, at).unwrap();
        assert_eq!(m.state().line_state(), Some(LineState::OutCHalted));
        assert_eq!(m.state().open_alarms[0].operator_action, OperatorAction::Halt);
        assert!(m.apply(&Command::Halt, at).is_err());
        m.apply(&Command::Note { text: "replaced thermostat".into() }, at).unwrap();
        assert_eq!(m.state().open_alarms[0].note.as_deref(), Some("replaced thermostat"));
        m.apply(&Command::Resume, at).unwrap();
        assert_eq!(m.state().line_state(), Some(LineState::InC));
    }

    #[test]
    fn halted_line_raises_nothing_until_resumed() {
        let mut m = Monitor::new(AlarmPolicy::default());
        for id in 0..10 {
            m.observe(&quiet(id));
        }
        m.apply(&Command::Halt, quiet(10).timestamp).unwrap();
        assert!(m.observe(&hot(10)).alarm.is_none());
    }

    #[test]
    fn policy_validation() {
        assert!(AlarmPolicy::default().validate().is_ok());
        let bad = AlarmPolicy {
            sustain: 0,
            ..Default::default()
        };
        assert_eq!(bad.validate(), Err(PolicyError::ZeroSustain));
        let bad = AlarmPolicy {
            theta_es: 0.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn tuning_picks_separating_threshold() {
        use crate::metrics::Truth;
        // one episode where BS reaches 11, in-control stretch peaking at 9
        let mut records: Vec<ScoreRecord> = (0..100).map(quiet).collect();
        for id in 40..45 {
            records[id as usize] = record(id, 11.0, 0.0, 0.0, 0.0);
        }
        for id in 70..72 {
            records[id as usize] = record(id, 9.0, 0.0, 0.0, 0.0);
        }
        let labels = vec![
            EpisodeLabel::new(records[40].timestamp, records[44].timestamp, Truth::OutOfControl),
            EpisodeLabel::new(records[65].timestamp, records[80].timestamp, Truth::InControl),
        ];
        let days = vec![LabeledDay { records, labels }];
        let grid = ThresholdGrid {
            theta_bs: vec![8.0, 10.0, 12.0],
            theta_mbs: vec![100.0],
            theta_es: vec![100.0],
            theta_ts: vec![100.0],
        };
        let tuned = tune_thresholds(
            &days,
            &grid,
            &AlarmPolicy::default(),
            Duration::minutes(30),
            None,
        )
        .unwrap();
        assert_eq!(tuned.policy.theta_bs, 10.0);
        assert_eq!(tuned.balanced_accuracy, 1.0);
        assert_eq!(tuned.confusion, ConfusionMatrix::new(1, 0, 0, 1));

        assert_eq!(
            tune_thresholds(&[], &grid, &AlarmPolicy::default(), Duration::minutes(30), None),
            Err(TuneError::EmptyTrainingSet)
        );
    }
}
