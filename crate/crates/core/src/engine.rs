//! One production line end to end: cycles and operator commands in,
//! ordered event messages out.

use chrono::{DateTime, FixedOffset};
use serde::{Deserialize, Serialize};

use crate::annotator::Annotator;
use crate::domain::{AntCycle, ProductionCalendar, Readings, READINGS_PER_CYCLE};
use crate::events::{CommandRecord, CommandSource, CycleAnnotation, EventMessage, StateMessage};
use crate::monitor::{
    apply_command, update_state, AlarmPolicy, AutoResume, Command, CommandError, Monitor,
    MonitorState,
};
use crate::scoring::{Emission, Pipeline, ScoreStatus, ScoringError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct EngineConfig {
    pub calendar: ProductionCalendar,
    pub annotator: Annotator,
    pub policy: AlarmPolicy,
    /// Resume halted lines automatically; meant for unattended replays.
    pub auto_resume: Option<AutoResume>,
}

#[derive(Debug, Clone)]
pub struct Engine {
    pipeline: Pipeline,
    monitor: Monitor,
    auto_resume: Option<AutoResume>,
    clock: Option<DateTime<FixedOffset>>,
    last_readings: Readings,
}

impl Engine {
    pub fn new(config: EngineConfig) -> Self {
        Self {
            pipeline: Pipeline::new(config.annotator, config.calendar),
            monitor: Monitor::new(config.policy),
            auto_resume: config.auto_resume,
            clock: None,
            last_readings: [0.0; READINGS_PER_CYCLE],
        }
    }

    pub fn monitor_state(&self) -> &MonitorState {
        self.monitor.state()
    }

    pub fn policy(&self) -> &AlarmPolicy {
        self.monitor.policy()
    }

    /// Timestamp of the most recent cycle seen.
    pub fn clock(&self) -> Option<DateTime<FixedOffset>> {
        self.clock
    }

    pub fn push_cycle(&mut self, cycle: AntCycle) -> Result<Vec<EventMessage>, ScoringError> {
        let at = cycle.timestamp;
        let readings = cycle.readings;
        let emissions = self.pipeline.push_cycle(cycle)?;
        self.clock = Some(at);
        self.last_readings = readings;
        Ok(self.handle(emissions))
    }

    /// Flushes cycles still waiting for lookahead.
    pub fn finish(&mut self) -> Vec<EventMessage> {
        let emissions = self.pipeline.finish_day();
        self.handle(emissions)
    }

    /// Applies an operator command and reports the resulting state.
    ///
    /// Rejected commands are still returned as a logged command message.
    pub fn command(
        &mut self,
        command: Command,
        at: DateTime<FixedOffset>,
        source: CommandSource,
    ) -> (Vec<EventMessage>, Result<(), CommandError>) {
        let result = self.monitor.apply(&command, at);
        let mut out = vec![EventMessage::Command(CommandRecord {
            timestamp: at,
            command,
            source,
            accepted: result.is_ok(),
            error: result.as_ref().err().map(ToString::to_string),
        })];
        if result.is_ok() {
            out.extend(StateMessage::from_state(self.monitor.state(), at).map(EventMessage::State));
        }
        (out, result)
    }

    fn handle(&mut self, emissions: Vec<Emission>) -> Vec<EventMessage> {
        let mut out = Vec::new();
        for emission in emissions {
            match emission {
                Emission::Provisional { record, annotation } => {
                    out.push(EventMessage::Annotation(CycleAnnotation {
                        day: record.day,
                        cycle_id: record.cycle_id,
                        timestamp: record.timestamp,
                        readings: self.last_readings,
                        annotation,
                    }));
                    out.push(EventMessage::Score(record));
                }
                Emission::Finalized { record, .. } => {
                    let at = record.timestamp;
                    let t = self.monitor.observe(&record);
                    out.push(EventMessage::Score(record));
                    out.extend(t.alarm.map(EventMessage::Alarm));
                    out.extend(t.forecast.map(EventMessage::Forecast));
                    if t.state_changed {
                        out.extend(
                            StateMessage::from_state(self.monitor.state(), at)
                                .map(EventMessage::State),
                        );
                    }
                    if let Some(auto) = self.auto_resume {
                        if auto.should_resume(self.monitor.state()) {
                            let (msgs, _) = self.command(Command::Resume, at, CommandSource::Auto);
                            out.extend(msgs);
                        }
                    }
                }
            }
        }
        out
    }
}

/// Rebuilds the monitor state from a persisted event log.
///
/// Only finalised score messages and accepted commands affect the state.
pub fn replay_state<'a>(
    policy: &AlarmPolicy,
    log: impl IntoIterator<Item = &'a EventMessage>,
) -> MonitorState {
    let mut state = MonitorState::default();
    for msg in log {
        match msg {
            EventMessage::Score(r) if r.status == ScoreStatus::Finalized => {
                state = update_state(r, policy, &state).0;
            }
            EventMessage::Command(c) if c.accepted => {
                // accepted once, accepted again: the log is totally ordered
                let _ = apply_command(&mut state, &c.command, c.timestamp);
            }
            _ => {}
        }
    }
    state
}
