//! JSON-lines event protocol shared by the live stream and the event log.

use chrono::{DateTime, FixedOffset, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::annotator::Annotation;
use crate::domain::Readings;
use crate::monitor::{AlarmEvent, Command, LineState, MonitorState};
use crate::scoring::ScoreRecord;

/// Readings plus annotation for one cycle, sent once when the cycle arrives.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleAnnotation {
    pub day: NaiveDate,
    pub cycle_id: u32,
    pub timestamp: DateTime<FixedOffset>,
    pub readings: Readings,
    #[serde(flatten)]
    pub annotation: Annotation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateMessage {
    pub timestamp: DateTime<FixedOffset>,
    pub state: LineState,
    pub since: DateTime<FixedOffset>,
    pub open_alarms: Vec<AlarmEvent>,
}

impl StateMessage {
    pub fn from_state(state: &MonitorState, timestamp: DateTime<FixedOffset>) -> Option<Self> {
        let system = state.system?;
        Some(Self {
            timestamp,
            state: system.state,
            since: system.since,
            open_alarms: state.open_alarms.clone(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum CommandSource {
    #[default]
    Operator,
    /// Issued by the offline operator stand-in.
    Auto,
}

/// A command as it entered the pipeline, accepted or not.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommandRecord {
    pub timestamp: DateTime<FixedOffset>,
    #[serde(flatten)]
    pub command: Command,
    #[serde(default)]
    pub source: CommandSource,
    pub accepted: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum EventMessage {
    Annotation(CycleAnnotation),
    Score(ScoreRecord),
    Alarm(AlarmEvent),
    Forecast(AlarmEvent),
    State(StateMessage),
    Command(CommandRecord),
    Heartbeat { at: DateTime<FixedOffset> },
}

impl EventMessage {
    /// Rank of the message type among messages for the same cycle.
    pub fn type_priority(&self) -> u8 {
        match self {
            EventMessage::Annotation(_) => 0,
            EventMessage::Score(_) => 1,
            EventMessage::Alarm(_) => 2,
            EventMessage::Forecast(_) => 3,
            EventMessage::State(_) => 4,
            EventMessage::Command(_) => 5,
            EventMessage::Heartbeat { .. } => 6,
        }
    }

    /// `(day, cycle_id)` of the cycle the message refers to, if any.
    pub fn cycle_key(&self) -> Option<(NaiveDate, u32)> {
        match self {
            EventMessage::Annotation(a) => Some((a.day, a.cycle_id)),
            EventMessage::Score(r) => Some((r.day, r.cycle_id)),
            EventMessage::Alarm(a) | EventMessage::Forecast(a) => Some((a.day, a.cycle_id)),
            _ => None,
        }
    }

    pub fn type_name(&self) -> &'static str {
        match self {
            EventMessage::Annotation(_) => "annotation",
            EventMessage::Score(_) => "score",
            EventMessage::Alarm(_) => "alarm",
            EventMessage::Forecast(_) => "forecast",
            EventMessage::State(_) => "state",
            EventMessage::Command(_) => "command",
            EventMessage::Heartbeat { .. } => "heartbeat",
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::annotator::Color;
    use chrono::TimeZone;

    fn now() -> DateTime<FixedOffset> {
        FixedOffset::east_opt(3600)
            .unwrap()
            .with_ymd_and_hms(2025, 4, 7, 10, 0, 0)
            .unwrap()
    }

    #[test]
    fn annotation_message_shape() {
        let msg = EventMessage::Annotation(CycleAnnotation {
            day: NaiveDate::from_ymd_opt(2025, 4, 7).unwrap(),
            cycle_id: 90,
            timestamp: now(),
            readings: [185.5; 8],
            annotation: Annotation {
                color: Color::Orange,
                ..Default::default()
            },
        });
        let json = serde_json::to_value(&msg).unwrap();
        assert_eq!(json["type"], "annotation");
        assert_eq!(json["color"], "orange");
        assert_eq!(json["timestamp"], "2025-04-07T10:00:00+01:00");
        let back: EventMessage = serde_json::from_value(json).unwrap();
        assert_eq!(back, msg);
    }

    #[test]
    fn command_message_shape() {
        let msg = EventMessage::Command(CommandRecord {
            timestamp: now(),
            command: Command::Acknowledge { alarm_id: 4 },
            source: CommandSource::Operator,
            accepted: true,
            error: None,
        });
        let json = serde_json::to_value(&msg).unwrap();
        assert_eq!(json["type"], "command");
        assert_eq!(json["command"], "acknowledge");
        assert_eq!(json["alarm_id"], 4);
        let back: EventMessage = serde_json::from_value(json).unwrap();
        assert_eq!(back, msg);
    }

    #[test]
    fn heartbeat_shape() {
        let json = serde_json::to_string(&EventMessage::Heartbeat { at: now() }).unwrap();
        assert_eq!(json, r#"{"type":"heartbeat","at":"2025-04-07T10:00:00+01:00"}"#);
    }
}
