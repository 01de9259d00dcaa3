//! Streaming in-control / out-of-control classification for ant-cycle
//! temperature readings, driven by pheromone-style scores.

pub mod annotator;
pub mod changepoint;
pub mod domain;
pub mod engine;
pub mod events;
pub mod metrics;
pub mod monitor;
pub mod scoring;
pub mod simulator;

pub use annotator::{Annotation, Annotator, Color};
pub use domain::{AntCycle, InControlModel, ProductionCalendar, Readings, ValidationError};
pub use engine::{Engine, EngineConfig};
pub use events::EventMessage;
pub use metrics::{compute_metrics, match_episodes, ConfusionMatrix, EpisodeLabel, MetricSet, Truth};
pub use monitor::{AlarmEvent, AlarmPolicy, Command, LineState, Monitor, MonitorState};
pub use scoring::{Pipeline, ScoreRecord, ScoreStatus};
