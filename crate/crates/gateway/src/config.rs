//! JSON configuration file. Every section is optional.

use std::path::Path;
use std::time::Duration;

use chrono::Duration as LeadWindow;
use pheromone_core::engine::EngineConfig;
use pheromone_core::monitor::ThresholdGrid;
use pheromone_core::simulator::SimConfig;
use serde::{Deserialize, Serialize};

use crate::broadcast::{DEFAULT_BACKLOG_CAPACITY, DEFAULT_CONSUMER_BUFFER};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StreamConfig {
    pub consumer_buffer: usize,
    pub backlog_capacity: usize,
    pub heartbeat_secs: f64,
}

impl Default for StreamConfig {
    fn default() -> Self {
        Self {
            consumer_buffer: DEFAULT_CONSUMER_BUFFER,
            backlog_capacity: DEFAULT_BACKLOG_CAPACITY,
            heartbeat_secs: 10.0,
        }
    }
}

impl StreamConfig {
    pub fn heartbeat(&self) -> Duration {
        Duration::from_secs_f64(self.heartbeat_secs.max(0.001))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Config {
    #[serde(flatten)]
    pub engine: EngineConfig,
    pub simulation: SimConfig,
    pub grid: ThresholdGrid,
    pub lead_window_minutes: i64,
    pub stream: StreamConfig,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            engine: EngineConfig::default(),
            simulation: SimConfig::default(),
            grid: ThresholdGrid::default(),
            lead_window_minutes: 30,
            stream: StreamConfig::default(),
        }
    }
}

impl Config {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let config: Config = serde_json::from_str(&text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        self.engine.policy.validate()?;
        self.simulation.validate()?;
        anyhow::ensure!(self.lead_window_minutes >= 0, "lead window must not be negative");
        Ok(())
    }

    pub fn lead_window(&self) -> LeadWindow {
        LeadWindow::minutes(self.lead_window_minutes)
    }
}
