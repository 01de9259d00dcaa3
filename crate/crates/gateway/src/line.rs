//! The single sequential task that owns one production line's engine.
//!
//! Cycles and operator commands share one input queue, so their relative
//! order is exactly the order in which they were submitted. Every resulting
//! message is logged, then broadcast.

use std::io::Write;
use std::sync::Arc;

use chrono::{DateTime, FixedOffset, Utc};
use log::{error, warn};
use pheromone_core::domain::AntCycle;
use pheromone_core::engine::Engine;
use pheromone_core::events::{CommandRecord, CommandSource, EventMessage};
use pheromone_core::monitor::{Command, CommandError};
use tokio::sync::{mpsc, oneshot};
use tokio::task::JoinHandle;

use crate::broadcast::Broadcaster;
use crate::eventlog::EventLogWriter;

pub type CommandReply = oneshot::Sender<Result<CommandRecord, CommandError>>;

pub enum LineInput {
    Cycle(AntCycle),
    Command { command: Command, reply: CommandReply },
    /// Flushes cycles still waiting for lookahead.
    EndOfCycles,
    /// Answered once everything queued before it has been processed.
    Barrier(oneshot::Sender<()>),
}

/// Where a line's messages go.
#[derive(Default)]
pub struct LineSink {
    pub broadcaster: Option<Arc<Broadcaster>>,
    pub log: Option<EventLogWriter<Box<dyn Write + Send>>>,
}

impl LineSink {
    pub fn emit(&mut self, messages: &[EventMessage]) {
        for msg in messages {
            if let Some(log) = &mut self.log {
                if let Err(e) = log.write(msg) {
                    error!("event log write failed: {e}");
                }
            }
            if let Some(b) = &self.broadcaster {
                b.publish(msg);
            }
        }
    }
}

pub struct LineHandle {
    pub input: mpsc::Sender<LineInput>,
    pub task: JoinHandle<(Engine, LineSink)>,
}

impl LineHandle {
    /// Waits until all previously queued input has been processed.
    pub async fn sync(&self) -> bool {
        let (tx, rx) = oneshot::channel();
        self.input.send(LineInput::Barrier(tx)).await.is_ok() && rx.await.is_ok()
    }
}

/// Command timestamps follow the line clock (latest cycle); wall time is used
/// only before the first cycle.
fn command_time(engine: &Engine) -> DateTime<FixedOffset> {
    engine.clock().unwrap_or_else(|| Utc::now().fixed_offset())
}

/// Starts the line task; it runs until every input sender is dropped.
pub fn spawn_line(mut engine: Engine, mut sink: LineSink) -> LineHandle {
    let (tx, mut rx) = mpsc::channel::<LineInput>(256);
    let task = tokio::spawn(async move {
        while let Some(input) = rx.recv().await {
            match input {
                LineInput::Cycle(cycle) => match engine.push_cycle(cycle) {
                    Ok(msgs) => sink.emit(&msgs),
                    Err(e) => warn!("cycle rejected: {e}"),
                },
                LineInput::Command { command, reply } => {
                    let at = command_time(&engine);
                    let (msgs, result) = engine.command(command, at, CommandSource::Operator);
                    sink.emit(&msgs);
                    let record = msgs.into_iter().find_map(|m| match m {
                        EventMessage::Command(c) => Some(c),
                        _ => None,
                    });
                    let _ = reply.send(result.map(|()| record.expect("command message is always emitted")));
                }
                LineInput::EndOfCycles => sink.emit(&engine.finish()),
                LineInput::Barrier(done) => {
                    let _ = done.send(());
                }
            }
        }
        sink.emit(&engine.finish());
        (engine, sink)
    });
    LineHandle { input: tx, task }
}
