//! Fan-out of serialized event lines to any number of consumers.
//!
//! Publishing never waits on a consumer: each consumer has a bounded queue
//! and is disconnected as soon as its queue overflows.

use std::collections::VecDeque;
use std::sync::{Arc, Mutex};

use log::warn;
use pheromone_core::events::EventMessage;
use tokio::sync::mpsc::{self, error::TrySendError};

use crate::eventlog::to_line;

pub const DEFAULT_CONSUMER_BUFFER: usize = 1000;
pub const DEFAULT_BACKLOG_CAPACITY: usize = 10_000;

pub type Line = Arc<str>;

struct Inner {
    backlog: VecDeque<Line>,
    consumers: Vec<(u64, mpsc::Sender<Line>)>,
    next_id: u64,
    dropped: u64,
}

pub struct Broadcaster {
    inner: Mutex<Inner>,
    consumer_buffer: usize,
    backlog_capacity: usize,
}

/// Receiving end for one consumer.
pub struct Subscription {
    pub id: u64,
    pub lines: mpsc::Receiver<Line>,
}

impl Broadcaster {
    pub fn new(consumer_buffer: usize, backlog_capacity: usize) -> Self {
        Self {
            inner: Mutex::new(Inner {
                backlog: VecDeque::new(),
                consumers: Vec::new(),
                next_id: 0,
                dropped: 0,
            }),
            consumer_buffer: consumer_buffer.max(1),
            backlog_capacity,
        }
    }

    pub fn publish(&self, msg: &EventMessage) {
        self.publish_line(Arc::from(to_line(msg)));
    }

    pub fn publish_line(&self, line: Line) {
        let mut inner = self.inner.lock().expect("broadcaster lock");
        if self.backlog_capacity > 0 {
            if inner.backlog.len() == self.backlog_capacity {
                inner.backlog.pop_front();
            }
            inner.backlog.push_back(line.clone());
        }
        let before = inner.consumers.len();
        inner.consumers.retain(|(id, tx)| match tx.try_send(line.clone()) {
            Ok(()) => true,
            Err(TrySendError::Full(_)) => {
                warn!("consumer {id} fell behind and was disconnected");
                false
            }
            Err(TrySendError::Closed(_)) => false,
        });
        inner.dropped += (before - inner.consumers.len()) as u64;
    }

    /// Registers a consumer, pre-loaded with up to `backlog` recent lines.
    pub fn subscribe(&self, backlog: usize) -> Subscription {
        let mut inner = self.inner.lock().expect("broadcaster lock");
        let skip = inner.backlog.len().saturating_sub(backlog);
        let replay: Vec<Line> = inner.backlog.iter().skip(skip).cloned().collect();
        let (tx, rx) = mpsc::channel(self.consumer_buffer + replay.len());
        for line in replay {
            tx.try_send(line).expect("channel sized for the backlog");
        }
        let id = inner.next_id;
        inner.next_id += 1;
        inner.consumers.push((id, tx));
        Subscription { id, lines: rx }
    }

    /// Ends every consumer's stream once its queued lines are delivered.
    pub fn close_all(&self) {
        self.inner.lock().expect("broadcaster lock").consumers.clear();
    }

    pub fn consumer_count(&self) -> usize {
        self.inner.lock().expect("broadcaster lock").consumers.len()
    }

    /// Consumers removed so far, whether they overflowed or hung up.
    pub fn dropped_count(&self) -> u64 {
        self.inner.lock().expect("broadcaster lock").dropped
    }

    pub fn backlog_len(&self) -> usize {
        self.inner.lock().expect("broadcaster lock").backlog.len()
    }
}

impl Default for Broadcaster {
    fn default() -> Self {
        Self::new(DEFAULT_CONSUMER_BUFFER, DEFAULT_BACKLOG_CAPACITY)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(i: usize) -> Line {
        Arc::from(i.to_string())
    }

    #[tokio::test]
    async fn backlog_then_live() {
        let b = Broadcaster::new(10, 100);
        for i in 0..50 {
            b.publish_line(line(i));
        }
        let mut s = b.subscribe(30);
        b.publish_line(line(50));
        let mut got = Vec::new();
        while let Ok(l) = s.lines.try_recv() {
            got.push(l.parse::<usize>().unwrap());
        }
        assert_eq!(got, (20..=50).collect::<Vec<_>>());
    }

    #[tokio::test]
    async fn overflowing_consumer_is_dropped() {
        let b = Broadcaster::new(5, 0);
        let _stalled = b.subscribe(0);
        let mut live = b.subscribe(0);
        for i in 0..5 {
            b.publish_line(line(i));
            live.lines.recv().await.unwrap();
        }
        assert_eq!(b.consumer_count(), 2);
        b.publish_line(line(5));
        assert_eq!(b.consumer_count(), 1);
        assert_eq!(b.dropped_count(), 1);
        assert_eq!(&*live.lines.recv().await.unwrap(), "5");
    }

    #[tokio::test]
    async fn hung_up_consumer_is_removed() {
        let b = Broadcaster::new(5, 0);
        drop(b.subscribe(0));
        b.publish_line(line(0));
        assert_eq!(b.consumer_count(), 0);
    }

    #[test]
    fn backlog_is_bounded() {
        let b = Broadcaster::new(5, 3);
        for i in 0..10 {
            b.publish_line(line(i));
        }
        assert_eq!(b.backlog_len(), 3);
    }
}
