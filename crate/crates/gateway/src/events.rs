//! Fan-out feed of routing events. Lossy under backpressure: a subscriber
//! that falls behind the channel buffer is disconnected with a notice, and the
//! request path never waits on subscribers.

use cascadeflow_core::Target;
use serde::{Deserialize, Serialize};
use tokio::sync::broadcast;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoutingEvent {
    pub seq: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    pub route: Target,
    pub score: f64,
    pub latency_ms: f64,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub degraded: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum FeedItem {
    Event(RoutingEvent),
    /// The subscriber fell `dropped` events behind and was cut off.
    Disconnected {
        dropped: u64,
    },
}

pub struct EventFeed {
    rx: broadcast::Receiver<RoutingEvent>,
    closed: bool,
}

impl EventFeed {
    pub(crate) fn new(rx: broadcast::Receiver<RoutingEvent>) -> Self {
        Self { rx, closed: false }
    }

    /// Next item in arrival order; `None` once the feed has ended.
    pub async fn next(&mut self) -> Option<FeedItem> {
        if self.closed {
            return None;
        }
        match self.rx.recv().await {
            Ok(event) => Some(FeedItem::Event(event)),
            Err(broadcast::error::RecvError::Lagged(dropped)) => {
                self.closed = true;
                Some(FeedItem::Disconnected { dropped })
            }
            Err(broadcast::error::RecvError::Closed) => {
                self.closed = true;
                None
            }
        }
    }
}
