//! Cascade inference gateway: scores each Student output, escalates
//! low-confidence requests to the Teacher, and exposes runtime state over
//! HTTP.

pub mod backend;
pub mod config;
mod error;
pub mod events;
pub mod http;
pub mod pseudo;
pub mod service;
pub mod stats;

pub use backend::{
    Backend, BackendDescriptor, BackendError, InferenceRequest, ModelOutput, Side, Task,
};
pub use config::{ConfigUpdate, DegradedMode, GatewayConfig, PolicyUpdate, ServeConfig};
pub use error::GatewayError;
pub use events::{EventFeed, FeedItem, RoutingEvent};
pub use pseudo::{generate_pseudo_labels, PseudoLabelError};
pub use service::{parse_infer_request, Gateway, GatewayOptions, InferRequest, InferResponse};
pub use stats::RuntimeStats;
