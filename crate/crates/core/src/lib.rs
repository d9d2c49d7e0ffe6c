//! Energy-based routing between a small Student model and a large Teacher
//! model, plus the offline tooling used to pick the routing threshold.
//!
//! - [`energy`]: free-energy, softmax and entropy scores over model outputs.
//! - [`policy`]: router policies and the threshold comparator.
//! - [`calibration`]: threshold sweeps, cost model, McNemar test, diagnostics.
//! - [`dataset`]: JSONL dataset schemas and loaders.

pub mod calibration;
pub mod dataset;
pub mod energy;
mod error;
pub mod logits;
pub mod policy;
pub mod synthetic;
pub mod threshold;

pub use error::{Error, Result};
pub use logits::LogitVector;
pub use policy::{RouterPolicy, RoutingDecision, ScoreType, Specialization, Target};
