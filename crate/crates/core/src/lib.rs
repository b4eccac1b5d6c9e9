//! Process mining toolkit: event logs, discovery, conformance and analytics.

#![allow(clippy::needless_range_loop)]

pub mod analytics;
pub mod conformance;
pub mod dfg;
pub mod eventlog;
pub mod heuristics;
pub mod inductive;
pub mod models;

pub use dfg::DirectlyFollowsGraph;
pub use eventlog::{ActivityLog, AttributeValue, Event, EventLog, LogError, Trace, ValueKind};
pub use heuristics::{discover_heuristics, CausalNet, HeuristicsParams};
pub use inductive::{discover_inductive, ProcessTree};
pub use models::{Marking, PetriNet};
