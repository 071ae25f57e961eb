//! Deterministic discrete-event simulation of the network.
//!
//! The simulator moves nodes by random waypoint, drains batteries per
//! transmission, floods discovery requests, collects replies, selects
//! providers with the configured method and supervises composition paths
//! end to end. Everything observable lands in the trace record stream;
//! see [`engine`] for the run loop and [`run_scenario`] for the entry
//! point.

pub mod engine;
pub mod event;
pub mod mobility;
pub mod node;

pub use engine::{run_scenario, RunOutput};
pub use mobility::MobilityState;
pub use node::SimNode;
