//! QoS-constrained service composition for mobile ad hoc networks.
//!
//! The crate provides the planning pipeline (TTL-bounded service discovery,
//! QoS normalization, Hammerstein trust fusion, trust-matrix provider
//! selection) together with a deterministic discrete-event simulator that
//! exercises it under mobility, energy depletion, lossy radio and
//! misbehaving relays. Start with the `examples/` directory; each example
//! is a runnable walkthrough of one capability.

pub mod batch;
pub mod cli;
pub mod composition;
pub mod discovery;
pub mod error;
pub mod hammerstein;
pub mod metrics;
pub mod qos;
pub mod scenario;
pub mod sim;
pub mod trace;
pub mod types;

pub use error::{Error, Result};
