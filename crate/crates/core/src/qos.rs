//! Per-candidate QoS quantities: transmission energy, Bayesian node
//! reliability, service failure rate and response-time decomposition.
//!
//! All quantities are SI (joules, seconds, meters, bits). Every type here is
//! a plain value and every operation is a pure function of its inputs, so
//! the module is freely shareable across threads.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Radio energy coefficients.
///
/// `e_act` is the per-bit cost of driving the transmitter or receiver
/// electronics; `e_amp` is the amplifier cost per bit per square meter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyParams {
    /// Joules per bit for transmitter/receiver access.
    pub e_act: f64,
    /// Joules per bit per square meter for the amplifier.
    pub e_amp: f64,
}

impl Default for EnergyParams {
    fn default() -> Self {
        // Config defaults only; callers may override both.
        EnergyParams {
            e_act: 50e-9,
            e_amp: 100e-12,
        }
    }
}

/// Total radio energy to move `k_bits` over distance `d_meters`:
/// `2·e_act·k + e_amp·d²·k`.
///
/// The total bundles the transmitter and receiver sides. When the cost must
/// be attributed per node, use [`tx_share`] and [`rx_share`]; they sum to
/// this total.
pub fn transmission_energy(k_bits: f64, d_meters: f64, p: &EnergyParams) -> Result<f64> {
    if !(k_bits >= 0.0) || !k_bits.is_finite() {
        return Err(Error::invalid(format!("k_bits must be >= 0, got {k_bits}")));
    }
    if !(d_meters >= 0.0) || !d_meters.is_finite() {
        return Err(Error::invalid(format!(
            "d_meters must be >= 0, got {d_meters}"
        )));
    }
    Ok(2.0 * p.e_act * k_bits + p.e_amp * (d_meters * d_meters) * k_bits)
}

/// Sender-side share of [`transmission_energy`]: `e_act·k + e_amp·d²·k`.
pub fn tx_share(k_bits: f64, d_meters: f64, p: &EnergyParams) -> f64 {
    p.e_act * k_bits + p.e_amp * (d_meters * d_meters) * k_bits
}

/// Receiver-side share of [`transmission_energy`]: `e_act·k`.
pub fn rx_share(k_bits: f64, p: &EnergyParams) -> f64 {
    p.e_act * k_bits
}

/// A node's battery: fixed initial charge and monotone consumption.
///
/// A charge is all-or-nothing: an amount the battery cannot cover is refused
/// and leaves the account untouched, so `consumed` always equals the exact
/// sum of accepted charges.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyAccount {
    pub initial: f64,
    pub consumed: f64,
}

impl EnergyAccount {
    pub fn new(initial: f64) -> Self {
        EnergyAccount {
            initial,
            consumed: 0.0,
        }
    }

    pub fn remaining(&self) -> f64 {
        (self.initial - self.consumed).max(0.0)
    }

    pub fn is_dead(&self) -> bool {
        self.remaining() <= 0.0
    }

    /// Consume `amount` joules. Returns `false` and leaves the account
    /// unchanged when the remaining charge cannot cover the amount.
    pub fn deplete(&mut self, amount: f64) -> bool {
        debug_assert!(amount >= 0.0);
        if amount > self.remaining() {
            return false;
        }
        self.consumed += amount;
        true
    }
}

/// Beta-style reliability tracker over forwarding observations.
///
/// `alpha` accumulates correctly forwarded packets, `beta` the dropped ones.
/// The expectation `alpha / (alpha + beta)` estimates the probability that
/// the tracked node forwards a packet it receives.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReliabilityTracker {
    alpha: f64,
    beta: f64,
    prior_alpha: f64,
    prior_beta: f64,
    /// Expectation reported while alpha + beta == 0.
    empty_default: f64,
}

impl Default for ReliabilityTracker {
    fn default() -> Self {
        ReliabilityTracker::new()
    }
}

impl ReliabilityTracker {
    /// Fresh tracker with zero priors. An empty tracker reports 0.5.
    pub fn new() -> Self {
        ReliabilityTracker::with_prior(0.0, 0.0, 0.5)
    }

    pub fn with_prior(prior_alpha: f64, prior_beta: f64, empty_default: f64) -> Self {
        assert!(prior_alpha >= 0.0 && prior_beta >= 0.0);
        assert!((0.0..=1.0).contains(&empty_default));
        ReliabilityTracker {
            alpha: prior_alpha,
            beta: prior_beta,
            prior_alpha,
            prior_beta,
            empty_default,
        }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Record that `forwarded` of `received` packets were forwarded
    /// correctly: `alpha += forwarded; beta += received - forwarded`.
    pub fn observe(&mut self, forwarded: u64, received: u64) -> Result<()> {
        if forwarded > received {
            return Err(Error::invalid(format!(
                "forwarded ({forwarded}) cannot exceed received ({received})"
            )));
        }
        self.alpha += forwarded as f64;
        self.beta += (received - forwarded) as f64;
        Ok(())
    }

    /// `alpha / (alpha + beta)`, or the configured default while no
    /// observation has been recorded.
    pub fn expectation(&self) -> f64 {
        let total = self.alpha + self.beta;
        if total == 0.0 {
            self.empty_default
        } else {
            self.alpha / total
        }
    }
}

/// Failure count over an observation window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FailureWindow {
    pub failures: u64,
    /// Window length, seconds. Must be positive.
    pub window: f64,
}

impl FailureWindow {
    pub fn new(failures: u64, window: f64) -> Self {
        FailureWindow { failures, window }
    }

    /// Failures per second. This is a cost metric: lower is better, despite
    /// the quantity often being called "reliability".
    pub fn rate(&self) -> Result<f64> {
        if !(self.window > 0.0) {
            return Err(Error::invalid(format!(
                "failure window must be > 0, got {}",
                self.window
            )));
        }
        Ok(self.failures as f64 / self.window)
    }
}

/// The five additive components of a service's response time.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ResponseTimeComponents {
    /// Task processing time.
    pub t_task: f64,
    /// Protocol-stack processing at source, relays and destination.
    pub t_stack: f64,
    /// Network transport time.
    pub t_transport: f64,
    /// Compression/decompression time.
    pub t_cd: f64,
    /// Encryption/decryption time.
    pub t_ed: f64,
}

impl ResponseTimeComponents {
    /// Sum of the five components.
    pub fn total(&self) -> Result<f64> {
        let parts = [
            ("t_task", self.t_task),
            ("t_stack", self.t_stack),
            ("t_transport", self.t_transport),
            ("t_cd", self.t_cd),
            ("t_ed", self.t_ed),
        ];
        for (name, v) in parts {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::invalid(format!("{name} must be >= 0, got {v}")));
            }
        }
        Ok(self.t_task + self.t_stack + self.t_transport + self.t_cd + self.t_ed)
    }
}

/// One candidate's four QoS inputs, plus the optional hop count.
///
/// `response_time` and `service_failure_rate` are costs; `node_energy` and
/// `node_reliability` are benefits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QosVector {
    /// Seconds (cost).
    pub response_time: f64,
    /// Failures per second (cost).
    pub service_failure_rate: f64,
    /// Joules remaining on the hosting node (benefit).
    pub node_energy: f64,
    /// Forwarding reliability expectation in [0, 1] (benefit).
    pub node_reliability: f64,
    /// Radio hops from the initiator, when known (cost).
    pub hop_count: Option<u32>,
}

impl QosVector {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("response_time", self.response_time),
            ("service_failure_rate", self.service_failure_rate),
            ("node_energy", self.node_energy),
            ("node_reliability", self.node_reliability),
        ];
        for (name, v) in fields {
            if !v.is_finite() {
                return Err(Error::invalid(format!("{name} must be finite, got {v}")));
            }
        }
        if !(0.0..=1.0).contains(&self.node_reliability) {
            return Err(Error::invalid(format!(
                "node_reliability must be in [0,1], got {}",
                self.node_reliability
            )));
        }
        if let Some(h) = self.hop_count {
            if h < 1 {
                return Err(Error::invalid("hop_count must be >= 1 when present"));
            }
        }
        Ok(())
    }
}
