//! Per-node simulation state.

use std::collections::BTreeMap;

use crate::discovery::DiscoveryAgent;
use crate::qos::{EnergyAccount, ReliabilityTracker};
use crate::types::{NodeId, Position};

use super::mobility::MobilityState;

/// Everything the simulator tracks about one node.
#[derive(Debug, Clone)]
pub struct SimNode {
    pub id: NodeId,
    pub position: Position,
    pub mobility: MobilityState,
    pub energy: EnergyAccount,
    /// Cleared the first time a transmission or reception is refused for
    /// lack of energy; a dead node neither sends nor receives.
    pub alive: bool,
    pub misbehaving: bool,
    pub agent: DiscoveryAgent,
    /// Forwarding reputation this node has accumulated about its peers,
    /// fed by watching whether they relay what it hands them.
    pub trackers: BTreeMap<NodeId, ReliabilityTracker>,
    /// Sequence source for the node's own discovery requests.
    pub request_seq: u64,
}

impl SimNode {
    /// Observed forwarding reliability of `peer`, or the neutral prior
    /// when this node has never watched it.
    pub fn reliability_of(&self, peer: NodeId) -> f64 {
        self.trackers
            .get(&peer)
            .map(ReliabilityTracker::expectation)
            .unwrap_or_else(|| ReliabilityTracker::new().expectation())
    }

    /// Record one watched relay: `peer` either forwarded the payload or
    /// discarded it.
    pub fn observe_peer(&mut self, peer: NodeId, forwarded: bool) {
        self.trackers
            .entry(peer)
            .or_insert_with(ReliabilityTracker::new)
            .observe(u64::from(forwarded), 1)
            .expect("single observation counts are consistent");
    }
}
