//! Decentralized service discovery: one-hop repositories fed by periodic
//! beacons, composite requests split into per-service floods bounded by a
//! TTL hop budget, duplicate suppression, and QoS-bearing replies routed
//! back along the recorded path.
//!
//! Everything here is protocol logic only. Radio reachability, loss,
//! latency and energy accounting belong to the simulator; the functions in
//! this module decide what a node would send, never whether it arrives.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::composition::ServiceAdvertisement;
use crate::error::{Error, Result};
use crate::types::{ConcreteServiceId, NodeId, ServiceId, SimTime};

/// Identifier of one atomic service lookup: the initiating node plus a
/// per-initiator sequence number.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RequestId {
    pub initiator: NodeId,
    pub sequence: u64,
}

impl fmt::Display for RequestId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}#{}", self.initiator, self.sequence)
    }
}

impl std::str::FromStr for RequestId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::invalid(format!("malformed request id: {s}"));
        let rest = s.strip_prefix('N').ok_or_else(bad)?;
        let (node, seq) = rest.split_once('#').ok_or_else(bad)?;
        Ok(RequestId {
            initiator: NodeId(node.parse().map_err(|_| bad())?),
            sequence: seq.parse().map_err(|_| bad())?,
        })
    }
}

/// One hosted concrete service together with the attributes its provider
/// advertises for it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ServiceOffering {
    pub service: ServiceId,
    pub concrete: ConcreteServiceId,
    /// Advertised end-to-end response time of one invocation, seconds.
    pub response_time: f64,
    /// Advertised failures per second of service time.
    pub failure_rate: f64,
    /// Intrinsic execution time of the task itself, seconds.
    pub task_time: f64,
}

/// Periodic one-hop broadcast describing everything a node hosts.
#[derive(Debug, Clone, PartialEq)]
pub struct ServiceBeacon {
    pub origin: NodeId,
    pub sequence: u64,
    pub offerings: Vec<ServiceOffering>,
    /// Battery level at beacon time, used when a repository answers on the
    /// origin's behalf.
    pub energy_remaining: f64,
}

#[derive(Debug, Clone, PartialEq)]
struct RepoEntry {
    offerings: Vec<ServiceOffering>,
    sequence: u64,
    energy_remaining: f64,
    last_heard: SimTime,
}

/// What a node knows about its one-hop neighbors' services, keyed by
/// neighbor and refreshed by beacons.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Repository {
    entries: BTreeMap<NodeId, RepoEntry>,
}

impl Repository {
    pub fn new() -> Self {
        Repository::default()
    }

    /// Absorb a beacon. Sequence numbers strictly increase per origin;
    /// replays and reordered stragglers are ignored.
    pub fn record(&mut self, beacon: &ServiceBeacon, now: SimTime) {
        match self.entries.get(&beacon.origin) {
            Some(e) if beacon.sequence <= e.sequence => {}
            _ => {
                self.entries.insert(
                    beacon.origin,
                    RepoEntry {
                        offerings: beacon.offerings.clone(),
                        sequence: beacon.sequence,
                        energy_remaining: beacon.energy_remaining,
                        last_heard: now,
                    },
                );
            }
        }
    }

    /// Drop every neighbor not heard from within `horizon` seconds.
    pub fn evict_stale(&mut self, now: SimTime, horizon: f64) {
        self.entries.retain(|_, e| now - e.last_heard <= horizon);
    }

    /// All known neighbor offerings matching `service`, in neighbor id
    /// order.
    pub fn matches(&self, service: ServiceId) -> Vec<(NodeId, ServiceOffering, f64)> {
        let mut out = Vec::new();
        for (node, entry) in &self.entries {
            for off in &entry.offerings {
                if off.service == service {
                    out.push((*node, *off, entry.energy_remaining));
                }
            }
        }
        out
    }

    pub fn neighbor_count(&self) -> usize {
        self.entries.len()
    }
}

/// One atomic service lookup in flight. The route lists every node that
/// has transmitted the packet, initiator first, and `ttl` is the number of
/// further forwards the packet may still take.
#[derive(Debug, Clone, PartialEq)]
pub struct RequestPacket {
    pub request_id: RequestId,
    pub service: ServiceId,
    pub ttl: u32,
    pub route: Vec<NodeId>,
}

impl RequestPacket {
    pub fn initiator(&self) -> NodeId {
        self.request_id.initiator
    }

    /// Hops travelled so far.
    pub fn hop_count(&self) -> u32 {
        self.route.len().saturating_sub(1) as u32
    }

    /// The copy `sender` puts on the air: one unit of hop budget spent,
    /// sender appended to the route. Fails when the budget is exhausted; a
    /// packet with ttl 0 is never forwarded.
    pub fn transmitted_by(&self, sender: NodeId) -> Result<RequestPacket> {
        if self.ttl == 0 {
            return Err(Error::invalid(format!(
                "request {} has no hop budget left",
                self.request_id
            )));
        }
        let mut route = self.route.clone();
        if route.last() != Some(&sender) {
            route.push(sender);
        }
        Ok(RequestPacket {
            request_id: self.request_id,
            service: self.service,
            ttl: self.ttl - 1,
            route,
        })
    }
}

/// Split a composite lookup into one request per abstract service, each
/// with a fresh id drawn from `sequence` and the full initial hop budget.
/// Duplicate ids in the composite are positional: each occurrence gets its
/// own packet.
pub fn split_request(
    composite: &[ServiceId],
    initiator: NodeId,
    ttl: u32,
    sequence: &mut u64,
) -> Result<Vec<RequestPacket>> {
    if composite.is_empty() {
        return Err(Error::invalid(
            "composite request must name at least one service",
        ));
    }
    Ok(composite
        .iter()
        .map(|service| {
            let id = RequestId {
                initiator,
                sequence: *sequence,
            };
            *sequence += 1;
            RequestPacket {
                request_id: id,
                service: *service,
                ttl,
                route: vec![initiator],
            }
        })
        .collect())
}

/// A reply the protocol wants sent, before the simulator fills in the
/// dynamic provider attributes (live energy, observed reliability).
#[derive(Debug, Clone, PartialEq)]
pub struct ReplyDraft {
    pub request_id: RequestId,
    /// The node being advertised: the replier itself, or a one-hop
    /// neighbor out of its repository.
    pub subject: NodeId,
    pub offering: ServiceOffering,
    /// Route from the initiator to the subject; the reply travels its
    /// reverse, minus the final hop when the subject is not the replier.
    pub route: Vec<NodeId>,
    /// Battery level to advertise for a neighbor subject, taken from its
    /// last beacon. `None` means the replier advertises itself and live
    /// energy applies.
    pub energy_snapshot: Option<f64>,
}

/// Everything a node decides to do with one delivered request.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RequestDisposition {
    pub replies: Vec<ReplyDraft>,
    pub forward: Option<RequestPacket>,
    pub duplicate: bool,
}

/// Per-node protocol state: hosted services, the one-hop repository and
/// the duplicate cache.
#[derive(Debug, Clone)]
pub struct DiscoveryAgent {
    node: NodeId,
    hosted: Vec<ServiceOffering>,
    repository: Repository,
    seen: BTreeSet<RequestId>,
    beacon_sequence: u64,
}

impl DiscoveryAgent {
    pub fn new(node: NodeId, hosted: Vec<ServiceOffering>) -> Self {
        DiscoveryAgent {
            node,
            hosted,
            repository: Repository::new(),
            seen: BTreeSet::new(),
            beacon_sequence: 0,
        }
    }

    pub fn node(&self) -> NodeId {
        self.node
    }

    pub fn hosted(&self) -> &[ServiceOffering] {
        &self.hosted
    }

    pub fn repository(&self) -> &Repository {
        &self.repository
    }

    /// Next beacon to broadcast; sequence numbers strictly increase.
    pub fn next_beacon(&mut self, energy_remaining: f64) -> ServiceBeacon {
        self.beacon_sequence += 1;
        ServiceBeacon {
            origin: self.node,
            sequence: self.beacon_sequence,
            offerings: self.hosted.clone(),
            energy_remaining,
        }
    }

    pub fn record_beacon(&mut self, beacon: &ServiceBeacon, now: SimTime) {
        self.repository.record(beacon, now);
    }

    pub fn evict_stale(&mut self, now: SimTime, horizon: f64) {
        self.repository.evict_stale(now, horizon);
    }

    /// Pre-seed the duplicate cache with a request this node itself
    /// initiated, so echoes of its own flood are dropped.
    pub fn note_own_request(&mut self, id: RequestId) {
        self.seen.insert(id);
    }

    /// Apply the protocol to one delivered request: drop duplicates, reply
    /// for every matching hosted or repository service, and spend one unit
    /// of hop budget on a rebroadcast while any remains. A matching node
    /// replies and still forwards; the initiator wants every candidate.
    pub fn handle_request(&mut self, pkt: &RequestPacket) -> RequestDisposition {
        if !self.seen.insert(pkt.request_id) {
            return RequestDisposition {
                duplicate: true,
                ..RequestDisposition::default()
            };
        }
        let mut here = pkt.route.clone();
        if here.last() != Some(&self.node) {
            here.push(self.node);
        }
        let mut replies = Vec::new();
        for off in &self.hosted {
            if off.service == pkt.service {
                replies.push(ReplyDraft {
                    request_id: pkt.request_id,
                    subject: self.node,
                    offering: *off,
                    route: here.clone(),
                    energy_snapshot: None,
                });
            }
        }
        for (neighbor, offering, energy) in self.repository.matches(pkt.service) {
            if neighbor == self.node {
                continue;
            }
            let mut route = here.clone();
            route.push(neighbor);
            replies.push(ReplyDraft {
                request_id: pkt.request_id,
                subject: neighbor,
                offering,
                route,
                energy_snapshot: Some(energy),
            });
        }
        let forward = (pkt.ttl > 0).then(|| {
            pkt.transmitted_by(self.node)
                .expect("positive ttl always forwards")
        });
        RequestDisposition {
            replies,
            forward,
            duplicate: false,
        }
    }
}

/// A reply on its way back to the initiator.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplyPacket {
    pub request_id: RequestId,
    pub advertisement: ServiceAdvertisement,
    /// The unicast legs the reply walks: replier first, initiator last.
    pub reverse_route: Vec<NodeId>,
}

/// Outcome of offering one reply to the collector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AcceptOutcome {
    Accepted,
    Late,
    UnknownRequest,
    ServiceMismatch,
}

/// Initiator-side collection of replies for one composite lookup. Keeps
/// the latest advertisement per (service, provider, concrete) and discards
/// anything arriving after the deadline.
#[derive(Debug, Clone)]
pub struct ReplyCollector {
    expected: BTreeMap<RequestId, ServiceId>,
    deadline: SimTime,
    ads: BTreeMap<(ServiceId, NodeId, ConcreteServiceId), ServiceAdvertisement>,
    late: u64,
    rejected: u64,
}

impl ReplyCollector {
    pub fn new(requests: &[RequestPacket], deadline: SimTime) -> Self {
        ReplyCollector {
            expected: requests.iter().map(|r| (r.request_id, r.service)).collect(),
            deadline,
            ads: BTreeMap::new(),
            late: 0,
            rejected: 0,
        }
    }

    pub fn deadline(&self) -> SimTime {
        self.deadline
    }

    pub fn accept(&mut self, reply: &ReplyPacket, now: SimTime) -> AcceptOutcome {
        let Some(service) = self.expected.get(&reply.request_id) else {
            self.rejected += 1;
            return AcceptOutcome::UnknownRequest;
        };
        if reply.advertisement.service != *service {
            self.rejected += 1;
            return AcceptOutcome::ServiceMismatch;
        }
        if now > self.deadline {
            self.late += 1;
            return AcceptOutcome::Late;
        }
        let ad = &reply.advertisement;
        let key = (ad.service, ad.provider, ad.concrete);
        let replace = match self.ads.get(&key) {
            Some(prev) => ad.received_at >= prev.received_at,
            None => true,
        };
        if replace {
            self.ads.insert(key, ad.clone());
        }
        AcceptOutcome::Accepted
    }

    /// Everything collected so far, deterministic order.
    pub fn advertisements(&self) -> Vec<ServiceAdvertisement> {
        self.ads.values().cloned().collect()
    }

    pub fn late_count(&self) -> u64 {
        self.late
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qos::QosVector;
    use proptest::prelude::*;

    fn offering(service: u32, concrete: u32) -> ServiceOffering {
        ServiceOffering {
            service: ServiceId(service),
            concrete: ConcreteServiceId(concrete),
            response_time: 0.5,
            failure_rate: 0.1,
            task_time: 0.3,
        }
    }

    fn nid(i: u32) -> NodeId {
        NodeId(i)
    }

    #[test]
    fn request_id_display_round_trip() {
        let id = RequestId {
            initiator: nid(3),
            sequence: 17,
        };
        assert_eq!(id.to_string(), "N3#17");
        assert_eq!("N3#17".parse::<RequestId>().unwrap(), id);
        assert!("3#17".parse::<RequestId>().is_err());
        assert!("N3".parse::<RequestId>().is_err());
    }

    #[test]
    fn split_one_packet_per_service() {
        let plan: Vec<ServiceId> = (1..=5).map(ServiceId).collect();
        let mut seq = 0;
        let pkts = split_request(&plan, nid(0), 5, &mut seq).unwrap();
        assert_eq!(pkts.len(), 5);
        let ids: BTreeSet<RequestId> = pkts.iter().map(|p| p.request_id).collect();
        assert_eq!(ids.len(), 5);
        for (p, s) in pkts.iter().zip(&plan) {
            assert_eq!(p.service, *s);
            assert_eq!(p.ttl, 5);
            assert_eq!(p.route, vec![nid(0)]);
        }
        assert_eq!(seq, 5);
    }

    #[test]
    fn split_single_service() {
        let mut seq = 9;
        let pkts = split_request(&[ServiceId(7)], nid(1), 3, &mut seq).unwrap();
        assert_eq!(pkts.len(), 1);
        assert_eq!(pkts[0].request_id.sequence, 9);
    }

    #[test]
    fn split_duplicate_services_get_distinct_ids() {
        let mut seq = 0;
        let pkts = split_request(&[ServiceId(4), ServiceId(4)], nid(1), 3, &mut seq).unwrap();
        assert_eq!(pkts.len(), 2);
        assert_ne!(pkts[0].request_id, pkts[1].request_id);
    }

    #[test]
    fn split_rejects_empty_composite() {
        let mut seq = 0;
        assert!(split_request(&[], nid(1), 3, &mut seq).is_err());
    }

    #[test]
    fn transmit_spends_budget_and_records_route() {
        let mut seq = 0;
        let pkt = &split_request(&[ServiceId(1)], nid(0), 2, &mut seq).unwrap()[0];
        // the initiator is already on the route; its own send only spends budget
        let wire = pkt.transmitted_by(nid(0)).unwrap();
        assert_eq!(wire.ttl, 1);
        assert_eq!(wire.route, vec![nid(0)]);
        let forwarded = wire.transmitted_by(nid(4)).unwrap();
        assert_eq!(forwarded.ttl, 0);
        assert_eq!(forwarded.route, vec![nid(0), nid(4)]);
        assert_eq!(forwarded.hop_count(), 1);
        assert!(forwarded.transmitted_by(nid(5)).is_err());
    }

    #[test]
    fn repository_records_and_matches() {
        let mut repo = Repository::new();
        let beacon = ServiceBeacon {
            origin: nid(2),
            sequence: 1,
            offerings: vec![offering(1, 10), offering(2, 11)],
            energy_remaining: 0.7,
        };
        repo.record(&beacon, 1.0);
        let hits = repo.matches(ServiceId(1));
        assert_eq!(hits.len(), 1);
        assert_eq!(hits[0].0, nid(2));
        assert_eq!(hits[0].1.concrete, ConcreteServiceId(10));
        assert_eq!(hits[0].2, 0.7);
        assert!(repo.matches(ServiceId(9)).is_empty());
    }

    #[test]
    fn repository_ignores_stale_sequence() {
        let mut repo = Repository::new();
        let newer = ServiceBeacon {
            origin: nid(2),
            sequence: 5,
            offerings: vec![offering(1, 10)],
            energy_remaining: 0.9,
        };
        let replay = ServiceBeacon {
            sequence: 4,
            offerings: vec![offering(2, 20)],
            ..newer.clone()
        };
        repo.record(&newer, 1.0);
        repo.record(&replay, 2.0);
        assert_eq!(repo.matches(ServiceId(1)).len(), 1);
        assert!(repo.matches(ServiceId(2)).is_empty());
    }

    #[test]
    fn repository_evicts_unheard_neighbors() {
        let mut repo = Repository::new();
        for (node, at) in [(1u32, 0.0), (2, 2.5)] {
            repo.record(
                &ServiceBeacon {
                    origin: nid(node),
                    sequence: 1,
                    offerings: vec![offering(1, node)],
                    energy_remaining: 1.0,
                },
                at,
            );
        }
        repo.evict_stale(3.2, 3.0);
        assert_eq!(repo.neighbor_count(), 1);
        assert_eq!(repo.matches(ServiceId(1))[0].0, nid(2));
    }

    #[test]
    fn beacon_sequence_strictly_increases() {
        let mut agent = DiscoveryAgent::new(nid(1), vec![offering(1, 10)]);
        let s1 = agent.next_beacon(1.0).sequence;
        let s2 = agent.next_beacon(0.9).sequence;
        assert!(s2 > s1);
    }

    #[test]
    fn handler_drops_duplicates() {
        let mut agent = DiscoveryAgent::new(nid(1), vec![]);
        let mut seq = 0;
        let pkt = split_request(&[ServiceId(1)], nid(0), 3, &mut seq).unwrap()[0]
            .transmitted_by(nid(0))
            .unwrap();
        let first = agent.handle_request(&pkt);
        assert!(!first.duplicate);
        let second = agent.handle_request(&pkt);
        assert!(second.duplicate);
        assert!(second.replies.is_empty());
        assert!(second.forward.is_none());
    }

    #[test]
    fn handler_replies_and_keeps_forwarding() {
        let mut agent = DiscoveryAgent::new(nid(1), vec![offering(7, 70)]);
        let mut seq = 0;
        let pkt = split_request(&[ServiceId(7)], nid(0), 3, &mut seq).unwrap()[0]
            .transmitted_by(nid(0))
            .unwrap();
        let d = agent.handle_request(&pkt);
        assert_eq!(d.replies.len(), 1);
        assert_eq!(d.replies[0].subject, nid(1));
        assert_eq!(d.replies[0].route, vec![nid(0), nid(1)]);
        assert!(d.replies[0].energy_snapshot.is_none());
        let fwd = d.forward.expect("budget remains, must forward");
        assert_eq!(fwd.ttl, pkt.ttl - 1);
        assert_eq!(fwd.route, vec![nid(0), nid(1)]);
    }

    #[test]
    fn handler_exhausted_budget_replies_without_forwarding() {
        let mut agent = DiscoveryAgent::new(nid(1), vec![offering(7, 70)]);
        let pkt = RequestPacket {
            request_id: RequestId {
                initiator: nid(0),
                sequence: 0,
            },
            service: ServiceId(7),
            ttl: 0,
            route: vec![nid(0)],
        };
        let d = agent.handle_request(&pkt);
        assert_eq!(d.replies.len(), 1);
        assert!(d.forward.is_none());
    }

    #[test]
    fn handler_answers_for_repository_neighbors() {
        let mut agent = DiscoveryAgent::new(nid(1), vec![]);
        agent.record_beacon(
            &ServiceBeacon {
                origin: nid(5),
                sequence: 1,
                offerings: vec![offering(7, 70)],
                energy_remaining: 0.42,
            },
            0.5,
        );
        let mut seq = 0;
        let pkt = split_request(&[ServiceId(7)], nid(0), 2, &mut seq).unwrap()[0]
            .transmitted_by(nid(0))
            .unwrap();
        let d = agent.handle_request(&pkt);
        assert_eq!(d.replies.len(), 1);
        let draft = &d.replies[0];
        assert_eq!(draft.subject, nid(5));
        assert_eq!(draft.route, vec![nid(0), nid(1), nid(5)]);
        assert_eq!(draft.energy_snapshot, Some(0.42));
    }

    #[test]
    fn initiator_pre_seeded_cache_drops_own_echo() {
        let mut agent = DiscoveryAgent::new(nid(0), vec![offering(7, 70)]);
        let mut seq = 0;
        let pkt = &split_request(&[ServiceId(7)], nid(0), 3, &mut seq).unwrap()[0];
        agent.note_own_request(pkt.request_id);
        let echo = pkt
            .transmitted_by(nid(0))
            .unwrap()
            .transmitted_by(nid(2))
            .unwrap();
        assert!(agent.handle_request(&echo).duplicate);
    }

    /// Deliver a flood synchronously over an adjacency list, breadth
    /// first, and return each node's disposition history plus how far the
    /// packet travelled.
    fn flood(
        adjacency: &[Vec<usize>],
        agents: &mut [DiscoveryAgent],
        initiator: usize,
        service: ServiceId,
        ttl: u32,
    ) -> (Vec<ReplyDraft>, Vec<Option<u32>>, u64) {
        let mut seq = 0;
        let pkt = split_request(&[service], agents[initiator].node(), ttl, &mut seq)
            .unwrap()
            .remove(0);
        agents[initiator].note_own_request(pkt.request_id);
        let mut transmissions = 0u64;
        let mut first_seen_hops: Vec<Option<u32>> = vec![None; agents.len()];
        first_seen_hops[initiator] = Some(0);
        let mut replies = Vec::new();
        let mut queue = std::collections::VecDeque::new();
        let wire = pkt.transmitted_by(agents[initiator].node()).unwrap();
        transmissions += 1;
        for &n in &adjacency[initiator] {
            queue.push_back((n, wire.clone()));
        }
        while let Some((at, pkt)) = queue.pop_front() {
            let d = agents[at].handle_request(&pkt);
            if !d.duplicate && first_seen_hops[at].is_none() {
                first_seen_hops[at] = Some(pkt.hop_count() + 1);
            }
            replies.extend(d.replies);
            if let Some(fwd) = d.forward {
                transmissions += 1;
                for &n in &adjacency[at] {
                    queue.push_back((n, fwd.clone()));
                }
            }
        }
        (replies, first_seen_hops, transmissions)
    }

    fn line_topology(n: usize) -> Vec<Vec<usize>> {
        (0..n)
            .map(|i| {
                let mut adj = Vec::new();
                if i > 0 {
                    adj.push(i - 1);
                }
                if i + 1 < n {
                    adj.push(i + 1);
                }
                adj
            })
            .collect()
    }

    #[test]
    fn three_node_line_hand_trace() {
        // nodes 0 - 1 - 2, both 1 and 2 host the service, budget 2:
        // node 1 gets ttl 1 (replies, forwards), node 2 gets ttl 0
        // (replies, stops). The initiator's echo is suppressed.
        let mut agents = vec![
            DiscoveryAgent::new(nid(0), vec![]),
            DiscoveryAgent::new(nid(1), vec![offering(7, 71)]),
            DiscoveryAgent::new(nid(2), vec![offering(7, 72)]),
        ];
        let adj = line_topology(3);
        let (replies, hops, transmissions) = flood(&adj, &mut agents, 0, ServiceId(7), 2);
        assert_eq!(replies.len(), 2);
        assert_eq!(replies[0].route, vec![nid(0), nid(1)]);
        assert_eq!(replies[1].route, vec![nid(0), nid(1), nid(2)]);
        assert_eq!(hops, vec![Some(0), Some(1), Some(2)]);
        assert_eq!(transmissions, 2);
    }

    #[test]
    fn collector_keeps_timely_replies_only() {
        let mut seq = 0;
        let reqs = split_request(&[ServiceId(1), ServiceId(2)], nid(0), 3, &mut seq).unwrap();
        let mut collector = ReplyCollector::new(&reqs, 10.0);
        let mk_reply = |req: &RequestPacket, provider: u32, at: f64| ReplyPacket {
            request_id: req.request_id,
            advertisement: ServiceAdvertisement {
                service: req.service,
                concrete: ConcreteServiceId(provider),
                provider: nid(provider),
                reported_by: nid(provider),
                qos: QosVector {
                    response_time: 0.5,
                    service_failure_rate: 0.1,
                    node_energy: 1.0,
                    node_reliability: 0.5,
                    hop_count: None,
                },
                route: vec![nid(0), nid(provider)],
                received_at: at,
            },
            reverse_route: vec![nid(provider), nid(0)],
        };
        assert_eq!(
            collector.accept(&mk_reply(&reqs[0], 1, 2.0), 2.0),
            AcceptOutcome::Accepted
        );
        assert_eq!(
            collector.accept(&mk_reply(&reqs[1], 2, 3.0), 3.0),
            AcceptOutcome::Accepted
        );
        assert_eq!(
            collector.accept(&mk_reply(&reqs[0], 3, 11.0), 11.0),
            AcceptOutcome::Late
        );
        assert_eq!(collector.late_count(), 1);
        assert_eq!(collector.advertisements().len(), 2);
    }

    #[test]
    fn collector_rejects_unknown_and_mismatched() {
        let mut seq = 0;
        let reqs = split_request(&[ServiceId(1)], nid(0), 3, &mut seq).unwrap();
        let mut collector = ReplyCollector::new(&reqs, 10.0);
        let mut reply = ReplyPacket {
            request_id: RequestId {
                initiator: nid(9),
                sequence: 99,
            },
            advertisement: ServiceAdvertisement {
                service: ServiceId(1),
                concrete: ConcreteServiceId(5),
                provider: nid(5),
                reported_by: nid(5),
                qos: QosVector {
                    response_time: 0.5,
                    service_failure_rate: 0.1,
                    node_energy: 1.0,
                    node_reliability: 0.5,
                    hop_count: None,
                },
                route: vec![nid(0), nid(5)],
                received_at: 1.0,
            },
            reverse_route: vec![nid(5), nid(0)],
        };
        assert_eq!(collector.accept(&reply, 1.0), AcceptOutcome::UnknownRequest);
        reply.request_id = reqs[0].request_id;
        reply.advertisement.service = ServiceId(2);
        assert_eq!(
            collector.accept(&reply, 1.0),
            AcceptOutcome::ServiceMismatch
        );
        assert!(collector.advertisements().is_empty());
    }

    #[test]
    fn collector_deduplicates_to_latest() {
        let mut seq = 0;
        let reqs = split_request(&[ServiceId(1)], nid(0), 3, &mut seq).unwrap();
        let mut collector = ReplyCollector::new(&reqs, 10.0);
        for (at, energy) in [(1.0, 0.9), (2.0, 0.4)] {
            let reply = ReplyPacket {
                request_id: reqs[0].request_id,
                advertisement: ServiceAdvertisement {
                    service: ServiceId(1),
                    concrete: ConcreteServiceId(5),
                    provider: nid(5),
                    reported_by: nid(5),
                    qos: QosVector {
                        response_time: 0.5,
                        service_failure_rate: 0.1,
                        node_energy: energy,
                        node_reliability: 0.5,
                        hop_count: None,
                    },
                    route: vec![nid(0), nid(5)],
                    received_at: at,
                },
                reverse_route: vec![nid(5), nid(0)],
            };
            collector.accept(&reply, at);
        }
        let ads = collector.advertisements();
        assert_eq!(ads.len(), 1);
        assert_eq!(ads[0].qos.node_energy, 0.4);
        assert_eq!(ads[0].received_at, 2.0);
    }

    proptest! {
        #[test]
        fn flood_reaches_exactly_the_budgeted_hops(
            n in 2usize..12,
            ttl in 1u32..8,
        ) {
            // on a line, the farthest node that ever sees the packet sits
            // exactly min(ttl, n-1) hops out, and nobody sees it farther
            let mut agents: Vec<DiscoveryAgent> =
                (0..n).map(|i| DiscoveryAgent::new(NodeId(i as u32), vec![])).collect();
            let adj = line_topology(n);
            let (_, hops, _) = flood(&adj, &mut agents, 0, ServiceId(1), ttl);
            let reach = ttl.min(n as u32 - 1);
            for (i, h) in hops.iter().enumerate() {
                if (i as u32) <= reach {
                    prop_assert_eq!(*h, Some(i as u32), "node {} should be reached", i);
                } else {
                    prop_assert_eq!(*h, None, "node {} is past the budget", i);
                }
            }
        }

        #[test]
        fn duplicate_suppression_bounds_transmissions(
            n in 2usize..10,
            ttl in 1u32..12,
        ) {
            // full mesh: worst case flooding still transmits at most once
            // per node
            let mut agents: Vec<DiscoveryAgent> =
                (0..n).map(|i| DiscoveryAgent::new(NodeId(i as u32), vec![])).collect();
            let adj: Vec<Vec<usize>> =
                (0..n).map(|i| (0..n).filter(|&j| j != i).collect()).collect();
            let (_, _, transmissions) = flood(&adj, &mut agents, 0, ServiceId(1), ttl);
            prop_assert!(transmissions <= n as u64);
        }

        #[test]
        fn every_offering_node_replies_exactly_once_when_budget_covers(
            n in 2usize..10,
            hosts in proptest::collection::btree_set(0usize..10, 1..5),
        ) {
            // line topology, ttl >= diameter, no repositories involved:
            // replies authored by hosts are exactly one per hosting node
            let hosts: BTreeSet<usize> = hosts.into_iter().filter(|h| *h < n && *h != 0).collect();
            let mut agents: Vec<DiscoveryAgent> = (0..n)
                .map(|i| {
                    let hosted = if hosts.contains(&i) { vec![offering(7, i as u32)] } else { vec![] };
                    DiscoveryAgent::new(NodeId(i as u32), hosted)
                })
                .collect();
            let adj = line_topology(n);
            let (replies, _, _) = flood(&adj, &mut agents, 0, ServiceId(7), n as u32);
            let authors: Vec<NodeId> = replies.iter().map(|r| r.subject).collect();
            let unique: BTreeSet<NodeId> = authors.iter().copied().collect();
            prop_assert_eq!(authors.len(), unique.len(), "one reply per offering node");
            let expected: BTreeSet<NodeId> =
                hosts.iter().map(|h| NodeId(*h as u32)).collect();
            prop_assert_eq!(unique, expected);
        }
    }
}
