//! The simulation engine: event loop, radio, protocol glue and the
//! composition life cycle.
//!
//! One run is a pure function of its configuration. All randomness comes
//! from per-purpose streams of a counter-based generator seeded from the
//! scenario seed, so two runs with the same configuration produce
//! byte-identical traces, and runs that differ only in the selection
//! method share node placement, mobility, service placement and the
//! misbehavior roster. The trace record list is the engine's only output;
//! metrics are computed from it alone.
//!
//! Conventions worth knowing when reading traces:
//!
//! * Stage indices run from 0; a stage equal to the plan length denotes
//!   the final result leg back to the initiator.
//! * Radio energy is charged per record: a `tx` or `rx` record's `energy`
//!   field is exactly what the node's battery lost at that moment, so a
//!   node's end-of-run `consumed` equals the sum over its radio records.
//! * A node that cannot afford a charge refuses it, dies, and the packet
//!   goes nowhere (`drop` with reason `energy`).
//! * Dead nodes keep moving: their carriers walk on, and the mobility
//!   stream stays aligned between runs whatever the radio traffic does.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::composition::{
    join_routes, select_providers, ProviderChoice, ServiceAdvertisement, TrustMatrix,
};
use crate::hammerstein::TrustScore;
use crate::discovery::{
    split_request, AcceptOutcome, DiscoveryAgent, ReplyCollector, ReplyDraft, ReplyPacket,
    RequestId, RequestPacket,
};
use crate::error::{Error, Result};
use crate::hammerstein::noise_sample;
use crate::qos::{rx_share, tx_share, EnergyAccount, EnergyParams, QosVector};
use crate::scenario::ScenarioConfig;
use crate::trace::{DropReason, FailureReason, PacketKind, TerminalReason, TraceRecord};
use crate::types::{Method, NodeId, Position, ServiceId, SimTime};

use super::event::{Delivery, EventKind, EventQueue, Payload};
use super::mobility::{draw_leg, mobility_step, MobilityState};
use super::node::SimNode;

fn idx(node: NodeId) -> usize {
    node.0 as usize
}

/// Independent random streams, one per concern. Setup draws come first on
/// each stream, in node id order, so the streams stay aligned across runs
/// that share a seed.
struct Streams {
    mobility: ChaCha8Rng,
    loss: ChaCha8Rng,
    misbehavior: ChaCha8Rng,
    noise: ChaCha8Rng,
    workload: ChaCha8Rng,
    execution: ChaCha8Rng,
}

fn stream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

const STREAM_PLACEMENT: u64 = 0;
const STREAM_MOBILITY: u64 = 1;
const STREAM_LOSS: u64 = 2;
const STREAM_MISBEHAVIOR: u64 = 3;
const STREAM_NOISE: u64 = 4;
const STREAM_WORKLOAD: u64 = 5;
const STREAM_SERVICE: u64 = 6;
const STREAM_EXECUTION: u64 = 7;

/// Supervision state of one executing attempt.
struct Execution {
    /// Discovery route to each stage's provider, initiator first.
    routes: Vec<Vec<NodeId>>,
    task_times: Vec<f64>,
    failure_rates: Vec<f64>,
    response_times: Vec<f64>,
    /// The stage currently in delivery or execution; the plan length means
    /// the result leg is in flight.
    stage: u32,
}

enum Phase {
    Collecting(ReplyCollector),
    Executing(Execution),
    Done,
}

/// One composite request from issue to resolution.
struct Composition {
    initiator: NodeId,
    attempt: u32,
    started_at: SimTime,
    phase: Phase,
}

/// Everything a finished run hands back.
pub struct RunOutput {
    pub records: Vec<TraceRecord>,
    /// Configuration hash, matching the trace's meta record.
    pub hash: String,
}

impl RunOutput {
    /// Write the trace to a file, one record per line.
    pub fn write_trace(&self, path: &std::path::Path) -> Result<()> {
        let mut writer = crate::trace::TraceWriter::create(path)?;
        for record in &self.records {
            writer.append(record)?;
        }
        writer.finish()
    }
}

/// Validate and simulate one scenario.
pub fn run_scenario(config: &ScenarioConfig) -> Result<RunOutput> {
    config.validate()?;
    let mut engine = Engine::new(config.clone());
    engine.run();
    Ok(engine.into_output())
}

pub(crate) struct Engine {
    config: ScenarioConfig,
    plan: Vec<ServiceId>,
    params: EnergyParams,
    nodes: Vec<SimNode>,
    queue: EventQueue,
    now: SimTime,
    records: Vec<TraceRecord>,
    streams: Streams,
    compositions: BTreeMap<u64, Composition>,
    /// Which composite each atomic request id belongs to.
    req_index: BTreeMap<RequestId, u64>,
    next_cmp: u64,
    /// The node every request starts from, fixed for the whole run.
    requester: u32,
}

impl Engine {
    pub(crate) fn new(config: ScenarioConfig) -> Engine {
        debug_assert!(config.validate().is_ok());
        let seed = config.seed;
        let params = config.energy.params();
        let plan = config.plan();
        let nodes = build_nodes(&config);
        let mut engine = Engine {
            plan,
            params,
            nodes,
            queue: EventQueue::new(),
            now: 0.0,
            records: Vec::new(),
            streams: Streams {
                mobility: stream(seed, STREAM_MOBILITY),
                loss: stream(seed, STREAM_LOSS),
                misbehavior: stream(seed, STREAM_MISBEHAVIOR),
                noise: stream(seed, STREAM_NOISE),
                workload: stream(seed, STREAM_WORKLOAD),
                execution: stream(seed, STREAM_EXECUTION),
            },
            compositions: BTreeMap::new(),
            req_index: BTreeMap::new(),
            next_cmp: 1,
            requester: 0,
            config,
        };
        engine.requester = match engine.config.workload.initiator {
            Some(id) => id,
            None => engine.streams.workload.gen_range(0..engine.config.nodes),
        };
        // the misbehavior stream serves both the setup roster and runtime
        // drop draws; when the roster was drawn in build_nodes from a
        // fresh stream, skip those draws here to stay aligned with it
        if engine.config.overrides.misbehaving.is_none() {
            for _ in 0..engine.config.nodes {
                let _: f64 = engine.streams.misbehavior.gen();
            }
        }
        if !engine.config.overrides.static_nodes {
            // the same applies to the initial waypoint draws
            for _ in 0..engine.config.nodes {
                draw_leg(
                    (engine.config.arena_width, engine.config.arena_height),
                    &engine.config.mobility,
                    &mut engine.streams.mobility,
                );
            }
        }

        engine.records.push(TraceRecord::Meta {
            time: 0.0,
            seed: engine.config.seed,
            method: engine.config.method,
            nodes: engine.config.nodes,
            duration: engine.config.duration,
            bin: engine.config.metrics.bin,
            hash: engine.config.hash(),
        });
        if !engine.config.overrides.static_nodes {
            engine
                .queue
                .schedule(engine.config.mobility.tick, EventKind::MobilityTick);
        }
        if engine.config.discovery.beacon_period > 0.0 {
            engine
                .queue
                .schedule(engine.config.discovery.beacon_period, EventKind::BeaconTick);
        }
        engine
            .queue
            .schedule(engine.config.workload.first_request, EventKind::IssueRequest);
        engine
    }

    pub(crate) fn run(&mut self) {
        while let Some(event) = self.queue.pop() {
            if event.time > self.config.duration {
                break;
            }
            debug_assert!(event.time >= self.now);
            self.now = event.time;
            match event.kind {
                EventKind::MobilityTick => self.on_mobility_tick(),
                EventKind::BeaconTick => self.on_beacon_tick(),
                EventKind::Delivery(delivery) => self.on_delivery(delivery),
                EventKind::CollectDeadline { cmp, attempt } => {
                    self.on_collect_deadline(cmp, attempt)
                }
                EventKind::IssueRequest => self.on_issue_request(),
                EventKind::StageComplete {
                    cmp,
                    attempt,
                    stage,
                } => self.on_stage_complete(cmp, attempt, stage),
                EventKind::StageDeadline {
                    cmp,
                    attempt,
                    stage,
                } => self.on_stage_deadline(cmp, attempt, stage),
            }
        }
    }

    pub(crate) fn into_output(mut self) -> RunOutput {
        let time = self.config.duration;
        for node in &self.nodes {
            self.records.push(TraceRecord::NodeSummary {
                time,
                node: node.id,
                initial: node.energy.initial,
                consumed: node.energy.consumed,
                alive: node.alive,
            });
        }
        RunOutput {
            records: self.records,
            hash: self.config.hash(),
        }
    }

    fn kind_of(&self, payload: &Payload) -> PacketKind {
        match payload {
            Payload::Beacon(_) => PacketKind::Beacon,
            Payload::Request(_) => PacketKind::Request,
            Payload::Reply { .. } => PacketKind::Reply,
            Payload::Handoff { stage, .. } => {
                if *stage as usize == self.plan.len() {
                    PacketKind::Result
                } else {
                    PacketKind::Handoff
                }
            }
        }
    }

    fn kill(&mut self, node: NodeId) {
        let n = &mut self.nodes[idx(node)];
        if !n.alive {
            return;
        }
        n.alive = false;
        self.records.push(TraceRecord::Death {
            time: self.now,
            node,
        });
    }

    fn observe(&mut self, observer: NodeId, subject: NodeId, forwarded: bool) {
        if !self.nodes[idx(observer)].alive {
            return;
        }
        self.nodes[idx(observer)].observe_peer(subject, forwarded);
        self.records.push(TraceRecord::Observation {
            time: self.now,
            observer,
            subject,
            forwarded,
        });
    }

    /// Put a packet on the air to every live node in range. The amplifier
    /// is driven at full configured range regardless of who is listening.
    fn broadcast(
        &mut self,
        sender: NodeId,
        payload: Payload,
        bits: u64,
        req: Option<RequestId>,
        cmp: Option<u64>,
        ttl: Option<u32>,
    ) -> bool {
        let kind = self.kind_of(&payload);
        if !self.nodes[idx(sender)].alive {
            self.records.push(TraceRecord::Drop {
                time: self.now,
                node: sender,
                pkt: kind,
                reason: DropReason::DeadTx,
                req,
                cmp,
            });
            return false;
        }
        let charge = tx_share(bits as f64, self.config.radio.range, &self.params);
        if !self.nodes[idx(sender)].energy.deplete(charge) {
            self.records.push(TraceRecord::Drop {
                time: self.now,
                node: sender,
                pkt: kind,
                reason: DropReason::Energy,
                req,
                cmp,
            });
            self.kill(sender);
            return false;
        }
        self.records.push(TraceRecord::Tx {
            time: self.now,
            node: sender,
            pkt: kind,
            bits,
            to: None,
            req,
            cmp,
            ttl,
            energy: charge,
        });
        let origin = self.nodes[idx(sender)].position;
        let arrival = self.now + self.config.radio.latency + bits as f64 / self.config.radio.bitrate;
        for j in 0..self.nodes.len() {
            if j == idx(sender) || !self.nodes[j].alive {
                continue;
            }
            if origin.distance_to(&self.nodes[j].position) > self.config.radio.range {
                continue;
            }
            self.queue.schedule(
                arrival,
                EventKind::Delivery(Delivery {
                    from: sender,
                    to: NodeId(j as u32),
                    bits,
                    payload: payload.clone(),
                }),
            );
        }
        true
    }

    /// Send one unicast leg. The amplifier is driven at the distance to
    /// the target at send time; range is re-checked at delivery.
    fn unicast(
        &mut self,
        sender: NodeId,
        to: NodeId,
        payload: Payload,
        bits: u64,
        req: Option<RequestId>,
        cmp: Option<u64>,
    ) -> bool {
        let kind = self.kind_of(&payload);
        if !self.nodes[idx(sender)].alive {
            self.records.push(TraceRecord::Drop {
                time: self.now,
                node: sender,
                pkt: kind,
                reason: DropReason::DeadTx,
                req,
                cmp,
            });
            return false;
        }
        let distance = self.nodes[idx(sender)]
            .position
            .distance_to(&self.nodes[idx(to)].position);
        let charge = tx_share(bits as f64, distance, &self.params);
        if !self.nodes[idx(sender)].energy.deplete(charge) {
            self.records.push(TraceRecord::Drop {
                time: self.now,
                node: sender,
                pkt: kind,
                reason: DropReason::Energy,
                req,
                cmp,
            });
            self.kill(sender);
            return false;
        }
        self.records.push(TraceRecord::Tx {
            time: self.now,
            node: sender,
            pkt: kind,
            bits,
            to: Some(to),
            req,
            cmp,
            ttl: None,
            energy: charge,
        });
        let arrival = self.now + self.config.radio.latency + bits as f64 / self.config.radio.bitrate;
        self.queue.schedule(
            arrival,
            EventKind::Delivery(Delivery {
                from: sender,
                to,
                bits,
                payload,
            }),
        );
        true
    }

    /// Forward a unicast payload through `via`, which just received it. A
    /// misbehaving relay discards it instead; either way the upstream node
    /// watches and records what happened.
    fn relay(
        &mut self,
        prev: NodeId,
        via: NodeId,
        next: NodeId,
        payload: Payload,
        bits: u64,
        req: Option<RequestId>,
        cmp: Option<u64>,
    ) -> bool {
        if self.nodes[idx(via)].misbehaving
            && self.streams.misbehavior.gen::<f64>()
                < self.config.misbehavior.relay_drop_probability
        {
            let kind = self.kind_of(&payload);
            self.records.push(TraceRecord::Drop {
                time: self.now,
                node: via,
                pkt: kind,
                reason: DropReason::Misbehavior,
                req,
                cmp,
            });
            self.observe(prev, via, false);
            return false;
        }
        let sent = self.unicast(via, next, payload, bits, req, cmp);
        if sent {
            self.observe(prev, via, true);
        }
        sent
    }

    fn on_mobility_tick(&mut self) {
        let arena = (self.config.arena_width, self.config.arena_height);
        let dt = self.config.mobility.tick;
        for node in &mut self.nodes {
            mobility_step(
                &mut node.position,
                &mut node.mobility,
                self.now,
                dt,
                arena,
                &self.config.mobility,
                &mut self.streams.mobility,
            );
        }
        self.queue.schedule(self.now + dt, EventKind::MobilityTick);
    }

    fn on_beacon_tick(&mut self) {
        let period = self.config.discovery.beacon_period;
        let horizon = self.config.discovery.staleness_periods * period;
        let bits = self.config.discovery.beacon_bits;
        for i in 0..self.nodes.len() {
            if !self.nodes[i].alive {
                continue;
            }
            self.nodes[i].agent.evict_stale(self.now, horizon);
            let remaining = self.nodes[i].energy.remaining();
            let beacon = self.nodes[i].agent.next_beacon(remaining);
            self.broadcast(
                NodeId(i as u32),
                Payload::Beacon(beacon),
                bits,
                None,
                None,
                None,
            );
        }
        self.queue.schedule(self.now + period, EventKind::BeaconTick);
    }

    fn on_issue_request(&mut self) {
        self.queue.schedule(
            self.now + self.config.workload.request_interval,
            EventKind::IssueRequest,
        );
        // probe upward from the run's requester for the next live node
        let initiator = (0..self.config.nodes)
            .map(|off| NodeId((self.requester + off) % self.config.nodes))
            .find(|id| self.nodes[idx(*id)].alive);
        let Some(initiator) = initiator else {
            return;
        };
        let cmp = self.next_cmp;
        self.next_cmp += 1;
        self.compositions.insert(
            cmp,
            Composition {
                initiator,
                attempt: 0,
                started_at: self.now,
                phase: Phase::Done,
            },
        );
        self.records.push(TraceRecord::ComposeAttempt {
            time: self.now,
            cmp,
            attempt: 0,
            initiator,
            plan: self.plan.clone(),
        });
        self.start_discovery(cmp);
    }

    /// Flood one request per plan service and start collecting replies.
    /// Callers guarantee the initiator is alive.
    fn start_discovery(&mut self, cmp: u64) {
        let comp = &self.compositions[&cmp];
        let initiator = comp.initiator;
        let attempt = comp.attempt;
        let ttl = self.config.discovery.ttl;
        let packets = split_request(
            &self.plan,
            initiator,
            ttl,
            &mut self.nodes[idx(initiator)].request_seq,
        )
        .expect("the validated plan is never empty");
        for packet in &packets {
            self.nodes[idx(initiator)]
                .agent
                .note_own_request(packet.request_id);
            self.req_index.insert(packet.request_id, cmp);
        }
        let deadline = self.now + self.config.discovery.collect_timeout;
        self.compositions.get_mut(&cmp).expect("indexed").phase =
            Phase::Collecting(ReplyCollector::new(&packets, deadline));
        self.queue
            .schedule(deadline, EventKind::CollectDeadline { cmp, attempt });
        let bits = self.config.discovery.request_bits;
        for packet in packets {
            let wire = packet
                .transmitted_by(initiator)
                .expect("fresh requests carry a positive hop budget");
            let req = wire.request_id;
            let wire_ttl = wire.ttl;
            self.broadcast(
                initiator,
                Payload::Request(wire),
                bits,
                Some(req),
                Some(cmp),
                Some(wire_ttl),
            );
        }
    }

    fn on_delivery(&mut self, delivery: Delivery) {
        let kind = self.kind_of(&delivery.payload);
        let req = match &delivery.payload {
            Payload::Request(p) => Some(p.request_id),
            Payload::Reply { packet, .. } => Some(packet.request_id),
            _ => None,
        };
        let cmp = match &delivery.payload {
            Payload::Handoff { cmp, .. } => Some(*cmp),
            _ => req.and_then(|r| self.req_index.get(&r).copied()),
        };
        let to = idx(delivery.to);
        if !self.nodes[to].alive {
            self.records.push(TraceRecord::Drop {
                time: self.now,
                node: delivery.to,
                pkt: kind,
                reason: DropReason::DeadRx,
                req,
                cmp,
            });
            self.payload_lost(&delivery.payload);
            return;
        }
        let distance = self.nodes[idx(delivery.from)]
            .position
            .distance_to(&self.nodes[to].position);
        if distance > self.config.radio.range {
            self.records.push(TraceRecord::Drop {
                time: self.now,
                node: delivery.to,
                pkt: kind,
                reason: DropReason::OutOfRange,
                req,
                cmp,
            });
            self.payload_lost(&delivery.payload);
            return;
        }
        if self.streams.loss.gen::<f64>() < self.config.radio.loss {
            self.records.push(TraceRecord::Drop {
                time: self.now,
                node: delivery.to,
                pkt: kind,
                reason: DropReason::Loss,
                req,
                cmp,
            });
            self.payload_lost(&delivery.payload);
            return;
        }
        // a misbehaving provider refuses work addressed to it: no
        // reception, no completion, and the stage deadline raises the
        // failure later
        if let Payload::Handoff { stage, walk, pos, .. } = &delivery.payload {
            if pos + 1 == walk.len()
                && (*stage as usize) < self.plan.len()
                && self.nodes[to].misbehaving
                && self.streams.misbehavior.gen::<f64>()
                    < self.config.misbehavior.drop_probability
            {
                self.records.push(TraceRecord::Drop {
                    time: self.now,
                    node: delivery.to,
                    pkt: kind,
                    reason: DropReason::Misbehavior,
                    req,
                    cmp,
                });
                return;
            }
        }
        let charge = rx_share(delivery.bits as f64, &self.params);
        if !self.nodes[to].energy.deplete(charge) {
            self.records.push(TraceRecord::Drop {
                time: self.now,
                node: delivery.to,
                pkt: kind,
                reason: DropReason::Energy,
                req,
                cmp,
            });
            self.kill(delivery.to);
            self.payload_lost(&delivery.payload);
            return;
        }
        let final_leg = match &delivery.payload {
            Payload::Beacon(_) | Payload::Request(_) => true,
            Payload::Reply { packet, pos } => pos + 1 == packet.reverse_route.len(),
            Payload::Handoff { walk, pos, .. } => pos + 1 == walk.len(),
        };
        self.records.push(TraceRecord::Rx {
            time: self.now,
            node: delivery.to,
            from: delivery.from,
            pkt: kind,
            bits: delivery.bits,
            req,
            cmp,
            final_leg,
            energy: charge,
        });
        match delivery.payload {
            Payload::Beacon(beacon) => self.nodes[to].agent.record_beacon(&beacon, self.now),
            Payload::Request(packet) => self.on_request(delivery.to, packet, cmp),
            Payload::Reply { packet, pos } => {
                self.on_reply(delivery.from, delivery.to, packet, pos, cmp)
            }
            Payload::Handoff {
                cmp,
                attempt,
                stage,
                walk,
                pos,
            } => self.on_handoff(delivery.from, delivery.to, cmp, attempt, stage, walk, pos),
        }
    }

    /// A dropped in-flight handoff breaks its composition's path.
    fn payload_lost(&mut self, payload: &Payload) {
        if let Payload::Handoff {
            cmp,
            attempt,
            stage,
            ..
        } = payload
        {
            self.leg_lost(*cmp, *attempt, *stage);
        }
    }

    fn on_request(&mut self, node: NodeId, packet: RequestPacket, cmp: Option<u64>) {
        let req = Some(packet.request_id);
        let disposition = self.nodes[idx(node)].agent.handle_request(&packet);
        if disposition.duplicate {
            self.records.push(TraceRecord::Drop {
                time: self.now,
                node,
                pkt: PacketKind::Request,
                reason: DropReason::Duplicate,
                req,
                cmp,
            });
            return;
        }
        for draft in disposition.replies {
            self.send_reply(node, draft, cmp);
        }
        match disposition.forward {
            Some(wire) => {
                let bits = self.config.discovery.request_bits;
                let wire_ttl = wire.ttl;
                self.broadcast(node, Payload::Request(wire), bits, req, cmp, Some(wire_ttl));
            }
            None => {
                self.records.push(TraceRecord::Drop {
                    time: self.now,
                    node,
                    pkt: PacketKind::Request,
                    reason: DropReason::TtlExhausted,
                    req,
                    cmp,
                });
            }
        }
    }

    /// Materialize a reply draft into an advertisement and send its first
    /// leg back toward the initiator.
    fn send_reply(&mut self, replier: NodeId, draft: ReplyDraft, cmp: Option<u64>) {
        let r = idx(replier);
        let per_hop = self.config.radio.latency
            + self.config.workload.handoff_bits as f64 / self.config.radio.bitrate;
        let transit = draft.route.len().saturating_sub(1) as f64 * per_hop;
        let reliability = self.nodes[r].reliability_of(draft.subject);
        let node_energy = draft
            .energy_snapshot
            .unwrap_or_else(|| self.nodes[r].energy.remaining());
        let advertisement = ServiceAdvertisement {
            service: draft.offering.service,
            concrete: draft.offering.concrete,
            provider: draft.subject,
            reported_by: replier,
            qos: QosVector {
                response_time: draft.offering.response_time + transit,
                service_failure_rate: draft.offering.failure_rate,
                node_energy,
                node_reliability: reliability,
                hop_count: None,
            },
            route: draft.route.clone(),
            received_at: 0.0,
        };
        let mut reverse_route = draft.route;
        if draft.subject != replier {
            reverse_route.pop();
        }
        reverse_route.reverse();
        debug_assert_eq!(reverse_route.first(), Some(&replier));
        if reverse_route.len() < 2 {
            return;
        }
        let next = reverse_route[1];
        let request_id = draft.request_id;
        let bits = self.config.discovery.reply_bits;
        let packet = ReplyPacket {
            request_id,
            advertisement,
            reverse_route,
        };
        self.unicast(
            replier,
            next,
            Payload::Reply { packet, pos: 1 },
            bits,
            Some(request_id),
            cmp,
        );
    }

    fn on_reply(
        &mut self,
        from: NodeId,
        to: NodeId,
        packet: ReplyPacket,
        pos: usize,
        cmp: Option<u64>,
    ) {
        debug_assert_eq!(packet.reverse_route.get(pos), Some(&to));
        let req = Some(packet.request_id);
        if pos + 1 == packet.reverse_route.len() {
            let mut accepted = false;
            if let Some(cmp) = cmp {
                if let Some(comp) = self.compositions.get_mut(&cmp) {
                    if let Phase::Collecting(collector) = &mut comp.phase {
                        let mut packet = packet;
                        packet.advertisement.received_at = self.now;
                        accepted =
                            collector.accept(&packet, self.now) == AcceptOutcome::Accepted;
                    }
                }
            }
            if !accepted {
                self.records.push(TraceRecord::Drop {
                    time: self.now,
                    node: to,
                    pkt: PacketKind::Reply,
                    reason: DropReason::Late,
                    req,
                    cmp,
                });
            }
            return;
        }
        let next = packet.reverse_route[pos + 1];
        let bits = self.config.discovery.reply_bits;
        self.relay(
            from,
            to,
            next,
            Payload::Reply {
                packet,
                pos: pos + 1,
            },
            bits,
            req,
            cmp,
        );
    }

    fn on_collect_deadline(&mut self, cmp: u64, attempt: u32) {
        let (initiator, advertisements) = {
            let Some(comp) = self.compositions.get(&cmp) else {
                return;
            };
            if comp.attempt != attempt {
                return;
            }
            let Phase::Collecting(collector) = &comp.phase else {
                return;
            };
            (comp.initiator, collector.advertisements())
        };
        let mut ads = advertisements;
        aggregate_witness_reliability(&mut ads);
        blend_own_reliability(&self.nodes[idx(initiator)], &mut ads);

        let choices = match self.config.method {
            Method::Proposed => {
                let spec = self.config.input_spec();
                let matrix = {
                    let variance = self.config.trust.model.noise_variance;
                    let noise_rng = &mut self.streams.noise;
                    TrustMatrix::from_advertisements(
                        &self.plan,
                        &ads,
                        &spec,
                        &self.config.trust.model,
                        || noise_sample(variance, noise_rng),
                    )
                    .expect("a validated model scores finite inputs")
                };
                self.records.push(TraceRecord::Matrix {
                    time: self.now,
                    cmp,
                    attempt,
                    data: matrix.encode(),
                });
                select_providers(&matrix)
            }
            Method::Baseline => baseline_choices(&self.plan, &ads),
        };
        let choices = match choices {
            Ok(choices) => choices,
            Err(Error::NoProvider { .. }) => {
                self.records.push(TraceRecord::ComposeFailed {
                    time: self.now,
                    cmp,
                    attempt,
                    reason: TerminalReason::NoProvider,
                });
                self.compositions.get_mut(&cmp).expect("indexed").phase = Phase::Done;
                return;
            }
            Err(other) => unreachable!("selection only fails for missing providers: {other}"),
        };

        let mut routes = Vec::with_capacity(choices.len());
        let mut task_times = Vec::with_capacity(choices.len());
        let mut failure_rates = Vec::with_capacity(choices.len());
        let mut response_times = Vec::with_capacity(choices.len());
        for choice in &choices {
            let ad = &ads[choice.ad_index.expect("scored cells keep their source")];
            routes.push(ad.route.clone());
            failure_rates.push(ad.qos.service_failure_rate);
            response_times.push(ad.qos.response_time);
            let task = self.nodes[idx(choice.node)]
                .agent
                .hosted()
                .iter()
                .find(|o| o.concrete == ad.concrete)
                .expect("advertised services exist at their provider")
                .task_time;
            task_times.push(task);
        }
        let path: Vec<NodeId> = choices.iter().map(|c| c.node).collect();
        self.records.push(TraceRecord::PathSelected {
            time: self.now,
            cmp,
            attempt,
            nodes: path,
        });
        self.compositions.get_mut(&cmp).expect("indexed").phase = Phase::Executing(Execution {
            routes,
            task_times,
            failure_rates,
            response_times,
            stage: 0,
        });
        self.dispatch_stage(cmp);
    }

    /// Send the walk feeding the composition's current stage (or the final
    /// result leg), and arm its supervision deadline.
    fn dispatch_stage(&mut self, cmp: u64) {
        let plan_len = self.plan.len();
        let (initiator, attempt, stage, walk, task, budget) = {
            let comp = &self.compositions[&cmp];
            let Phase::Executing(exec) = &comp.phase else {
                return;
            };
            let s = exec.stage as usize;
            let walk = if s == 0 {
                exec.routes[0].clone()
            } else if s < plan_len {
                join_routes(&exec.routes[s - 1], &exec.routes[s])
                    .expect("routes of one collection share the initiator")
            } else {
                let mut back = exec.routes[plan_len - 1].clone();
                back.reverse();
                back
            };
            let task = exec.task_times.get(s).copied();
            let budget = exec.response_times.get(s).copied().unwrap_or(0.0);
            (comp.initiator, comp.attempt, exec.stage, walk, task, budget)
        };
        debug_assert_eq!(walk.last(), {
            let comp = &self.compositions[&cmp];
            if let Phase::Executing(exec) = &comp.phase {
                if (stage as usize) < plan_len {
                    exec.routes[stage as usize].last()
                } else {
                    Some(&initiator)
                }
            } else {
                None
            }
        });
        let per_hop = self.config.radio.latency
            + self.config.workload.handoff_bits as f64 / self.config.radio.bitrate;
        let transit = walk.len().saturating_sub(1) as f64 * per_hop;
        let deadline =
            self.now + self.config.workload.stage_timeout_factor * (budget + transit);

        if walk.len() == 1 {
            if stage as usize == plan_len {
                // the last provider is the initiator itself
                self.complete_composition(cmp, attempt);
                return;
            }
            // the provider already holds the data; execution starts now
            let task = task.expect("stages below the plan length have a task");
            self.queue.schedule(
                self.now + task,
                EventKind::StageComplete {
                    cmp,
                    attempt,
                    stage,
                },
            );
            self.queue.schedule(
                deadline,
                EventKind::StageDeadline {
                    cmp,
                    attempt,
                    stage,
                },
            );
            return;
        }

        self.queue.schedule(
            deadline,
            EventKind::StageDeadline {
                cmp,
                attempt,
                stage,
            },
        );
        let bits = self.config.workload.handoff_bits;
        let sent = self.unicast(
            walk[0],
            walk[1],
            Payload::Handoff {
                cmp,
                attempt,
                stage,
                walk: walk.clone(),
                pos: 1,
            },
            bits,
            None,
            Some(cmp),
        );
        if !sent {
            self.leg_lost(cmp, attempt, stage);
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn on_handoff(
        &mut self,
        _from: NodeId,
        to: NodeId,
        cmp: u64,
        attempt: u32,
        stage: u32,
        walk: Vec<NodeId>,
        pos: usize,
    ) {
        if pos + 1 < walk.len() {
            let next = walk[pos + 1];
            let bits = self.config.workload.handoff_bits;
            let sent = self.relay(
                _from,
                to,
                next,
                Payload::Handoff {
                    cmp,
                    attempt,
                    stage,
                    walk,
                    pos: pos + 1,
                },
                bits,
                None,
                Some(cmp),
            );
            if !sent {
                self.leg_lost(cmp, attempt, stage);
            }
            return;
        }
        let plan_len = self.plan.len() as u32;
        let kind = if stage == plan_len {
            PacketKind::Result
        } else {
            PacketKind::Handoff
        };
        let mut task: Option<f64> = None;
        let mut current = false;
        if let Some(comp) = self.compositions.get(&cmp) {
            if comp.attempt == attempt {
                if let Phase::Executing(exec) = &comp.phase {
                    if exec.stage == stage {
                        current = true;
                        if stage < plan_len {
                            task = Some(exec.task_times[stage as usize]);
                        }
                    }
                }
            }
        }
        if !current {
            self.records.push(TraceRecord::Drop {
                time: self.now,
                node: to,
                pkt: kind,
                reason: DropReason::Late,
                req: None,
                cmp: Some(cmp),
            });
            return;
        }
        if stage == plan_len {
            self.complete_composition(cmp, attempt);
            return;
        }
        let task = task.expect("a current non-final stage has a task");
        self.queue.schedule(
            self.now + task,
            EventKind::StageComplete {
                cmp,
                attempt,
                stage,
            },
        );
    }

    /// The result reached the initiator: record the success, credit every
    /// stage provider in the initiator's reputation book, and retire the
    /// composition.
    fn complete_composition(&mut self, cmp: u64, attempt: u32) {
        let (initiator, started_at, providers) = {
            let comp = &self.compositions[&cmp];
            let Phase::Executing(exec) = &comp.phase else {
                return;
            };
            let providers: Vec<NodeId> = exec
                .routes
                .iter()
                .map(|route| *route.last().expect("discovery routes are never empty"))
                .collect();
            (comp.initiator, comp.started_at, providers)
        };
        self.records.push(TraceRecord::ComposeSuccess {
            time: self.now,
            cmp,
            attempt,
            elapsed: self.now - started_at,
        });
        self.compositions.get_mut(&cmp).expect("indexed").phase = Phase::Done;
        for provider in providers {
            if provider != initiator {
                self.observe(initiator, provider, true);
            }
        }
    }

    fn on_stage_complete(&mut self, cmp: u64, attempt: u32, stage: u32) {
        let (failure_rate, task_time, provider) = {
            let Some(comp) = self.compositions.get(&cmp) else {
                return;
            };
            if comp.attempt != attempt {
                return;
            }
            let Phase::Executing(exec) = &comp.phase else {
                return;
            };
            if exec.stage != stage {
                return;
            }
            let route = &exec.routes[stage as usize];
            (
                exec.failure_rates[stage as usize],
                exec.task_times[stage as usize],
                *route.last().expect("discovery routes are never empty"),
            )
        };
        // a provider that died mid-task finishes nothing
        if !self.nodes[idx(provider)].alive {
            return;
        }
        // the service fails one invocation with the probability implied by
        // its advertised failure rate over the task duration; a failed
        // stage stays silent and the deadline raises it
        let failure_probability = 1.0 - (-failure_rate * task_time).exp();
        if self.streams.execution.gen::<f64>() < failure_probability {
            return;
        }
        if let Some(comp) = self.compositions.get_mut(&cmp) {
            if let Phase::Executing(exec) = &mut comp.phase {
                exec.stage = stage + 1;
            }
        }
        self.dispatch_stage(cmp);
    }

    fn on_stage_deadline(&mut self, cmp: u64, attempt: u32, stage: u32) {
        let blamed = {
            let Some(comp) = self.compositions.get(&cmp) else {
                return;
            };
            if comp.attempt != attempt {
                return;
            }
            let Phase::Executing(exec) = &comp.phase else {
                return;
            };
            if exec.stage != stage {
                return;
            }
            // a silent stage is on its provider: refusal, a failed task or
            // death all look the same from the initiator's chair
            exec.routes
                .get(stage as usize)
                .map(|route| *route.last().expect("discovery routes are never empty"))
                .filter(|provider| *provider != comp.initiator)
        };
        let initiator = self.compositions[&cmp].initiator;
        self.records.push(TraceRecord::PathFailure {
            time: self.now,
            cmp,
            attempt,
            stage: Some(stage),
            reason: FailureReason::StageTimeout,
        });
        if let Some(provider) = blamed {
            self.observe(initiator, provider, false);
        }
        self.recompose(cmp);
    }

    /// An in-flight handoff for (cmp, attempt) went nowhere. Recorded once
    /// per attempt: recomposing bumps the attempt, so stale losses fall
    /// through the attempt check.
    fn leg_lost(&mut self, cmp: u64, attempt: u32, stage: u32) {
        let current = {
            let Some(comp) = self.compositions.get(&cmp) else {
                return;
            };
            comp.attempt == attempt && matches!(comp.phase, Phase::Executing(_))
        };
        if !current {
            return;
        }
        self.records.push(TraceRecord::PathFailure {
            time: self.now,
            cmp,
            attempt,
            stage: Some(stage),
            reason: FailureReason::LegLost,
        });
        self.recompose(cmp);
    }

    /// After a path failure: re-run discovery if the budget and the
    /// initiator allow, otherwise abandon the request.
    fn recompose(&mut self, cmp: u64) {
        let (attempt, initiator) = {
            let comp = self.compositions.get(&cmp).expect("failure paths index");
            (comp.attempt, comp.initiator)
        };
        let next = attempt + 1;
        if next > self.config.workload.max_recompositions {
            self.records.push(TraceRecord::ComposeFailed {
                time: self.now,
                cmp,
                attempt,
                reason: TerminalReason::MaxRecompositions,
            });
            self.compositions.get_mut(&cmp).expect("indexed").phase = Phase::Done;
            return;
        }
        self.compositions.get_mut(&cmp).expect("indexed").attempt = next;
        self.records.push(TraceRecord::Recompose {
            time: self.now,
            cmp,
            attempt: next,
        });
        if !self.nodes[idx(initiator)].alive {
            self.records.push(TraceRecord::ComposeFailed {
                time: self.now,
                cmp,
                attempt: next,
                reason: TerminalReason::InitiatorDead,
            });
            self.compositions.get_mut(&cmp).expect("indexed").phase = Phase::Done;
            return;
        }
        self.records.push(TraceRecord::ComposeAttempt {
            time: self.now,
            cmp,
            attempt: next,
            initiator,
            plan: self.plan.clone(),
        });
        self.start_discovery(cmp);
    }
}

/// Build every node from the setup streams (or the configured overrides),
/// drawing in node id order: position and battery from the placement
/// stream, then services, then the misbehavior roster, then initial
/// waypoints.
fn build_nodes(config: &ScenarioConfig) -> Vec<SimNode> {
    let n = config.nodes as usize;
    let mut placement = stream(config.seed, STREAM_PLACEMENT);
    let mut positions = Vec::with_capacity(n);
    let mut energies = Vec::with_capacity(n);
    for i in 0..n {
        let position = match &config.overrides.positions {
            Some(list) => Position::new(list[i][0], list[i][1]),
            None => Position::new(
                placement.gen_range(0.0..=config.arena_width),
                placement.gen_range(0.0..=config.arena_height),
            ),
        };
        let energy = match config.overrides.initial_energy {
            Some(fixed) => fixed,
            None => placement.gen_range(config.energy.initial_min..=config.energy.initial_max),
        };
        positions.push(position);
        energies.push(energy);
    }

    let mut hosted: Vec<Vec<crate::discovery::ServiceOffering>> = vec![Vec::new(); n];
    match &config.overrides.hosted {
        Some(lists) => {
            for (i, list) in lists.iter().enumerate() {
                for h in list {
                    hosted[i].push(crate::discovery::ServiceOffering {
                        service: ServiceId(h.service),
                        concrete: crate::types::ConcreteServiceId(h.concrete),
                        response_time: h.task_time + config.services.overhead,
                        failure_rate: h.failure_rate,
                        task_time: h.task_time,
                    });
                }
            }
        }
        None => {
            let mut service_rng = stream(config.seed, STREAM_SERVICE);
            for concrete in 0..config.services.concrete_count {
                let node = service_rng.gen_range(0..config.nodes) as usize;
                let service = service_rng.gen_range(1..=config.workload.plan_size);
                let task_time = service_rng
                    .gen_range(config.services.task_time_min..=config.services.task_time_max);
                let failure_rate = service_rng.gen_range(
                    config.services.failure_rate_min..=config.services.failure_rate_max,
                );
                hosted[node].push(crate::discovery::ServiceOffering {
                    service: ServiceId(service),
                    concrete: crate::types::ConcreteServiceId(concrete),
                    response_time: task_time + config.services.overhead,
                    failure_rate,
                    task_time,
                });
            }
        }
    }

    let misbehaving: Vec<bool> = match &config.overrides.misbehaving {
        Some(ids) => {
            let mut flags = vec![false; n];
            for id in ids {
                flags[*id as usize] = true;
            }
            flags
        }
        None => {
            let mut roster = stream(config.seed, STREAM_MISBEHAVIOR);
            (0..n)
                .map(|_| roster.gen::<f64>() < config.misbehavior.fraction)
                .collect()
        }
    };

    let mobility_states: Vec<MobilityState> = if config.overrides.static_nodes {
        vec![
            MobilityState::Paused {
                until: f64::INFINITY
            };
            n
        ]
    } else {
        let mut mobility = stream(config.seed, STREAM_MOBILITY);
        (0..n)
            .map(|_| {
                draw_leg(
                    (config.arena_width, config.arena_height),
                    &config.mobility,
                    &mut mobility,
                )
            })
            .collect()
    };

    (0..n)
        .map(|i| {
            let id = NodeId(i as u32);
            SimNode {
                id,
                position: positions[i],
                mobility: mobility_states[i],
                energy: EnergyAccount::new(energies[i]),
                alive: true,
                misbehaving: misbehaving[i],
                agent: DiscoveryAgent::new(id, hosted[i].clone()),
                trackers: BTreeMap::new(),
                request_seq: 0,
            }
        })
        .collect()
}

/// Replace every advertisement's reliability with the mean of what the
/// subject's witnesses report, so a node cannot mask a bad reputation by
/// advertising itself. Subjects nobody vouches for keep the neutral prior
/// their self-report carries.
fn aggregate_witness_reliability(ads: &mut [ServiceAdvertisement]) {
    let mut sums: BTreeMap<NodeId, (f64, u32)> = BTreeMap::new();
    for ad in ads.iter() {
        if ad.reported_by != ad.provider {
            let entry = sums.entry(ad.provider).or_insert((0.0, 0));
            entry.0 += ad.qos.node_reliability;
            entry.1 += 1;
        }
    }
    for ad in ads.iter_mut() {
        if let Some((sum, count)) = sums.get(&ad.provider) {
            ad.qos.node_reliability = sum / f64::from(*count);
        }
    }
}

/// Re-centers each advertisement's reliability on the requester's own
/// observation history: the pooled witness value enters as a Beta prior of
/// strength two, the requester's direct success and failure counts as data.
fn blend_own_reliability(requester: &SimNode, ads: &mut [ServiceAdvertisement]) {
    const WITNESS_PRIOR_STRENGTH: f64 = 2.0;
    for ad in ads.iter_mut() {
        if let Some(tracker) = requester.trackers.get(&ad.provider) {
            let witness_mean = ad.qos.node_reliability;
            ad.qos.node_reliability = (tracker.alpha() + WITNESS_PRIOR_STRENGTH * witness_mean)
                / (tracker.alpha() + tracker.beta() + WITNESS_PRIOR_STRENGTH);
        }
    }
}

/// The non-optimizing selection: the first reply received per service,
/// ties broken by hop count, then provider id, then concrete id.
fn baseline_choices(
    plan: &[ServiceId],
    ads: &[ServiceAdvertisement],
) -> Result<Vec<ProviderChoice>> {
    let mut choices = Vec::with_capacity(plan.len());
    for service in plan {
        let best = ads
            .iter()
            .enumerate()
            .filter(|(_, ad)| ad.service == *service)
            .min_by(|(_, a), (_, b)| {
                a.received_at
                    .total_cmp(&b.received_at)
                    .then_with(|| a.hop_count().cmp(&b.hop_count()))
                    .then_with(|| a.provider.cmp(&b.provider))
                    .then_with(|| a.concrete.cmp(&b.concrete))
            });
        let Some((index, ad)) = best else {
            return Err(Error::NoProvider { service: *service });
        };
        choices.push(ProviderChoice {
            service: *service,
            node: ad.provider,
            trust: TrustScore::clamped(0.0),
            ad_index: Some(index),
        });
    }
    Ok(choices)
}
