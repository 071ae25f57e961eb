//! The discrete event queue.
//!
//! Events pop in (time, insertion order) order: ties in time resolve to
//! whichever event was scheduled first, so a run is a pure function of the
//! configuration and seed with no dependence on float tie luck.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::discovery::{ReplyPacket, RequestPacket, ServiceBeacon};
use crate::types::{NodeId, SimTime};

/// A packet in flight between two nodes.
#[derive(Debug, Clone)]
pub struct Delivery {
    pub from: NodeId,
    pub to: NodeId,
    pub bits: u64,
    pub payload: Payload,
}

/// What the delivery carries.
#[derive(Debug, Clone)]
pub enum Payload {
    Beacon(ServiceBeacon),
    Request(RequestPacket),
    /// A discovery reply walking its reverse route; `pos` indexes the
    /// receiving node within it.
    Reply { packet: ReplyPacket, pos: usize },
    /// An execution message walking between consecutive providers. `stage`
    /// equal to the plan length marks the final result leg back to the
    /// initiator.
    Handoff {
        cmp: u64,
        attempt: u32,
        stage: u32,
        walk: Vec<NodeId>,
        pos: usize,
    },
}

/// Everything that can fire.
#[derive(Debug, Clone)]
pub enum EventKind {
    /// Advance every node along its waypoint trajectory.
    MobilityTick,
    /// Every live node evicts stale repository entries and broadcasts a
    /// beacon.
    BeaconTick,
    /// A packet arrives (or fails to).
    Delivery(Delivery),
    /// The initiator stops collecting replies and composes.
    CollectDeadline { cmp: u64, attempt: u32 },
    /// A new composite request enters the system.
    IssueRequest,
    /// A provider finishes executing its stage.
    StageComplete { cmp: u64, attempt: u32, stage: u32 },
    /// Supervision timer for one stage of one attempt.
    StageDeadline { cmp: u64, attempt: u32, stage: u32 },
}

#[derive(Debug)]
pub struct SimEvent {
    pub time: SimTime,
    pub seq: u64,
    pub kind: EventKind,
}

impl PartialEq for SimEvent {
    fn eq(&self, other: &Self) -> bool {
        self.time == other.time && self.seq == other.seq
    }
}

impl Eq for SimEvent {}

impl PartialOrd for SimEvent {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for SimEvent {
    fn cmp(&self, other: &Self) -> Ordering {
        // reversed: the BinaryHeap is a max-heap and we want the earliest
        // event on top
        other
            .time
            .total_cmp(&self.time)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

/// Time-ordered event queue with FIFO tie breaking.
#[derive(Debug, Default)]
pub struct EventQueue {
    heap: BinaryHeap<SimEvent>,
    next_seq: u64,
}

impl EventQueue {
    pub fn new() -> Self {
        EventQueue::default()
    }

    pub fn schedule(&mut self, time: SimTime, kind: EventKind) {
        debug_assert!(time.is_finite());
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(SimEvent { time, seq, kind });
    }

    pub fn pop(&mut self) -> Option<SimEvent> {
        self.heap.pop()
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn events_pop_in_time_order() {
        let mut q = EventQueue::new();
        q.schedule(3.0, EventKind::MobilityTick);
        q.schedule(1.0, EventKind::BeaconTick);
        q.schedule(2.0, EventKind::IssueRequest);
        let times: Vec<f64> = std::iter::from_fn(|| q.pop()).map(|e| e.time).collect();
        assert_eq!(times, vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn simultaneous_events_pop_in_schedule_order() {
        let mut q = EventQueue::new();
        for i in 0..20 {
            q.schedule(
                5.0,
                EventKind::StageComplete {
                    cmp: i,
                    attempt: 0,
                    stage: 0,
                },
            );
        }
        let cmps: Vec<u64> = std::iter::from_fn(|| q.pop())
            .map(|e| match e.kind {
                EventKind::StageComplete { cmp, .. } => cmp,
                _ => unreachable!(),
            })
            .collect();
        assert_eq!(cmps, (0..20).collect::<Vec<_>>());
    }

    #[test]
    fn interleaved_times_keep_fifo_within_each_time() {
        let mut q = EventQueue::new();
        q.schedule(2.0, EventKind::IssueRequest);
        q.schedule(1.0, EventKind::MobilityTick);
        q.schedule(2.0, EventKind::BeaconTick);
        let mut order = Vec::new();
        while let Some(e) = q.pop() {
            order.push((e.time, e.seq));
        }
        assert_eq!(order, vec![(1.0, 1), (2.0, 0), (2.0, 2)]);
    }
}
