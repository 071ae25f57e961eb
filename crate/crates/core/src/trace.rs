//! Line-oriented run trace.
//!
//! Every radio, protocol and composition event is appended as one line of
//! the form `t=<seconds> ev=<kind> key=value ...`, keys in a fixed order
//! per kind, floats printed in shortest round-trip form. The format parses
//! back losslessly: metric computation reads the trace file, never the
//! in-memory run, so replaying a trace reproduces the original report
//! exactly.
//!
//! Record kinds:
//!
//! | kind              | meaning                                             |
//! |-------------------|-----------------------------------------------------|
//! | `meta`            | run header: seed, method, node count, duration, bin |
//! | `tx`              | a node put a packet on the air                      |
//! | `rx`              | a packet was delivered to a node                    |
//! | `drop`            | a packet went nowhere, with the reason              |
//! | `obs`             | a forwarding observation (offered vs forwarded)     |
//! | `death`           | a node ran out of energy                            |
//! | `compose_attempt` | one composition attempt started                     |
//! | `matrix`          | the scored trust matrix for an attempt              |
//! | `path`            | the provider path selected for an attempt           |
//! | `path_failure`    | an executing path broke                             |
//! | `recompose`       | the initiator restarts discovery after a failure    |
//! | `compose_success` | the composite result returned to the initiator      |
//! | `compose_failed`  | the request was abandoned, with the reason          |
//! | `node`            | end-of-run per-node energy summary                  |

use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use crate::discovery::RequestId;
use crate::error::{Error, Result};
use crate::types::{Method, NodeId, ServiceId, SimTime};

/// What kind of packet a radio event concerns.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PacketKind {
    Beacon,
    Request,
    Reply,
    Handoff,
    Result,
}

impl fmt::Display for PacketKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            PacketKind::Beacon => "beacon",
            PacketKind::Request => "request",
            PacketKind::Reply => "reply",
            PacketKind::Handoff => "handoff",
            PacketKind::Result => "result",
        };
        f.write_str(s)
    }
}

impl FromStr for PacketKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "beacon" => PacketKind::Beacon,
            "request" => PacketKind::Request,
            "reply" => PacketKind::Reply,
            "handoff" => PacketKind::Handoff,
            "result" => PacketKind::Result,
            other => return Err(Error::invalid(format!("unknown packet kind: {other}"))),
        })
    }
}

/// Why a packet went nowhere.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DropReason {
    /// Random radio loss at delivery time.
    Loss,
    /// Receiver moved out of range before delivery.
    OutOfRange,
    /// Request already processed by this node.
    Duplicate,
    /// Hop budget exhausted, not forwarded.
    TtlExhausted,
    /// Sender was dead when the send fired.
    DeadTx,
    /// Receiver was dead at delivery time.
    DeadRx,
    /// Sender lacked the energy to transmit.
    Energy,
    /// A misbehaving relay discarded a payload it should have forwarded.
    Misbehavior,
    /// Reply arrived after the collection deadline.
    Late,
}

impl fmt::Display for DropReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            DropReason::Loss => "loss",
            DropReason::OutOfRange => "out_of_range",
            DropReason::Duplicate => "duplicate",
            DropReason::TtlExhausted => "ttl",
            DropReason::DeadTx => "dead_tx",
            DropReason::DeadRx => "dead_rx",
            DropReason::Energy => "energy",
            DropReason::Misbehavior => "misbehavior",
            DropReason::Late => "late",
        };
        f.write_str(s)
    }
}

impl FromStr for DropReason {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "loss" => DropReason::Loss,
            "out_of_range" => DropReason::OutOfRange,
            "duplicate" => DropReason::Duplicate,
            "ttl" => DropReason::TtlExhausted,
            "dead_tx" => DropReason::DeadTx,
            "dead_rx" => DropReason::DeadRx,
            "energy" => DropReason::Energy,
            "misbehavior" => DropReason::Misbehavior,
            "late" => DropReason::Late,
            other => return Err(Error::invalid(format!("unknown drop reason: {other}"))),
        })
    }
}

/// How an executing path broke.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FailureReason {
    /// A handoff leg was lost in flight.
    LegLost,
    /// The stage deadline expired with no completion.
    StageTimeout,
}

impl fmt::Display for FailureReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            FailureReason::LegLost => "leg_lost",
            FailureReason::StageTimeout => "stage_timeout",
        };
        f.write_str(s)
    }
}

impl FromStr for FailureReason {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "leg_lost" => FailureReason::LegLost,
            "stage_timeout" => FailureReason::StageTimeout,
            other => return Err(Error::invalid(format!("unknown failure reason: {other}"))),
        })
    }
}

/// Why a composite request was abandoned for good.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TerminalReason {
    /// Some abstract service drew no candidates at all.
    NoProvider,
    /// The recomposition budget ran out.
    MaxRecompositions,
    /// The initiator itself died.
    InitiatorDead,
}

impl fmt::Display for TerminalReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            TerminalReason::NoProvider => "no_provider",
            TerminalReason::MaxRecompositions => "max_recompositions",
            TerminalReason::InitiatorDead => "initiator_dead",
        };
        f.write_str(s)
    }
}

impl FromStr for TerminalReason {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "no_provider" => TerminalReason::NoProvider,
            "max_recompositions" => TerminalReason::MaxRecompositions,
            "initiator_dead" => TerminalReason::InitiatorDead,
            other => return Err(Error::invalid(format!("unknown terminal reason: {other}"))),
        })
    }
}

/// One trace line, fully typed.
#[derive(Debug, Clone, PartialEq)]
pub enum TraceRecord {
    Meta {
        time: SimTime,
        seed: u64,
        method: Method,
        nodes: u32,
        duration: f64,
        bin: f64,
        hash: String,
    },
    Tx {
        time: SimTime,
        node: NodeId,
        pkt: PacketKind,
        bits: u64,
        /// Unicast target; a broadcast has none.
        to: Option<NodeId>,
        req: Option<RequestId>,
        cmp: Option<u64>,
        ttl: Option<u32>,
        energy: f64,
    },
    Rx {
        time: SimTime,
        node: NodeId,
        from: NodeId,
        pkt: PacketKind,
        bits: u64,
        req: Option<RequestId>,
        cmp: Option<u64>,
        /// The delivery completed the packet's whole journey, not just one
        /// relay leg.
        final_leg: bool,
        energy: f64,
    },
    Drop {
        time: SimTime,
        node: NodeId,
        pkt: PacketKind,
        reason: DropReason,
        req: Option<RequestId>,
        cmp: Option<u64>,
    },
    Observation {
        time: SimTime,
        observer: NodeId,
        subject: NodeId,
        forwarded: bool,
    },
    Death {
        time: SimTime,
        node: NodeId,
    },
    ComposeAttempt {
        time: SimTime,
        cmp: u64,
        attempt: u32,
        initiator: NodeId,
        plan: Vec<ServiceId>,
    },
    Matrix {
        time: SimTime,
        cmp: u64,
        attempt: u32,
        data: String,
    },
    PathSelected {
        time: SimTime,
        cmp: u64,
        attempt: u32,
        nodes: Vec<NodeId>,
    },
    PathFailure {
        time: SimTime,
        cmp: u64,
        attempt: u32,
        stage: Option<u32>,
        reason: FailureReason,
    },
    Recompose {
        time: SimTime,
        cmp: u64,
        attempt: u32,
    },
    ComposeSuccess {
        time: SimTime,
        cmp: u64,
        attempt: u32,
        elapsed: f64,
    },
    ComposeFailed {
        time: SimTime,
        cmp: u64,
        attempt: u32,
        reason: TerminalReason,
    },
    NodeSummary {
        time: SimTime,
        node: NodeId,
        initial: f64,
        consumed: f64,
        alive: bool,
    },
}

impl TraceRecord {
    pub fn time(&self) -> SimTime {
        match self {
            TraceRecord::Meta { time, .. }
            | TraceRecord::Tx { time, .. }
            | TraceRecord::Rx { time, .. }
            | TraceRecord::Drop { time, .. }
            | TraceRecord::Observation { time, .. }
            | TraceRecord::Death { time, .. }
            | TraceRecord::ComposeAttempt { time, .. }
            | TraceRecord::Matrix { time, .. }
            | TraceRecord::PathSelected { time, .. }
            | TraceRecord::PathFailure { time, .. }
            | TraceRecord::Recompose { time, .. }
            | TraceRecord::ComposeSuccess { time, .. }
            | TraceRecord::ComposeFailed { time, .. }
            | TraceRecord::NodeSummary { time, .. } => *time,
        }
    }
}

fn join_csv<T: fmt::Display>(items: &[T]) -> String {
    items
        .iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

impl fmt::Display for TraceRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TraceRecord::Meta {
                time,
                seed,
                method,
                nodes,
                duration,
                bin,
                hash,
            } => write!(
                f,
                "t={time} ev=meta seed={seed} method={method} nodes={nodes} duration={duration} bin={bin} hash={hash}"
            ),
            TraceRecord::Tx {
                time,
                node,
                pkt,
                bits,
                to,
                req,
                cmp,
                ttl,
                energy,
            } => {
                write!(f, "t={time} ev=tx node={node} pkt={pkt} bits={bits}")?;
                if let Some(to) = to {
                    write!(f, " to={to}")?;
                }
                if let Some(req) = req {
                    write!(f, " req={req}")?;
                }
                if let Some(cmp) = cmp {
                    write!(f, " cmp={cmp}")?;
                }
                if let Some(ttl) = ttl {
                    write!(f, " ttl={ttl}")?;
                }
                write!(f, " energy={energy}")
            }
            TraceRecord::Rx {
                time,
                node,
                from,
                pkt,
                bits,
                req,
                cmp,
                final_leg,
                energy,
            } => {
                write!(f, "t={time} ev=rx node={node} from={from} pkt={pkt} bits={bits}")?;
                if let Some(req) = req {
                    write!(f, " req={req}")?;
                }
                if let Some(cmp) = cmp {
                    write!(f, " cmp={cmp}")?;
                }
                write!(f, " final={} energy={energy}", u8::from(*final_leg))
            }
            TraceRecord::Drop {
                time,
                node,
                pkt,
                reason,
                req,
                cmp,
            } => {
                write!(f, "t={time} ev=drop node={node} pkt={pkt} reason={reason}")?;
                if let Some(req) = req {
                    write!(f, " req={req}")?;
                }
                if let Some(cmp) = cmp {
                    write!(f, " cmp={cmp}")?;
                }
                Ok(())
            }
            TraceRecord::Observation {
                time,
                observer,
                subject,
                forwarded,
            } => write!(
                f,
                "t={time} ev=obs observer={observer} subject={subject} forwarded={}",
                u8::from(*forwarded)
            ),
            TraceRecord::Death { time, node } => write!(f, "t={time} ev=death node={node}"),
            TraceRecord::ComposeAttempt {
                time,
                cmp,
                attempt,
                initiator,
                plan,
            } => write!(
                f,
                "t={time} ev=compose_attempt cmp={cmp} attempt={attempt} initiator={initiator} plan={}",
                join_csv(plan)
            ),
            TraceRecord::Matrix {
                time,
                cmp,
                attempt,
                data,
            } => write!(f, "t={time} ev=matrix cmp={cmp} attempt={attempt} data={data}"),
            TraceRecord::PathSelected {
                time,
                cmp,
                attempt,
                nodes,
            } => write!(
                f,
                "t={time} ev=path cmp={cmp} attempt={attempt} nodes={}",
                join_csv(nodes)
            ),
            TraceRecord::PathFailure {
                time,
                cmp,
                attempt,
                stage,
                reason,
            } => {
                write!(f, "t={time} ev=path_failure cmp={cmp} attempt={attempt}")?;
                if let Some(stage) = stage {
                    write!(f, " stage={stage}")?;
                }
                write!(f, " reason={reason}")
            }
            TraceRecord::Recompose { time, cmp, attempt } => {
                write!(f, "t={time} ev=recompose cmp={cmp} attempt={attempt}")
            }
            TraceRecord::ComposeSuccess {
                time,
                cmp,
                attempt,
                elapsed,
            } => write!(
                f,
                "t={time} ev=compose_success cmp={cmp} attempt={attempt} elapsed={elapsed}"
            ),
            TraceRecord::ComposeFailed {
                time,
                cmp,
                attempt,
                reason,
            } => write!(
                f,
                "t={time} ev=compose_failed cmp={cmp} attempt={attempt} reason={reason}"
            ),
            TraceRecord::NodeSummary {
                time,
                node,
                initial,
                consumed,
                alive,
            } => write!(
                f,
                "t={time} ev=node node={node} initial={initial} consumed={consumed} alive={}",
                u8::from(*alive)
            ),
        }
    }
}

/// Key-value remainder of a line, consumed field by field.
struct Fields<'a> {
    pairs: Vec<(&'a str, &'a str)>,
}

impl<'a> Fields<'a> {
    fn take_opt(&mut self, key: &str) -> Option<&'a str> {
        let idx = self.pairs.iter().position(|(k, _)| *k == key)?;
        Some(self.pairs.remove(idx).1)
    }

    fn take(&mut self, key: &str) -> Result<&'a str> {
        self.take_opt(key)
            .ok_or_else(|| Error::invalid(format!("missing field {key}")))
    }

    fn parse<T>(&mut self, key: &str) -> Result<T>
    where
        T: FromStr,
        T::Err: fmt::Display,
    {
        let raw = self.take(key)?;
        raw.parse()
            .map_err(|e| Error::invalid(format!("field {key}={raw}: {e}")))
    }

    fn parse_opt<T>(&mut self, key: &str) -> Result<Option<T>>
    where
        T: FromStr,
        T::Err: fmt::Display,
    {
        match self.take_opt(key) {
            None => Ok(None),
            Some(raw) => raw
                .parse()
                .map(Some)
                .map_err(|e| Error::invalid(format!("field {key}={raw}: {e}"))),
        }
    }

    fn parse_flag(&mut self, key: &str) -> Result<bool> {
        match self.take(key)? {
            "0" => Ok(false),
            "1" => Ok(true),
            other => Err(Error::invalid(format!(
                "field {key}={other}: expected 0 or 1"
            ))),
        }
    }

    fn finish(self) -> Result<()> {
        if let Some((k, v)) = self.pairs.first() {
            return Err(Error::invalid(format!("unexpected field {k}={v}")));
        }
        Ok(())
    }
}

fn parse_csv<T>(raw: &str) -> Result<Vec<T>>
where
    T: FromStr,
    T::Err: fmt::Display,
{
    if raw.is_empty() {
        return Ok(Vec::new());
    }
    raw.split(',')
        .map(|item| {
            item.parse()
                .map_err(|e| Error::invalid(format!("list item {item}: {e}")))
        })
        .collect()
}

/// Parse one trace line.
pub fn parse_record(line: &str) -> Result<TraceRecord> {
    let mut pairs = Vec::new();
    for token in line.split_whitespace() {
        let (k, v) = token
            .split_once('=')
            .ok_or_else(|| Error::invalid(format!("malformed token: {token}")))?;
        pairs.push((k, v));
    }
    let mut fields = Fields { pairs };
    let time: f64 = fields.parse("t")?;
    let kind = fields.take("ev")?;
    let record = match kind {
        "meta" => TraceRecord::Meta {
            time,
            seed: fields.parse("seed")?,
            method: fields.parse("method")?,
            nodes: fields.parse("nodes")?,
            duration: fields.parse("duration")?,
            bin: fields.parse("bin")?,
            hash: fields.take("hash")?.to_string(),
        },
        "tx" => TraceRecord::Tx {
            time,
            node: fields.parse("node")?,
            pkt: fields.parse("pkt")?,
            bits: fields.parse("bits")?,
            to: fields.parse_opt("to")?,
            req: fields.parse_opt("req")?,
            cmp: fields.parse_opt("cmp")?,
            ttl: fields.parse_opt("ttl")?,
            energy: fields.parse("energy")?,
        },
        "rx" => TraceRecord::Rx {
            time,
            node: fields.parse("node")?,
            from: fields.parse("from")?,
            pkt: fields.parse("pkt")?,
            bits: fields.parse("bits")?,
            req: fields.parse_opt("req")?,
            cmp: fields.parse_opt("cmp")?,
            final_leg: fields.parse_flag("final")?,
            energy: fields.parse("energy")?,
        },
        "drop" => TraceRecord::Drop {
            time,
            node: fields.parse("node")?,
            pkt: fields.parse("pkt")?,
            reason: fields.parse("reason")?,
            req: fields.parse_opt("req")?,
            cmp: fields.parse_opt("cmp")?,
        },
        "obs" => TraceRecord::Observation {
            time,
            observer: fields.parse("observer")?,
            subject: fields.parse("subject")?,
            forwarded: fields.parse_flag("forwarded")?,
        },
        "death" => TraceRecord::Death {
            time,
            node: fields.parse("node")?,
        },
        "compose_attempt" => TraceRecord::ComposeAttempt {
            time,
            cmp: fields.parse("cmp")?,
            attempt: fields.parse("attempt")?,
            initiator: fields.parse("initiator")?,
            plan: parse_csv(fields.take("plan")?)?,
        },
        "matrix" => TraceRecord::Matrix {
            time,
            cmp: fields.parse("cmp")?,
            attempt: fields.parse("attempt")?,
            data: fields.take("data")?.to_string(),
        },
        "path" => TraceRecord::PathSelected {
            time,
            cmp: fields.parse("cmp")?,
            attempt: fields.parse("attempt")?,
            nodes: parse_csv(fields.take("nodes")?)?,
        },
        "path_failure" => TraceRecord::PathFailure {
            time,
            cmp: fields.parse("cmp")?,
            attempt: fields.parse("attempt")?,
            stage: fields.parse_opt("stage")?,
            reason: fields.parse("reason")?,
        },
        "recompose" => TraceRecord::Recompose {
            time,
            cmp: fields.parse("cmp")?,
            attempt: fields.parse("attempt")?,
        },
        "compose_success" => TraceRecord::ComposeSuccess {
            time,
            cmp: fields.parse("cmp")?,
            attempt: fields.parse("attempt")?,
            elapsed: fields.parse("elapsed")?,
        },
        "compose_failed" => TraceRecord::ComposeFailed {
            time,
            cmp: fields.parse("cmp")?,
            attempt: fields.parse("attempt")?,
            reason: fields.parse("reason")?,
        },
        "node" => TraceRecord::NodeSummary {
            time,
            node: fields.parse("node")?,
            initial: fields.parse("initial")?,
            consumed: fields.parse("consumed")?,
            alive: fields.parse_flag("alive")?,
        },
        other => return Err(Error::invalid(format!("unknown event kind: {other}"))),
    };
    fields.finish()?;
    Ok(record)
}

/// Buffered append-only writer for one run's trace file.
pub struct TraceWriter {
    out: BufWriter<File>,
    records: u64,
}

impl TraceWriter {
    pub fn create(path: &Path) -> Result<Self> {
        Ok(TraceWriter {
            out: BufWriter::new(File::create(path)?),
            records: 0,
        })
    }

    pub fn append(&mut self, record: &TraceRecord) -> Result<()> {
        writeln!(self.out, "{record}")?;
        self.records += 1;
        Ok(())
    }

    pub fn records_written(&self) -> u64 {
        self.records
    }

    pub fn finish(mut self) -> Result<()> {
        self.out.flush()?;
        Ok(())
    }
}

/// Read a whole trace file. A malformed or truncated line fails with the
/// line number and the last record that did parse.
pub fn read_trace(path: &Path) -> Result<Vec<TraceRecord>> {
    let reader = BufReader::new(File::open(path)?);
    let mut records = Vec::new();
    let mut last_valid: Option<String> = None;
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        match parse_record(&line) {
            Ok(record) => {
                last_valid = Some(format!("t={} ev {:?}", record.time(), kind_name(&record)));
                records.push(record);
            }
            Err(e) => {
                return Err(Error::TraceParse {
                    line: idx + 1,
                    reason: e.to_string(),
                    last_valid,
                })
            }
        }
    }
    Ok(records)
}

fn kind_name(record: &TraceRecord) -> &'static str {
    match record {
        TraceRecord::Meta { .. } => "meta",
        TraceRecord::Tx { .. } => "tx",
        TraceRecord::Rx { .. } => "rx",
        TraceRecord::Drop { .. } => "drop",
        TraceRecord::Observation { .. } => "obs",
        TraceRecord::Death { .. } => "death",
        TraceRecord::ComposeAttempt { .. } => "compose_attempt",
        TraceRecord::Matrix { .. } => "matrix",
        TraceRecord::PathSelected { .. } => "path",
        TraceRecord::PathFailure { .. } => "path_failure",
        TraceRecord::Recompose { .. } => "recompose",
        TraceRecord::ComposeSuccess { .. } => "compose_success",
        TraceRecord::ComposeFailed { .. } => "compose_failed",
        TraceRecord::NodeSummary { .. } => "node",
    }
}
