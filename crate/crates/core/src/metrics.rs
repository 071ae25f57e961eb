//! Run metrics computed from a trace: path failures over time, delivered
//! payload throughput over time, and composition efficiency.
//!
//! Everything here is a pure function of the trace records, so replaying
//! a stored trace reproduces the original report exactly. The trace's
//! header supplies the run metadata (seed, method, bin width, duration);
//! no other configuration is consulted.
//!
//! Double bookkeeping, on purpose: every path failure counts in the
//! failure series even when a later recomposition rescues the request,
//! and the rescued request still counts as one success in the efficiency
//! numerator. The series tell the repair story, the ratio tells the
//! outcome story.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::trace::{PacketKind, TraceRecord};
use crate::types::Method;

/// The three per-run metrics plus the raw counts behind them.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub seed: u64,
    pub method: Method,
    /// Configuration hash from the trace header.
    pub hash: String,
    pub duration: f64,
    pub bin_width: f64,
    /// Path failure events per time bin, bins of `bin_width` seconds
    /// covering `[0, duration]`.
    pub path_failures_per_bin: Vec<u64>,
    /// Composition payload bits that completed their journey, per bin.
    pub delivered_bits_per_bin: Vec<u64>,
    /// Composite requests issued.
    pub attempts: u64,
    /// Requests whose result reached the initiator.
    pub successes: u64,
    /// Requests abandoned for good (no provider, recomposition budget
    /// spent, or initiator death).
    pub terminal_failures: u64,
    /// Mean time from issue to delivered result, over successes.
    pub mean_composition_time: Option<f64>,
}

impl MetricsReport {
    pub fn total_path_failures(&self) -> u64 {
        self.path_failures_per_bin.iter().sum()
    }

    pub fn total_delivered_bits(&self) -> u64 {
        self.delivered_bits_per_bin.iter().sum()
    }

    /// Delivered payload rate per bin, in bits per second.
    pub fn throughput_series(&self) -> Vec<f64> {
        self.delivered_bits_per_bin
            .iter()
            .map(|bits| *bits as f64 / self.bin_width)
            .collect()
    }

    /// Delivered payload rate over the whole run, in bits per second.
    pub fn mean_throughput(&self) -> f64 {
        if self.duration <= 0.0 {
            return 0.0;
        }
        self.total_delivered_bits() as f64 / self.duration
    }

    /// Successes over attempts; absent when nothing was attempted.
    pub fn efficiency(&self) -> Option<f64> {
        if self.attempts == 0 {
            return None;
        }
        Some(self.successes as f64 / self.attempts as f64)
    }

    /// Requests still in flight when the run ended.
    pub fn unresolved(&self) -> u64 {
        self.attempts - self.successes - self.terminal_failures
    }

    /// Long-format CSV: `metric,bin_start,bin_end,value`. Series rows
    /// carry their bin bounds; whole-run scalars span `[0, duration]`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("metric,bin_start,bin_end,value\n");
        for (i, count) in self.path_failures_per_bin.iter().enumerate() {
            let (start, end) = self.bin_bounds(i);
            writeln!(out, "path_failures,{start},{end},{count}").unwrap();
        }
        for (i, rate) in self.throughput_series().iter().enumerate() {
            let (start, end) = self.bin_bounds(i);
            writeln!(out, "throughput_bps,{start},{end},{rate}").unwrap();
        }
        let d = self.duration;
        writeln!(out, "path_failures_total,0,{d},{}", self.total_path_failures()).unwrap();
        writeln!(out, "delivered_payload_bits,0,{d},{}", self.total_delivered_bits()).unwrap();
        writeln!(out, "throughput_bps_mean,0,{d},{}", self.mean_throughput()).unwrap();
        writeln!(out, "compositions_attempted,0,{d},{}", self.attempts).unwrap();
        writeln!(out, "compositions_succeeded,0,{d},{}", self.successes).unwrap();
        writeln!(out, "compositions_failed,0,{d},{}", self.terminal_failures).unwrap();
        writeln!(out, "compositions_unresolved,0,{d},{}", self.unresolved()).unwrap();
        if let Some(e) = self.efficiency() {
            writeln!(out, "composition_efficiency,0,{d},{e}").unwrap();
        }
        if let Some(t) = self.mean_composition_time {
            writeln!(out, "composition_time_mean,0,{d},{t}").unwrap();
        }
        out
    }

    fn bin_bounds(&self, index: usize) -> (f64, f64) {
        let start = index as f64 * self.bin_width;
        (start, start + self.bin_width)
    }
}

fn bin_index(time: f64, width: f64, bins: usize) -> Option<usize> {
    if bins == 0 || time < 0.0 {
        return None;
    }
    // events exactly on the horizon land in the last bin
    Some(((time / width) as usize).min(bins - 1))
}

/// Fold a complete trace into its report. The trace must begin with the
/// header record every run writes first.
pub fn compute_metrics(records: &[TraceRecord]) -> Result<MetricsReport> {
    let Some(TraceRecord::Meta {
        seed,
        method,
        duration,
        bin,
        hash,
        ..
    }) = records.first()
    else {
        return Err(Error::invalid(
            "trace does not start with a meta record; is this a complete trace file?",
        ));
    };
    let duration = *duration;
    let bin_width = *bin;
    let bins = if duration > 0.0 {
        (duration / bin_width).ceil() as usize
    } else {
        0
    };
    let mut report = MetricsReport {
        seed: *seed,
        method: *method,
        hash: hash.clone(),
        duration,
        bin_width,
        path_failures_per_bin: vec![0; bins],
        delivered_bits_per_bin: vec![0; bins],
        attempts: 0,
        successes: 0,
        terminal_failures: 0,
        mean_composition_time: None,
    };
    let mut elapsed_sum = 0.0;
    for record in records {
        match record {
            TraceRecord::PathFailure { time, .. } => {
                if let Some(i) = bin_index(*time, bin_width, bins) {
                    report.path_failures_per_bin[i] += 1;
                }
            }
            TraceRecord::Rx {
                time,
                pkt: PacketKind::Handoff | PacketKind::Result,
                bits,
                final_leg: true,
                ..
            } => {
                if let Some(i) = bin_index(*time, bin_width, bins) {
                    report.delivered_bits_per_bin[i] += bits;
                }
            }
            TraceRecord::ComposeAttempt { attempt: 0, .. } => report.attempts += 1,
            TraceRecord::ComposeSuccess { elapsed, .. } => {
                report.successes += 1;
                elapsed_sum += elapsed;
            }
            TraceRecord::ComposeFailed { .. } => report.terminal_failures += 1,
            _ => {}
        }
    }
    if report.successes > 0 {
        report.mean_composition_time = Some(elapsed_sum / report.successes as f64);
    }
    debug_assert!(report.successes + report.terminal_failures <= report.attempts);
    Ok(report)
}
