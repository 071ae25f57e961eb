//! One full simulation run, summarized.
//!
//! Runs the shipped default scenario (100 mobile nodes, 150 simulated
//! seconds, trust-based provider selection) and folds the trace into the
//! three headline metrics plus a small event census.
//!
//! ```bash
//! cargo run --release --example single_run
//! ```

use std::collections::BTreeMap;

use manet_compose::metrics::compute_metrics;
use manet_compose::scenario::ScenarioConfig;
use manet_compose::sim::run_scenario;
use manet_compose::trace::TraceRecord;

fn main() -> manet_compose::Result<()> {
    let config = ScenarioConfig::default();
    println!(
        "nodes={} duration={}s seed={} method={}\n",
        config.nodes, config.duration, config.seed, config.method
    );

    let started = std::time::Instant::now();
    let output = run_scenario(&config)?;
    let wall = started.elapsed();
    let report = compute_metrics(&output.records)?;

    let mut census: BTreeMap<&str, u64> = BTreeMap::new();
    for record in &output.records {
        let kind = match record {
            TraceRecord::Meta { .. } => "meta",
            TraceRecord::Tx { .. } => "tx",
            TraceRecord::Rx { .. } => "rx",
            TraceRecord::Drop { .. } => "drop",
            TraceRecord::Observation { .. } => "observation",
            TraceRecord::Death { .. } => "death",
            TraceRecord::ComposeAttempt { .. } => "compose_attempt",
            TraceRecord::Matrix { .. } => "matrix",
            TraceRecord::PathSelected { .. } => "path_selected",
            TraceRecord::PathFailure { .. } => "path_failure",
            TraceRecord::Recompose { .. } => "recompose",
            TraceRecord::ComposeSuccess { .. } => "compose_success",
            TraceRecord::ComposeFailed { .. } => "compose_failed",
            TraceRecord::NodeSummary { .. } => "node_summary",
        };
        *census.entry(kind).or_default() += 1;
    }

    println!("trace: {} records in {:.2?} wall time", output.records.len(), wall);
    for (kind, count) in &census {
        println!("  {kind:>16} {count:>8}");
    }

    println!("\nrequests attempted   {:>10}", report.attempts);
    println!("requests succeeded   {:>10}", report.successes);
    println!("requests abandoned   {:>10}", report.terminal_failures);
    println!("requests unresolved  {:>10}", report.unresolved());
    println!("path failures        {:>10}", report.total_path_failures());
    println!("mean throughput      {:>10.1} bps", report.mean_throughput());
    if let Some(e) = report.efficiency() {
        println!("efficiency           {:>10.3}", e);
    }
    if let Some(t) = report.mean_composition_time {
        println!("mean completion time {:>10.2} s", t);
    }

    println!("\nthroughput per {}s bin (bps):", report.bin_width);
    for (i, rate) in report.throughput_series().iter().enumerate() {
        let bar = "#".repeat((rate / 1500.0).round() as usize);
        println!("  [{:>3}-{:>3}s] {rate:>8.0} {bar}", i * 10, (i + 1) * 10);
    }
    Ok(())
}
