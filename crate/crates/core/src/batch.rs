//! Seed sweeps and paired method comparison.
//!
//! A batch runs every (seed, method) pair, folds each trace into its
//! metrics report in memory, and pairs the two methods seed by seed: same
//! seed means same node placement, same motion, same radio luck and the
//! same misbehavior roster, so each difference isolates the selection
//! method. Runs are independent and execute in parallel; aggregation
//! happens after all of them finish.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::metrics::{compute_metrics, MetricsReport};
use crate::scenario::ScenarioConfig;
use crate::sim::run_scenario;
use crate::types::Method;

/// One finished run of the sweep.
#[derive(Debug, Clone)]
pub struct RunRecord {
    pub seed: u64,
    pub method: Method,
    pub report: MetricsReport,
}

/// Mean and sample standard deviation over the sweep's seeds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricStats {
    pub mean: f64,
    pub stddev: f64,
}

/// One metric compared between the two methods, paired by seed.
#[derive(Debug, Clone)]
pub struct PairedMetric {
    pub name: &'static str,
    pub higher_is_better: bool,
    pub first: MetricStats,
    pub second: MetricStats,
    /// Per-seed `first - second`, in seed order.
    pub diffs: Vec<f64>,
    /// Fraction of seeds where the first method is strictly better.
    pub win_fraction: f64,
    /// Fraction of seeds where the two methods tie exactly.
    pub tie_fraction: f64,
}

impl PairedMetric {
    pub fn mean_diff(&self) -> f64 {
        mean(&self.diffs)
    }
}

/// The batch verdict: three metrics, each paired across seeds.
#[derive(Debug, Clone)]
pub struct ComparisonSummary {
    pub methods: (Method, Method),
    pub seeds: Vec<u64>,
    pub path_failures: PairedMetric,
    pub throughput: PairedMetric,
    pub efficiency: PairedMetric,
}

/// Everything a finished batch hands back.
#[derive(Debug, Clone)]
pub struct BatchResult {
    /// Per-run reports, seed-major, the two methods adjacent.
    pub runs: Vec<RunRecord>,
    pub summary: ComparisonSummary,
}

/// Run `methods.0` and `methods.1` on every seed and compare them. The
/// base configuration's own seed and method fields are overridden per
/// run; everything else is shared.
pub fn run_batch(
    base: &ScenarioConfig,
    seeds: &[u64],
    methods: (Method, Method),
) -> Result<BatchResult> {
    if seeds.is_empty() {
        return Err(Error::invalid("a batch needs at least one seed"));
    }
    base.validate()?;
    let jobs: Vec<(u64, Method)> = seeds
        .iter()
        .flat_map(|&seed| [(seed, methods.0), (seed, methods.1)])
        .collect();
    let runs: Vec<RunRecord> = jobs
        .par_iter()
        .map(|&(seed, method)| run_one(base, seed, method))
        .collect::<Result<_>>()?;
    let summary = summarize(&runs, seeds, methods);
    Ok(BatchResult { runs, summary })
}

fn run_one(base: &ScenarioConfig, seed: u64, method: Method) -> Result<RunRecord> {
    let mut config = base.clone();
    config.seed = seed;
    config.method = method;
    let report = run_scenario(&config)
        .and_then(|output| compute_metrics(&output.records))
        .map_err(|e| Error::RunFailed {
            seed,
            method: method.to_string(),
            source: Box::new(e),
        })?;
    Ok(RunRecord {
        seed,
        method,
        report,
    })
}

fn summarize(runs: &[RunRecord], seeds: &[u64], methods: (Method, Method)) -> ComparisonSummary {
    let pairs_of = |pick: fn(&MetricsReport) -> Option<f64>| -> Vec<(f64, f64)> {
        seeds
            .iter()
            .enumerate()
            .filter_map(|(i, _)| {
                let a = pick(&runs[2 * i].report)?;
                let b = pick(&runs[2 * i + 1].report)?;
                Some((a, b))
            })
            .collect()
    };
    let failures = pairs_of(|r| Some(r.total_path_failures() as f64));
    let throughput = pairs_of(|r| Some(r.mean_throughput()));
    let efficiency = pairs_of(|r| r.efficiency());
    ComparisonSummary {
        methods,
        seeds: seeds.to_vec(),
        path_failures: paired_metric("path_failures_total", false, &failures),
        throughput: paired_metric("throughput_bps", true, &throughput),
        efficiency: paired_metric("composition_efficiency", true, &efficiency),
    }
}

fn paired_metric(name: &'static str, higher_is_better: bool, pairs: &[(f64, f64)]) -> PairedMetric {
    let firsts: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let seconds: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let mut wins = 0usize;
    let mut ties = 0usize;
    for (a, b) in pairs {
        if a == b {
            ties += 1;
        } else if (a > b) == higher_is_better {
            wins += 1;
        }
    }
    let n = pairs.len().max(1) as f64;
    PairedMetric {
        name,
        higher_is_better,
        first: MetricStats {
            mean: mean(&firsts),
            stddev: stddev(&firsts),
        },
        second: MetricStats {
            mean: mean(&seconds),
            stddev: stddev(&seconds),
        },
        diffs: pairs.iter().map(|(a, b)| a - b).collect(),
        win_fraction: wins as f64 / n,
        tie_fraction: ties as f64 / n,
    }
}

fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.iter().sum::<f64>() / values.len() as f64
}

fn stddev(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let m = mean(values);
    let ss: f64 = values.iter().map(|v| (v - m) * (v - m)).sum();
    (ss / (values.len() - 1) as f64).sqrt()
}

impl ComparisonSummary {
    pub fn metrics(&self) -> [&PairedMetric; 3] {
        [&self.path_failures, &self.throughput, &self.efficiency]
    }

    /// Long-format CSV: `metric,statistic,value`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("metric,statistic,value\n");
        let (a, b) = self.methods;
        for m in self.metrics() {
            writeln!(out, "{},{}_mean,{}", m.name, a, m.first.mean).unwrap();
            writeln!(out, "{},{}_stddev,{}", m.name, a, m.first.stddev).unwrap();
            writeln!(out, "{},{}_mean,{}", m.name, b, m.second.mean).unwrap();
            writeln!(out, "{},{}_stddev,{}", m.name, b, m.second.stddev).unwrap();
            writeln!(out, "{},mean_diff,{}", m.name, m.mean_diff()).unwrap();
            writeln!(out, "{},win_fraction,{}", m.name, m.win_fraction).unwrap();
            writeln!(out, "{},tie_fraction,{}", m.name, m.tie_fraction).unwrap();
        }
        writeln!(out, "seeds,count,{}", self.seeds.len()).unwrap();
        out
    }

    /// Aligned table for standard output.
    pub fn to_table(&self) -> String {
        let (a, b) = self.methods;
        let mut out = String::new();
        writeln!(
            out,
            "{:<26} {:>18} {:>18} {:>12} {:>6} {:>6}",
            "metric",
            a.to_string(),
            b.to_string(),
            "diff",
            "win%",
            "tie%"
        )
        .unwrap();
        for m in self.metrics() {
            writeln!(
                out,
                "{:<26} {:>18} {:>18} {:>12.3} {:>5.0}% {:>5.0}%",
                m.name,
                format!("{:.3} ± {:.3}", m.first.mean, m.first.stddev),
                format!("{:.3} ± {:.3}", m.second.mean, m.second.stddev),
                m.mean_diff(),
                m.win_fraction * 100.0,
                m.tie_fraction * 100.0,
            )
            .unwrap();
        }
        writeln!(out, "seeds: {}", self.seeds.len()).unwrap();
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config() -> ScenarioConfig {
        let mut config = ScenarioConfig::default();
        config.nodes = 10;
        config.duration = 10.0;
        config.services.concrete_count = 20;
        config
    }

    #[test]
    fn every_seed_runs_both_methods_in_order() {
        let result = run_batch(
            &small_config(),
            &[1, 2, 3],
            (Method::Proposed, Method::Baseline),
        )
        .unwrap();
        assert_eq!(result.runs.len(), 6);
        for (i, &seed) in [1u64, 2, 3].iter().enumerate() {
            assert_eq!(result.runs[2 * i].seed, seed);
            assert_eq!(result.runs[2 * i].method, Method::Proposed);
            assert_eq!(result.runs[2 * i + 1].seed, seed);
            assert_eq!(result.runs[2 * i + 1].method, Method::Baseline);
        }
        assert_eq!(result.summary.seeds, vec![1, 2, 3]);
        assert_eq!(result.summary.path_failures.diffs.len(), 3);
    }

    #[test]
    fn comparing_a_method_with_itself_gives_zero_differences() {
        let result = run_batch(
            &small_config(),
            &[1, 2],
            (Method::Proposed, Method::Proposed),
        )
        .unwrap();
        for metric in result.summary.metrics() {
            assert!(metric.diffs.iter().all(|d| *d == 0.0), "{}", metric.name);
            assert_eq!(metric.win_fraction, 0.0);
            assert_eq!(metric.tie_fraction, 1.0);
        }
    }

    #[test]
    fn empty_seed_list_is_rejected() {
        let err = run_batch(&small_config(), &[], (Method::Proposed, Method::Baseline));
        assert!(err.is_err());
    }

    #[test]
    fn invalid_base_config_fails_before_any_run() {
        let mut config = small_config();
        config.nodes = 0;
        let err = run_batch(&config, &[1], (Method::Proposed, Method::Baseline));
        assert!(matches!(err, Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn stats_match_hand_computation() {
        assert_eq!(mean(&[1.0, 2.0, 3.0, 4.0]), 2.5);
        assert!((stddev(&[1.0, 2.0, 3.0, 4.0]) - (5.0f64 / 3.0).sqrt()).abs() < 1e-12);
        assert_eq!(stddev(&[7.0]), 0.0);
        assert_eq!(mean(&[]), 0.0);
    }

    #[test]
    fn win_and_tie_fractions_count_direction() {
        let m = paired_metric("x", false, &[(1.0, 2.0), (2.0, 2.0), (3.0, 2.0), (0.0, 5.0)]);
        assert_eq!(m.win_fraction, 0.5);
        assert_eq!(m.tie_fraction, 0.25);
        let m = paired_metric("y", true, &[(1.0, 2.0), (3.0, 2.0)]);
        assert_eq!(m.win_fraction, 0.5);
    }

    #[test]
    fn summary_serializes_to_csv_and_table() {
        let result = run_batch(&small_config(), &[1], (Method::Proposed, Method::Baseline))
            .unwrap();
        let csv = result.summary.to_csv();
        assert!(csv.starts_with("metric,statistic,value\n"));
        assert!(csv.contains("path_failures_total,proposed_mean,"));
        assert!(csv.contains("composition_efficiency,win_fraction,"));
        assert!(csv.contains("seeds,count,1"));
        let table = result.summary.to_table();
        assert!(table.contains("proposed"));
        assert!(table.contains("baseline"));
        assert!(table.contains("throughput_bps"));
    }
}
