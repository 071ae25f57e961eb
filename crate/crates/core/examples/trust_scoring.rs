//! Score service candidates by fusing their QoS measurements.
//!
//! Three candidates offer the same service with different response
//! times, failure rates, battery levels, observed reliability, and hop
//! distances. Each metric is min-max normalized over the candidate set
//! (costs inverted so higher is always better), weighted, and summed;
//! the result is scaled to a 0-100 trust score.
//!
//! ```bash
//! cargo run --example trust_scoring
//! ```

use manet_compose::hammerstein::{
    trust_score, HammersteinModel, InputSpec, NormalizationContext,
};
use manet_compose::qos::QosVector;

fn main() -> manet_compose::Result<()> {
    let candidates = [
        (
            "near but flaky",
            QosVector {
                response_time: 0.25,
                service_failure_rate: 0.18,
                node_energy: 0.9,
                node_reliability: 0.35,
                hop_count: Some(1),
            },
        ),
        (
            "far but solid",
            QosVector {
                response_time: 0.40,
                service_failure_rate: 0.02,
                node_energy: 1.2,
                node_reliability: 0.95,
                hop_count: Some(4),
            },
        ),
        (
            "balanced",
            QosVector {
                response_time: 0.30,
                service_failure_rate: 0.06,
                node_energy: 1.0,
                node_reliability: 0.80,
                hop_count: Some(2),
            },
        ),
    ];

    let spec = InputSpec::with_hop_count();
    let model = HammersteinModel::static_weights(&[0.05, 0.05, 0.05, 0.5, 0.35]);
    let vectors: Vec<QosVector> = candidates.iter().map(|(_, v)| *v).collect();
    let ctx = NormalizationContext::build(&vectors, &spec)?;

    println!("inputs: response time, failure rate, energy, reliability, hops");
    println!(
        "weights: {:?}\n",
        model
            .ma_coeffs
            .iter()
            .map(|c| c[0])
            .collect::<Vec<f64>>()
    );

    let mut scored: Vec<(&str, f64)> = Vec::new();
    for (name, vector) in &candidates {
        let score = trust_score(vector, &ctx, &model, 0.0)?;
        scored.push((name, score.value()));
    }
    scored.sort_by(|a, b| b.1.total_cmp(&a.1));

    for (rank, (name, score)) in scored.iter().enumerate() {
        println!("  {}. {:<16} trust {:.2}", rank + 1, name, score);
    }
    println!("\nreliability and hop count dominate: the flaky one-hop node loses.");
    Ok(())
}
