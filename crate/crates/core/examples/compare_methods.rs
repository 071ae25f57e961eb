//! Paired comparison of the two provider-selection methods.
//!
//! Runs trust-based selection against first-reply selection over ten
//! seeds. Pairing matters: the same seed gives both methods the same node
//! placement, motion, radio luck and misbehavior roster, so every
//! difference comes from the selection policy alone.
//!
//! ```bash
//! cargo run --release --example compare_methods
//! ```

use manet_compose::batch::run_batch;
use manet_compose::scenario::ScenarioConfig;
use manet_compose::types::Method;

fn main() -> manet_compose::Result<()> {
    let config = ScenarioConfig::default();
    let seeds: Vec<u64> = (1..=10).collect();

    println!(
        "running {} paired simulations ({} nodes, {}s each)...\n",
        seeds.len() * 2,
        config.nodes,
        config.duration
    );
    let started = std::time::Instant::now();
    let result = run_batch(&config, &seeds, (Method::Proposed, Method::Baseline))?;
    println!("finished in {:.2?}\n", started.elapsed());

    print!("{}", result.summary.to_table());

    println!("\nper-seed efficiency:");
    println!("{:>6} {:>10} {:>10}", "seed", "proposed", "baseline");
    for (i, seed) in seeds.iter().enumerate() {
        let proposed = &result.runs[2 * i].report;
        let baseline = &result.runs[2 * i + 1].report;
        println!(
            "{seed:>6} {:>10.3} {:>10.3}",
            proposed.efficiency().unwrap_or(f64::NAN),
            baseline.efficiency().unwrap_or(f64::NAN),
        );
    }
    Ok(())
}
