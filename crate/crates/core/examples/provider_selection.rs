//! Pick providers from a trust matrix.
//!
//! A composite request needs four abstract services; five nodes answered
//! discovery with offers for some of them. Each known (service, node)
//! cell holds a fused trust score; a dash means the node never offered
//! that service. Selection takes the per-service argmax and the visit
//! order of the winners is the composition path.
//!
//! ```bash
//! cargo run --example provider_selection
//! ```

use manet_compose::composition::{composition_path, select_providers, TrustMatrix};
use manet_compose::types::{NodeId, ServiceId};

fn main() -> manet_compose::Result<()> {
    let services: Vec<ServiceId> = (1..=4).map(ServiceId).collect();
    let nodes: Vec<NodeId> = (1..=5).map(NodeId).collect();
    let rows = vec![
        vec![Some(58.0), Some(84.0), None, Some(48.0), Some(64.0)],
        vec![Some(75.0), None, Some(80.0), Some(62.0), None],
        vec![Some(90.0), None, None, None, None],
        vec![None, Some(75.0), Some(54.0), None, None],
    ];

    let matrix = TrustMatrix::from_rows(services, nodes, rows)?;

    println!("trust matrix (rows = services, columns = nodes):");
    print!("      ");
    for node in matrix.nodes() {
        print!("{:>6}", format!("{node}"));
    }
    println!();
    for (row, service) in matrix.services().iter().enumerate() {
        print!("  {service:>3} ");
        for col in 0..matrix.nodes().len() {
            match matrix.cell(row, col) {
                Some(cell) => print!("{:>6}", cell.trust.value()),
                None => print!("{:>6}", "-"),
            }
        }
        println!();
    }

    let choices = select_providers(&matrix)?;
    println!("\nselected providers:");
    for choice in &choices {
        println!(
            "  {} -> {}  (trust {})",
            choice.service, choice.node, choice.trust
        );
    }

    let path = composition_path(&choices);
    let legs: Vec<String> = path.iter().map(|n| format!("{n}")).collect();
    println!("\ncomposition path: {}", legs.join(" -> "));
    Ok(())
}
