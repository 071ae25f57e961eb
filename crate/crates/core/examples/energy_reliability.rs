//! The two per-node QoS primitives: radio energy and forwarding trust.
//!
//! Energy: moving k bits over d meters costs `2*e_act*k + e_amp*d^2*k`
//! joules, split between a sender share and a receiver share. The square
//! on distance is what makes long single hops expensive and relays worth
//! having.
//!
//! Reliability: each node keeps a Beta posterior per neighbor. Observing
//! `forwarded` of `received` packets moves the expectation
//! `alpha / (alpha + beta)` toward the observed forwarding rate.
//!
//! ```bash
//! cargo run --example energy_reliability
//! ```

use manet_compose::qos::{
    rx_share, transmission_energy, tx_share, EnergyParams, ReliabilityTracker,
};

fn main() -> manet_compose::Result<()> {
    let params = EnergyParams {
        e_act: 50e-9,
        e_amp: 100e-12,
    };

    println!("sending 1000 bits, e_act=50 nJ/bit, e_amp=100 pJ/bit/m^2\n");
    println!(
        "{:>10} {:>12} {:>12} {:>12}",
        "dist (m)", "tx (J)", "rx (J)", "total (J)"
    );
    for d in [1.0, 10.0, 25.0, 45.0, 90.0] {
        let total = transmission_energy(1000.0, d, &params)?;
        let tx = tx_share(1000.0, d, &params);
        let rx = rx_share(1000.0, &params);
        println!("{d:>10} {tx:>12.3e} {rx:>12.3e} {total:>12.3e}");
        assert!((tx + rx - total).abs() < 1e-18);
    }

    let one_hop = transmission_energy(1000.0, 90.0, &params)?;
    let two_hops = 2.0 * transmission_energy(1000.0, 45.0, &params)?;
    println!(
        "\n90 m in one hop costs {one_hop:.3e} J; two 45 m hops cost {two_hops:.3e} J \
         ({:.0}% of it)",
        100.0 * two_hops / one_hop
    );

    println!("\n--- forwarding reliability ---\n");
    let mut tracker = ReliabilityTracker::new();
    println!(
        "fresh tracker: alpha={}, beta={}, expectation={}",
        tracker.alpha(),
        tracker.beta(),
        tracker.expectation()
    );

    let history: [(u64, u64, &str); 4] = [
        (8, 10, "a good first impression"),
        (9, 10, "stays solid"),
        (2, 10, "a bad stretch"),
        (10, 10, "recovers"),
    ];
    for (forwarded, received, note) in history {
        tracker.observe(forwarded, received)?;
        println!(
            "observe {forwarded:>2}/{received:<2} -> expectation {:.4}  ({note})",
            tracker.expectation()
        );
    }

    println!(
        "\nfinal state alpha={}, beta={}: the estimate is the lifetime",
        tracker.alpha(),
        tracker.beta()
    );
    println!("forwarding rate, so one bad stretch dents but does not erase a record.");
    Ok(())
}
