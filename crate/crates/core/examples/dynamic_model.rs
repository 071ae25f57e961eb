//! Step a dynamic trust model and watch its memory work.
//!
//! The fusion model is a Hammerstein system: memoryless nonlinear gains
//! on each input followed by linear AR/MA dynamics. With autoregressive
//! feedback the output responds to a sudden input change gradually, so a
//! momentary QoS dip dents trust instead of resetting it.
//!
//! Two single-input models see the same signal: a unit level that drops
//! to zero for five steps and recovers. The static model mirrors the
//! signal; the dynamic one decays and recovers smoothly.
//!
//! ```bash
//! cargo run --example dynamic_model
//! ```

use manet_compose::hammerstein::{GainFunction, HammersteinModel, HammersteinState};

fn main() -> manet_compose::Result<()> {
    let static_model = HammersteinModel::static_weights(&[1.0]);

    let dynamic_model = HammersteinModel {
        gains: vec![GainFunction::Polynomial {
            coefficients: vec![0.0, 0.6, 0.4],
        }],
        ar_coeffs: vec![0.7],
        ma_coeffs: vec![vec![0.3]],
        noise_variance: 0.0,
    };
    dynamic_model.validate()?;

    let mut fast = HammersteinState::new(static_model)?;
    let mut slow = HammersteinState::new(dynamic_model)?;

    println!("{:>4} {:>6} {:>8} {:>8}", "t", "input", "static", "dynamic");
    for t in 0..25 {
        let u = if (8..13).contains(&t) { 0.0 } else { 1.0 };
        let y_fast = fast.step(&[u], 0.0)?;
        let y_slow = slow.step(&[u], 0.0)?;
        let bar = "#".repeat((y_slow * 20.0).round().max(0.0) as usize);
        println!("{t:>4} {u:>6.1} {y_fast:>8.3} {y_slow:>8.3}  {bar}");
    }

    println!("\nthe dynamic model forgives a five-step outage in a few steps");
    println!("instead of writing the provider off instantly.");
    Ok(())
}
