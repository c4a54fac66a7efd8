//! Realizes the exponential of an anticommutator through a one-qubit
//! dilation and a commutator formula.
//!
//! ```text
//! cargo run --release --example anticommutator
//! ```

use commsplit::demos::{anticomm, AnticommConfig};

fn main() -> commsplit::error::Result<()> {
    for seed in 0..3 {
        let report = anticomm(&AnticommConfig {
            seed,
            ..AnticommConfig::default()
        })?;
        println!(
            "seed {seed}: block error {:.3e}, measured order {:.3} (claimed {}), leakage {:.3e}",
            report.block_error, report.measured_order, report.expected_order, report.leakage
        );
        for v in &report.verdicts {
            println!("  {v}");
        }
    }
    Ok(())
}
