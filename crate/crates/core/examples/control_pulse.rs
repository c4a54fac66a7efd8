//! Synthesizes a rotation about a commutator axis from two control fields.
//!
//! ```text
//! cargo run --release --example control_pulse
//! ```

use commsplit::demos::{control, ControlConfig};

fn main() -> commsplit::error::Result<()> {
    let report = control(&ControlConfig::default())?;
    println!("pulse sequence length: {}", report.n_terms);
    println!(
        "error at t: {:.3e}, at t/2: {:.3e}",
        report.error, report.error_half_time
    );
    for (p2, err) in &report.errors_by_order {
        println!("  p2={p2}: error {err:.3e}");
    }
    for v in &report.verdicts {
        println!("{v}");
    }
    Ok(())
}
