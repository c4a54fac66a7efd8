//! Toric code evolution on the 2x2 torus, one dilated two-body formula per
//! stabilizer. Takes a few minutes in release mode.
//!
//! ```text
//! cargo run --release --example toric_code
//! ```

use commsplit::demos::{toric, ToricConfig};

fn main() -> commsplit::error::Result<()> {
    let report = toric(&ToricConfig::default())?;
    println!(
        "qubits: {}, stabilizer factors: {}",
        report.qubits, report.n_factors
    );
    println!(
        "largest stabilizer commutator: {:.1e}",
        report.max_stabilizer_commutator
    );
    println!(
        "factorization residual: {:.1e}",
        report.factorization_residual
    );
    println!(
        "formula: {} terms, order {}; r vertex {} plaquette {} ({:?})",
        report.formula_terms,
        report.nu,
        report.steps_vertex,
        report.steps_plaquette,
        report.step_source
    );
    if let Some(note) = &report.planner_note {
        println!("planner: {note}");
    }
    println!("two-body exponentials: {}", report.two_body_exponentials);
    for v in &report.verdicts {
        println!("{v}");
    }
    Ok(())
}
