//! Unstructured search driven by a commutator of projector exponentials.
//!
//! ```text
//! cargo run --release --example grover_search
//! ```

use commsplit::demos::{all_pass, grover, GroverConfig};

fn main() -> commsplit::error::Result<()> {
    for n in [16, 64] {
        let report = grover(&GroverConfig {
            n,
            marked: n / 3,
            ..GroverConfig::default()
        })?;
        println!(
            "n={n}: t={:.4}, p2={}, r={}, N_exp={} ({:.3e} per sqrt(n)), fidelity exact {:.12} formula {:.9}",
            report.time,
            report.p2,
            report.r,
            report.n_exp,
            report.n_exp_per_sqrt_n,
            report.exact_fidelity,
            report.formula_fidelity
        );
        for v in &report.verdicts {
            println!("  {v}");
        }
        assert!(all_pass(&report.verdicts));
    }
    Ok(())
}
