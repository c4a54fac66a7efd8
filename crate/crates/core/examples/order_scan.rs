//! Fits convergence orders on Pauli and random operators.
//!
//! ```text
//! cargo run --release --example order_scan
//! ```

use commsplit::builders::{build_bgc, build_even, build_odd};
use commsplit::evaluator::{order_scan, pauli_xz, random_operator_set, reference_grid};

fn main() -> commsplit::error::Result<()> {
    let grid = reference_grid();
    let formulas = [
        ("odd p=1 k=1", build_odd(1, 1)?),
        ("odd p=2 k=1", build_odd(2, 1)?),
        ("odd p=3 k=1", build_odd(3, 1)?),
        ("even p=1 k=2", build_even(1, 2)?),
        ("even p=2 k=2", build_even(2, 2)?),
        ("bgc p2=3", build_bgc(3)?),
    ];
    println!(
        "{:<14} {:>3} {:>8} {:>8}",
        "formula", "nu", "pauli", "random"
    );
    for (name, f) in &formulas {
        let pauli = order_scan(f, &pauli_xz(f)?, &grid)?;
        let random = order_scan(f, &random_operator_set(f.n_slots(), 6, 1)?, &grid)?;
        println!(
            "{name:<14} {:>3} {:>8.3} {:>8.3}",
            f.nu(),
            pauli.fitted_slope,
            random.fitted_slope
        );
    }

    let f = build_odd(2, 1)?;
    let scan = order_scan(&f, &pauli_xz(&f)?, &grid)?;
    println!("\nfirst rows of the odd p=2 k=1 scan:");
    for line in scan.to_csv().lines().take(12) {
        println!("{line}");
    }
    Ok(())
}
