//! Builds one member of every family and prints its cost summary.
//!
//! ```text
//! cargo run --release --example build_formulas
//! ```

use commsplit::builders::{build, Family};
use commsplit::formula::ProductFormula;

fn main() -> commsplit::error::Result<()> {
    let members = [
        (Family::Odd, 4, 1),
        (Family::Even, 4, 2),
        (Family::Nestf, 2, 3),
        (Family::Gc, 1, 3),
        (Family::Nestgc, 3, 2),
        (Family::Bgc, 3, 2),
        (Family::Jk, 2, 1),
    ];
    println!(
        "{:<8} {:>3} {:>2} {:>6} {:>3} {:>9} {:>9}",
        "family", "p2", "k", "N", "nu", "q_mean", "q_max"
    );
    for (family, p2, k) in members {
        let f = build(family, p2, k)?;
        let stats = f.stats();
        println!(
            "{:<8} {:>3} {:>2} {:>6} {:>3} {:>9.5} {:>9.5}",
            family.as_str(),
            p2,
            k,
            stats.n_terms,
            f.nu(),
            stats.q_mean,
            stats.q_max
        );
    }

    let f = build(Family::Odd, 2, 1)?;
    let restored = ProductFormula::from_json(&f.to_json())?;
    assert_eq!(f, restored);
    println!("\nodd p2=2 k=1 as JSON:\n{}", f.to_json());
    Ok(())
}
