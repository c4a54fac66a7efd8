//! Error against exponential count for the commutator families.
//!
//! ```text
//! cargo run --release --example compare_families
//! ```

use commsplit::demos::{compare, CompareConfig};

fn main() -> commsplit::error::Result<()> {
    let report = compare(&CompareConfig {
        max_log2_r: 14,
        ..CompareConfig::default()
    })?;
    for w in &report.warnings {
        println!("warning: {w}");
    }
    for c in &report.curves {
        let last = c.points.last().expect("non-empty curve");
        println!(
            "{:<7} p2={} N={:<5} error {:.3e} at N_exp={}",
            c.family, c.p2, c.n_terms, last.error, last.n_exp
        );
    }
    for m in &report.nestgc_vs_jk {
        println!(
            "p2={}: {} beats {} on {} matched points (worst log10 ratio {:.2})",
            m.p2, m.winner, m.loser, m.matched_points, m.worst_log10_ratio
        );
    }
    for v in &report.verdicts {
        println!("{v}");
    }
    Ok(())
}
