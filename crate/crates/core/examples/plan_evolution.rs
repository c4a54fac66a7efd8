//! Plans a segmented evolution, checks it numerically and searches the
//! order parameter that minimizes the exponential count.
//!
//! ```text
//! cargo run --release --example plan_evolution
//! ```

use commsplit::builders::{build_odd, Family};
use commsplit::evaluator::{pauli_xz, segment_error};
use commsplit::planner::{epsilon_threshold, optimal_p, plan_formula, popt_estimate, BoundInputs};

fn main() -> commsplit::error::Result<()> {
    let (lambda, t, epsilon) = (2.0, 1.0, 1e-6);
    let f = build_odd(2, 1)?;
    let ops = pauli_xz(&f)?;
    let plan = plan_formula(&f, "odd", lambda, t, epsilon, Some(&ops))?;
    println!("{}", plan.to_json());
    let inputs = BoundInputs::from_formula(&f, lambda, t, epsilon)?;
    println!(
        "ε below which the small-time assumption holds automatically: {:.6e}",
        epsilon_threshold(&inputs)
    );

    let measured = segment_error(&f, &ops, t, plan.r)?;
    println!(
        "measured error with r={}: {measured:.3e} (target {epsilon:e})",
        plan.r
    );

    println!("\noptimal nestf order by evolution time, k=1:");
    for t in [0.5, 1.0, 2.0, 4.0, 8.0] {
        let best = optimal_p(Family::Nestf, 1, lambda, t, epsilon, 5)?;
        let estimate = popt_estimate(Family::Nestf, 1, lambda, t, epsilon, 5)?;
        println!(
            "t={t:<4} p={} N_exp={:<16} r={:<14} estimate p={}",
            best.p2 / 2,
            best.n_exp,
            best.plan.r,
            estimate / 2
        );
    }
    Ok(())
}
