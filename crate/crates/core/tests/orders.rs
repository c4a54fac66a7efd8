//! Fitted convergence orders on random anti-Hermitian operators.

use commsplit::builders::*;
use commsplit::evaluator::{order_scan_auto, random_operator_set};
use commsplit::formula::ProductFormula;
use rayon::prelude::*;

const BELOW: f64 = 0.25;
const ABOVE: f64 = 1.0;

fn catalogue() -> Vec<(String, ProductFormula)> {
    let mut out = Vec::new();
    let mut add =
        |name: String, f: commsplit::error::Result<ProductFormula>| out.push((name, f.unwrap()));
    for p in 1..=3 {
        add(format!("odd p={p} k=1"), build_odd(p, 1));
    }
    for p in 1..=2 {
        add(format!("odd p={p} k=3"), build_odd(p, 3));
        add(format!("even p={p} k=2"), build_even(p, 2));
        add(format!("symmetrized p={p}"), build_odd_symmetrized(p));
    }
    add("even p=1 k=4".into(), build_even(1, 4));
    for (p, k) in [(1, 2), (2, 2), (1, 3), (2, 3), (1, 4)] {
        add(format!("nestf p={p} k={k}"), build_nested(p, k));
    }
    for k in 1..=4 {
        add(format!("gc k={k}"), build_gc_base(k));
    }
    for (p2, k) in [(2, 1), (3, 1), (4, 1), (2, 2), (3, 2), (2, 3)] {
        add(format!("nestgc p2={p2} k={k}"), build_nestgc(p2, k));
    }
    for p2 in 1..=3 {
        add(format!("bgc p2={p2}"), build_bgc(p2));
    }
    for p2 in 2..=3 {
        add(format!("jk p2={p2} k=1"), build_jk(p2, 1));
    }
    out
}

fn check_dim(dim: usize, seed: u64) {
    let failures: Vec<String> = catalogue()
        .par_iter()
        .filter_map(|(name, f)| {
            let ops = random_operator_set(f.n_slots(), dim, seed).unwrap();
            let slope = order_scan_auto(f, &ops).unwrap().fitted_slope;
            let nu = f64::from(f.nu());
            (slope < nu - BELOW || slope > nu + ABOVE)
                .then(|| format!("{name}: fitted {slope:.3}, claimed {nu}"))
        })
        .collect();
    assert!(failures.is_empty(), "dim {dim}: {failures:#?}");
}

#[test]
fn orders_on_random_4x4() {
    check_dim(4, 11);
}

#[test]
fn orders_on_random_8x8() {
    check_dim(8, 12);
}
