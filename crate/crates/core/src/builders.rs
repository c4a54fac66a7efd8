//! Constructors for every formula family.
//!
//! * [`build_odd`] / [`build_odd_symmetrized`]: six-copy recursion on the
//!   group commutator for `e^{[A,B]t^{k+1}}`, `k` odd.
//! * [`build_even`]: five-copy recursion for even `k`.
//! * [`build_nested`]: level-by-level substitution for `e^{Z_k t^{k+1}}`.
//! * [`build_gc_base`] / [`build_nestgc`]: group-commutator tower refined by
//!   the generic five-copy recursion, one order per step.
//! * [`build_bgc`]: the eight-exponential `e^{-[A,[A,B]]t^3}` sequence and
//!   its refinements.
//! * [`build_jk`]: experimental three-copy comparator, verified numerically.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::formula::{ExpTerm, ProductFormula, SlotId, Symmetry, Target, SLOT_A, SLOT_B};

/// Coefficients of one odd-k recursion step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OddSchedule {
    pub p: u32,
    pub k: u32,
    pub r: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl OddSchedule {
    /// `4 gamma^m - 2 beta^m` with `m = 2p + k + 1`; zero by construction.
    pub fn root_residual(&self) -> f64 {
        let m = (2 * self.p + self.k + 1) as i32;
        4.0 * self.gamma.powi(m) - 2.0 * self.beta.powi(m)
    }
}

/// Coefficients of one even-k (or generic) recursion step at order
/// parameter `p = p2 / 2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvenSchedule {
    pub p2: u32,
    pub k: u32,
    pub s: f64,
    pub mu: f64,
    pub nu: f64,
}

impl EvenSchedule {
    /// `4 nu^m - mu^m` with `m = 2p + k + 1`; zero by construction.
    pub fn root_residual(&self) -> f64 {
        let m = (self.p2 + self.k + 1) as i32;
        4.0 * self.nu.powi(m) - self.mu.powi(m)
    }
}

pub fn coeff_odd(p: u32, k: u32) -> Result<OddSchedule> {
    if p == 0 {
        return Err(Error::InvalidArgument("p must be at least 1".into()));
    }
    if k == 0 || k.is_multiple_of(2) {
        return Err(Error::InvalidArgument(format!(
            "odd schedule needs odd k, got {k}"
        )));
    }
    let kp1 = f64::from(k + 1);
    let x = 2f64.powf(kp1 / f64::from(2 * p + k + 1));
    let r = x / (4.0 * (2.0 - x));
    Ok(OddSchedule {
        p,
        k,
        r,
        beta: (2.0 * r).powf(1.0 / kp1),
        gamma: (0.25 + r).powf(1.0 / kp1),
    })
}

/// Even schedule at `p = p2 / 2`; half-integer `p` is allowed.
pub fn coeff_even(p2: u32, k: u32) -> Result<EvenSchedule> {
    if p2 == 0 || k == 0 {
        return Err(Error::InvalidArgument(format!(
            "even schedule needs p2 >= 1 and k >= 1, got p2={p2}, k={k}"
        )));
    }
    let kp1 = f64::from(k + 1);
    let x = 4f64.powf(kp1 / f64::from(p2 + k + 1));
    let s = x / (4.0 * (4.0 - x));
    Ok(EvenSchedule {
        p2,
        k,
        s,
        mu: (4.0 * s).powf(1.0 / kp1),
        nu: (0.25 + s).powf(1.0 / kp1),
    })
}

fn two_slot(a: f64, b: f64) -> BTreeMap<SlotId, f64> {
    [(SLOT_A, a), (SLOT_B, b)].into_iter().collect()
}

/// Scales a two-operator formula as the substitution `t -> c t`.
fn dilate_pair(f: &ProductFormula, c: f64) -> Result<ProductFormula> {
    f.scale(&two_slot(c, c.powi(f.k() as i32)))
}

fn pair_target(k: u32) -> Target {
    if k == 1 {
        Target::Nested
    } else {
        Target::Commutator
    }
}

/// Claimed order of the odd-k formula at level `p`.
pub fn odd_nu(p: u32, k: u32) -> u32 {
    if p == 1 {
        k + 2
    } else if k == 1 {
        2 * p + 1
    } else {
        2 * p + k + 1
    }
}

/// `U_p` for odd `k`: `4 * 6^{p-1}` terms approximating `e^{[A,B]t^{k+1}}`.
pub fn build_odd(p: u32, k: u32) -> Result<ProductFormula> {
    coeff_odd(p, k)?;
    let mut u = ProductFormula::new(
        k,
        2,
        vec![
            ExpTerm::new(1, 1.0, 1),
            ExpTerm::new(0, 1.0, k),
            ExpTerm::new(1, -1.0, 1),
            ExpTerm::new(0, -1.0, k),
        ],
        Symmetry::Symmetric,
        k + 2,
        pair_target(k),
    )?;
    for level in 1..p {
        let sched = coeff_odd(level, k)?;
        let g_pos = dilate_pair(&u, sched.gamma)?;
        let g_neg = dilate_pair(&u, -sched.gamma)?;
        let b_pos = dilate_pair(&u, sched.beta)?.invert();
        let b_neg = dilate_pair(&u, -sched.beta)?.invert();
        let symmetry = u.symmetry().flipped();
        u = ProductFormula::concat_all(&[
            g_pos.clone(),
            g_neg.clone(),
            b_pos,
            b_neg,
            g_pos,
            g_neg,
        ])?
        .with_symmetry(symmetry)
        .with_order(2 * (level + 1), odd_nu(level + 1, k))?;
    }
    Ok(u)
}

/// `U'_p(At, Bt) = U_p(At/√2, Bt/√2) U_p(-At/√2, -Bt/√2)` for `k = 1`.
pub fn build_odd_symmetrized(p: u32) -> Result<ProductFormula> {
    let u = build_odd(p, 1)?;
    let c = std::f64::consts::FRAC_1_SQRT_2;
    let symmetry = u.symmetry().flipped();
    u.scale_uniform(c)?
        .concat(&u.scale_uniform(-c)?)?
        .with_symmetry(symmetry)
        .with_order(2 * p, 2 * p + 2)
}

/// `V_p` for even `k` without merging: exactly `5^p` terms.
pub fn build_even_raw(p: u32, k: u32) -> Result<ProductFormula> {
    build_even_impl(p, k, false)
}

/// `V_p` for even `k` with adjacent same-operator terms merged after every
/// composition.
pub fn build_even(p: u32, k: u32) -> Result<ProductFormula> {
    build_even_impl(p, k, true)
}

fn build_even_impl(p: u32, k: u32, merge: bool) -> Result<ProductFormula> {
    if p == 0 {
        return Err(Error::InvalidArgument("p must be at least 1".into()));
    }
    if k == 0 || k % 2 == 1 {
        return Err(Error::InvalidArgument(format!(
            "even recursion needs even k, got {k}"
        )));
    }
    let xi = 2f64.powf(-1.0 / f64::from(k + 1));
    let xk = xi.powi(k as i32);
    let mut v = ProductFormula::new(
        k,
        2,
        vec![
            ExpTerm::new(1, xi, 1),
            ExpTerm::new(0, xk, k),
            ExpTerm::new(1, -2.0 * xi, 1),
            ExpTerm::new(0, -xk, k),
            ExpTerm::new(1, xi, 1),
        ],
        Symmetry::None,
        k + 3,
        Target::Commutator,
    )?;
    for level in 1..p {
        let sched = coeff_even(2 * level, k)?;
        let outer = dilate_pair(&v, sched.nu)?;
        let middle = v.scale(&two_slot(-sched.mu, sched.mu.powi(k as i32)))?;
        let next = ProductFormula::concat_all(&[
            outer.clone(),
            outer.clone(),
            middle,
            outer.clone(),
            outer,
        ])?
        .with_order(2 * (level + 1), 2 * (level + 1) + k + 1)?;
        v = if merge { next.simplify(0.0) } else { next };
    }
    Ok(v)
}

/// Claimed order of the nested formula.
///
/// Each level keeps the smaller of its own order and the inner level's order
/// plus one (the inner error enters through a commutator with the new outer
/// operator). The `p = 1` group commutator at an odd level `q >= 3` only
/// reaches order `q + 2`.
pub fn nested_nu(p: u32, k: u32) -> u32 {
    let mut nu = 2 * p + 2;
    for q in 2..=k {
        let own = if q % 2 == 1 {
            odd_nu(p, q)
        } else {
            2 * p + q + 1
        };
        nu = own.min(nu + 1);
    }
    nu
}

/// Fully flattened nested formula over slots `0..=k`, every `tpow = 1`.
///
/// Level `q` takes the odd (`q` odd) or unmerged even (`q` even) formula
/// with `A = A_q` and replaces each `e^{c Z_{q-1} t^q}` by the level `q - 1`
/// formula scaled by `sign(c)|c|^{1/q}` (odd `q`) or by `|c|^{1/q}` and
/// inverted when `c < 0` (even `q`).
///
/// An odd level whose inner formula has even order uses the inverted form
/// for `c < 0` as well: a negative scale leaves an even-order inner error
/// with the same sign in both halves of each `±c` pair, so it would not
/// cancel. This only arises for `p = 1`, `k >= 5`.
pub fn build_nested(p: u32, k: u32) -> Result<ProductFormula> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    let mut inner = build_odd_symmetrized(p)?;
    for q in 2..=k {
        let outer = if q % 2 == 1 {
            build_odd(p, q)?
        } else {
            build_even_raw(p, q)?
        };
        let mut terms = Vec::new();
        for term in outer.terms() {
            if term.slot == SLOT_A {
                terms.push(ExpTerm::new(q, term.coeff, 1));
                continue;
            }
            let c = term.coeff;
            let root = c.abs().powf(1.0 / f64::from(q));
            let signed_root = q % 2 == 1 && inner.nu() % 2 == 1;
            let sub = if signed_root {
                inner.scale_uniform(root.copysign(c))?
            } else if c > 0.0 {
                inner.scale_uniform(root)?
            } else {
                inner.scale_uniform(root)?.invert()
            };
            terms.extend_from_slice(sub.terms());
        }
        inner = ProductFormula::new(
            q,
            2 * p,
            terms,
            Symmetry::None,
            nested_nu(p, q),
            Target::Nested,
        )?;
    }
    Ok(inner)
}

/// Group-commutator tower: `e^{A_k t} G e^{-A_k t} G^{-1}` with `G` the
/// level `k - 1` tower and `e^{A_0 t}` at level zero. Has `3 * 2^k - 2`
/// terms and order `k + 2`.
pub fn build_gc_base(k: u32) -> Result<ProductFormula> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    let mut terms = vec![ExpTerm::new(0, 1.0, 1)];
    for q in 1..=k {
        let inverse: Vec<ExpTerm> = terms
            .iter()
            .rev()
            .map(|t| ExpTerm {
                coeff: -t.coeff,
                ..*t
            })
            .collect();
        let mut next = Vec::with_capacity(2 * terms.len() + 2);
        next.push(ExpTerm::new(q, 1.0, 1));
        next.extend_from_slice(&terms);
        next.push(ExpTerm::new(q, -1.0, 1));
        next.extend(inverse);
        terms = next;
    }
    let symmetry = if k == 1 {
        Symmetry::Symmetric
    } else {
        Symmetry::None
    };
    ProductFormula::new(k, 1, terms, symmetry, k + 2, Target::Nested)
}

/// One application of `W(ν)^2 W(μ)^{-1} W(ν)^2`, raising the order by one.
fn generic_step(w: &ProductFormula) -> Result<ProductFormula> {
    let sched = coeff_even(w.p2(), w.k())?;
    let outer = w.scale_uniform(sched.nu)?;
    let middle = w.scale_uniform(sched.mu)?.invert();
    ProductFormula::concat_all(&[outer.clone(), outer.clone(), middle, outer.clone(), outer])?
        .with_order(w.p2() + 1, w.nu() + 1)
}

/// Generic nested formula at `p = p2 / 2`: `p2 - 1` generic steps on top of
/// [`build_gc_base`]. Has `5^{p2-1} (3 * 2^k - 2)` terms and order
/// `p2 + k + 1`.
pub fn build_nestgc(p2: u32, k: u32) -> Result<ProductFormula> {
    if p2 == 0 {
        return Err(Error::InvalidArgument("p2 must be at least 1".into()));
    }
    let mut w = build_gc_base(k)?;
    for _ in 1..p2 {
        w = generic_step(&w)?;
    }
    Ok(w)
}

/// Eight-exponential sequence for `e^{-[A,[A,B]]t^3}` (A = slot 1,
/// B = slot 0), refined by `p2 - 1` generic steps. Order `p2 + 3`.
pub fn build_bgc(p2: u32) -> Result<ProductFormula> {
    build_bgc_with(p2, false)
}

/// [`build_bgc`] with an optional bonus for operators satisfying
/// `[A,[B,[B,A]]] = 0` (Pauli pairs, for instance), which lifts the
/// unrefined sequence to order 5. Refined formulas are unaffected.
pub fn build_bgc_with(p2: u32, pauli_bonus: bool) -> Result<ProductFormula> {
    if p2 == 0 {
        return Err(Error::InvalidArgument("p2 must be at least 1".into()));
    }
    let pattern = [-1.0, -1.0, 1.0, 1.0, 1.0, -1.0, -1.0, 1.0];
    let terms = pattern
        .iter()
        .enumerate()
        .map(|(i, c)| ExpTerm::new(if i % 2 == 0 { 1 } else { 0 }, *c, 1))
        .collect();
    let nu = if pauli_bonus && p2 == 1 { 5 } else { 4 };
    let mut w = ProductFormula::new(2, 1, terms, Symmetry::None, nu, Target::DoubleCommutator)?;
    for _ in 1..p2 {
        let next_nu = w.p2() + 4;
        w = generic_step(&w)?.with_order(w.p2() + 1, next_nu)?;
    }
    Ok(w)
}

/// Coefficients `(alpha, beta)` of a three-copy step at current order `nu`:
/// `2 alpha^{k+1} - beta^{k+1} = 1` and `2 alpha^nu - beta^nu = 0`.
pub fn jk_coefficients(nu: u32, k: u32) -> (f64, f64) {
    let kp1 = f64::from(k + 1);
    let nu = f64::from(nu);
    let alpha = (1.0 / (2.0 - 2f64.powf(kp1 / nu))).powf(1.0 / kp1);
    (alpha, 2f64.powf(1.0 / nu) * alpha)
}

/// Three-copy refinement `W(α) W(β)^{-1} W(α)` of [`build_gc_base`], without
/// numerical verification. Has `3^{p2-1} (3 * 2^k - 2)` terms.
pub fn build_jk_unverified(p2: u32, k: u32) -> Result<ProductFormula> {
    if p2 == 0 {
        return Err(Error::InvalidArgument("p2 must be at least 1".into()));
    }
    let mut w = build_gc_base(k)?;
    for _ in 1..p2 {
        let (alpha, beta) = jk_coefficients(w.nu(), k);
        let outer = w.scale_uniform(alpha)?;
        let middle = w.scale_uniform(beta)?.invert();
        w = ProductFormula::concat_all(&[outer.clone(), middle, outer])?
            .with_order(w.p2() + 1, w.nu() + 1)?;
    }
    Ok(w)
}

/// Seed of the random operators used to verify [`build_jk`].
pub const JK_VERIFY_SEED: u64 = 0x4a4b;

/// [`build_jk_unverified`] gated by an order scan on seeded random
/// anti-Hermitian operators; a fitted order below `nu - 0.5` is reported as
/// [`Error::ConstructionUnverified`].
pub fn build_jk(p2: u32, k: u32) -> Result<ProductFormula> {
    let w = build_jk_unverified(p2, k)?;
    let fitted = crate::evaluator::verify_order(&w, 4, JK_VERIFY_SEED)?;
    let required = f64::from(w.nu()) - 0.5;
    if fitted < required {
        return Err(Error::ConstructionUnverified { fitted, required });
    }
    Ok(w)
}

/// Formula families exposed by name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    Odd,
    Even,
    Nestf,
    Nestgc,
    Bgc,
    Gc,
    Jk,
}

impl Family {
    pub const ALL: [Family; 7] = [
        Family::Odd,
        Family::Even,
        Family::Nestf,
        Family::Nestgc,
        Family::Bgc,
        Family::Gc,
        Family::Jk,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Family::Odd => "odd",
            Family::Even => "even",
            Family::Nestf => "nestf",
            Family::Nestgc => "nestgc",
            Family::Bgc => "bgc",
            Family::Gc => "gc",
            Family::Jk => "jk",
        }
    }

    /// Whether `p2` may be odd (half-integer `p`).
    pub fn allows_half_integer(self) -> bool {
        matches!(self, Family::Nestgc | Family::Bgc | Family::Gc | Family::Jk)
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Family::ALL
            .into_iter()
            .find(|f| f.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown family '{s}'")))
    }
}

fn integer_p(family: Family, p2: u32) -> Result<u32> {
    if p2 == 0 || p2 % 2 == 1 {
        return Err(Error::InvalidArgument(format!(
            "family {family} needs an even p2 (integer p), got {p2}"
        )));
    }
    Ok(p2 / 2)
}

/// Builds any family from `(p2, k)`. Integer-order families take `p = p2/2`;
/// `gc` requires `p2 = 1`; `bgc` requires `k = 2`.
pub fn build(family: Family, p2: u32, k: u32) -> Result<ProductFormula> {
    match family {
        Family::Odd => build_odd(integer_p(family, p2)?, k),
        Family::Even => build_even(integer_p(family, p2)?, k),
        Family::Nestf => build_nested(integer_p(family, p2)?, k),
        Family::Nestgc => build_nestgc(p2, k),
        Family::Gc => {
            if p2 != 1 {
                return Err(Error::InvalidArgument(format!("gc has p2 = 1, got {p2}")));
            }
            build_gc_base(k)
        }
        Family::Bgc => {
            if k != 2 {
                return Err(Error::InvalidArgument(format!("bgc has k = 2, got {k}")));
            }
            build_bgc(p2)
        }
        Family::Jk => build_jk(p2, k),
    }
}

/// Term count, absolute coefficient sum and largest magnitude of a formula,
/// computed from its recursion without building it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostSummary {
    pub n_terms: f64,
    pub abs_sum: f64,
    pub q_max: f64,
}

impl CostSummary {
    pub fn q_mean(&self) -> f64 {
        self.abs_sum / self.n_terms
    }
}

/// Per-slot summary of a two-operator formula where `B` terms are measured
/// through `|c|^{1/q}`, the factor the nested substitution applies.
struct PairSummary {
    n_a: f64,
    sum_a: f64,
    max_a: f64,
    n_b: f64,
    root_sum_b: f64,
    root_max_b: f64,
}

fn odd_summary(p: u32, q: u32) -> Result<PairSummary> {
    let mut s = PairSummary {
        n_a: 2.0,
        sum_a: 2.0,
        max_a: 1.0,
        n_b: 2.0,
        root_sum_b: 2.0,
        root_max_b: 1.0,
    };
    for level in 1..p {
        let sched = coeff_odd(level, q)?;
        let factor = 4.0 * sched.gamma + 2.0 * sched.beta;
        let grow = sched.gamma.max(sched.beta);
        s.n_a *= 6.0;
        s.n_b *= 6.0;
        s.sum_a *= factor;
        s.root_sum_b *= factor;
        s.max_a *= grow;
        s.root_max_b *= grow;
    }
    Ok(s)
}

fn even_summary(p: u32, q: u32) -> Result<PairSummary> {
    let xi = 2f64.powf(-1.0 / f64::from(q + 1));
    let mut s = PairSummary {
        n_a: 3.0,
        sum_a: 4.0 * xi,
        max_a: 2.0 * xi,
        n_b: 2.0,
        root_sum_b: 2.0 * xi,
        root_max_b: xi,
    };
    for level in 1..p {
        let sched = coeff_even(2 * level, q)?;
        let factor = 4.0 * sched.nu + sched.mu;
        let grow = sched.nu.max(sched.mu);
        s.n_a *= 5.0;
        s.n_b *= 5.0;
        s.sum_a *= factor;
        s.root_sum_b *= factor;
        s.max_a *= grow;
        s.root_max_b *= grow;
    }
    Ok(s)
}

/// [`CostSummary`] of [`build_nested`]`(p, k)`.
pub fn nested_summary(p: u32, k: u32) -> Result<CostSummary> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    let base = odd_summary(p, 1)?;
    let c = std::f64::consts::FRAC_1_SQRT_2;
    let mut out = CostSummary {
        n_terms: 2.0 * (base.n_a + base.n_b),
        abs_sum: 2.0 * c * (base.sum_a + base.root_sum_b),
        q_max: c * base.max_a.max(base.root_max_b),
    };
    for q in 2..=k {
        let s = if q % 2 == 1 {
            odd_summary(p, q)?
        } else {
            even_summary(p, q)?
        };
        out = CostSummary {
            n_terms: s.n_a + s.n_b * out.n_terms,
            abs_sum: s.sum_a + s.root_sum_b * out.abs_sum,
            q_max: s.max_a.max(s.root_max_b * out.q_max),
        };
    }
    Ok(out)
}

/// [`CostSummary`] of [`build_nestgc`]`(p2, k)`.
pub fn nestgc_summary(p2: u32, k: u32) -> Result<CostSummary> {
    if p2 == 0 || k == 0 {
        return Err(Error::InvalidArgument("p2 and k must be at least 1".into()));
    }
    let mut out = CostSummary {
        n_terms: 1.0,
        abs_sum: 1.0,
        q_max: 1.0,
    };
    for _ in 1..=k {
        out.n_terms = 2.0 * out.n_terms + 2.0;
        out.abs_sum = 2.0 * out.abs_sum + 2.0;
    }
    for step in 1..p2 {
        let sched = coeff_even(step, k)?;
        out.n_terms *= 5.0;
        out.abs_sum *= 4.0 * sched.nu + sched.mu;
        out.q_max *= sched.nu.max(sched.mu);
    }
    Ok(out)
}

/// Closed-form count of [`build_nested`] terms.
pub fn nested_count(p: u32, k: u32) -> u128 {
    let mut n = 8 * 6u128.pow(p - 1);
    for q in 2..=k {
        n = if q % 2 == 0 {
            5u128.pow(p - 1) * (3 + 2 * n)
        } else {
            2 * 6u128.pow(p - 1) * (1 + n)
        };
    }
    n
}

/// Closed-form count of [`build_nestgc`] terms.
pub fn nestgc_count(p2: u32, k: u32) -> u128 {
    5u128.pow(p2 - 1) * (3 * (1u128 << k) - 2)
}
