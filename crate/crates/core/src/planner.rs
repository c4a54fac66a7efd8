//! Error bounds and step-count planning.
//!
//! For a formula of order `nu` with `N` terms of mean magnitude `Q` on
//! operators bounded by `Λ/2`, a single step of duration `t` errs by at most
//! `(e N Q Λ t / nu^{1/(k+1)})^nu` provided
//!
//! 1. `nu > k + 1`,
//! 3. `Λ >= 2 ||A_j||`,
//! 4. `Λ t <= ln 2 / (N Q)`,
//! 5. `N Q >= 1`.
//!
//! Splitting the evolution into `r` steps of duration `t / r^{1/(k+1)}` meets
//! a total error `ε` once `r >= (X^nu / ε)^{(k+1)/p2}` with
//! `X = e N Q Λ t / nu^{1/(k+1)}` and `p2 = nu - k - 1`. Everything is
//! evaluated in log space.

use std::f64::consts::LN_2;

use rayon::prelude::*;
use serde::ser::SerializeMap;
use serde::{Serialize, Serializer};

use crate::builders::{nested_nu, nested_summary, nestgc_summary, Family};
use crate::error::{Error, Result};
use crate::formula::ProductFormula;
use crate::linalg::OperatorSet;

/// Largest step count representable by the planner.
pub const MAX_STEPS: u64 = i64::MAX as u64;

/// Relative slack on computed operator norms in the `Λ` check.
pub const NORM_RTOL: f64 = 1e-12;

/// Inputs of the single-step bound and the step-count inequality.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundInputs {
    /// `2p`, so the order is `nu = p2 + k + 1`.
    pub p2: u32,
    pub k: u32,
    pub n_terms: u64,
    /// Bound on the mean `|coeff|`.
    pub q: f64,
    pub lambda: f64,
    pub t: f64,
    pub epsilon: f64,
}

impl BoundInputs {
    /// Inputs for a built formula. The order parameter is taken from the
    /// formula's claimed order, `p2 = nu - k - 1`, and `q` is its mean
    /// `|coeff|`. Only formulas whose terms all carry `t^1` are covered.
    pub fn from_formula(f: &ProductFormula, lambda: f64, t: f64, epsilon: f64) -> Result<Self> {
        if f.terms().iter().any(|term| term.tpow != 1) {
            return Err(Error::InvalidArgument(
                "the error bound covers formulas whose terms all carry t^1".into(),
            ));
        }
        let inputs = Self {
            p2: f.nu() - f.k() - 1,
            k: f.k(),
            n_terms: f.len() as u64,
            q: f.stats().q_mean,
            lambda,
            t,
            epsilon,
        };
        inputs.validate()?;
        Ok(inputs)
    }

    pub fn nu(&self) -> u32 {
        self.p2 + self.k + 1
    }

    /// `N Q`.
    pub fn nq(&self) -> f64 {
        self.n_terms as f64 * self.q
    }

    /// Same inputs at a different time.
    pub fn at_time(&self, t: f64) -> Self {
        Self { t, ..*self }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if self.p2 == 0 || self.k == 0 || self.n_terms == 0 {
            return Err(Error::InvalidArgument(
                "p2, k and n_terms must be positive".into(),
            ));
        }
        if !(positive(self.q)
            && positive(self.lambda)
            && positive(self.t)
            && positive(self.epsilon))
        {
            return Err(Error::InvalidArgument(format!(
                "q, lambda, t and epsilon must be positive and finite: {self:?}"
            )));
        }
        Ok(())
    }

    /// `ln X` with `X = e N Q Λ t / nu^{1/(k+1)}`.
    fn ln_x(&self) -> f64 {
        1.0 + self.nq().ln() + self.lambda.ln() + self.t.ln()
            - f64::from(self.nu()).ln() / f64::from(self.k + 1)
    }
}

/// Outcome of one assumption check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AssumptionCheck {
    pub id: u8,
    #[serde(skip)]
    pub name: &'static str,
    /// `None` when the check needs operators that were not supplied.
    pub ok: Option<bool>,
    /// Slack of the inequality; negative when violated.
    pub margin: Option<f64>,
}

/// Pass/fail for assumptions 1, 3, 4 and 5.
#[derive(Debug, Clone, PartialEq)]
pub struct AssumptionReport {
    pub checks: Vec<AssumptionCheck>,
}

impl AssumptionReport {
    /// True when no evaluated check failed.
    pub fn all_ok(&self) -> bool {
        self.checks.iter().all(|c| c.ok != Some(false))
    }

    pub fn get(&self, id: u8) -> Option<&AssumptionCheck> {
        self.checks.iter().find(|c| c.id == id)
    }

    pub fn first_failure(&self) -> Option<&AssumptionCheck> {
        self.checks.iter().find(|c| c.ok == Some(false))
    }
}

impl Serialize for AssumptionReport {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(Some(self.checks.len()))?;
        for c in &self.checks {
            map.serialize_entry(c.name, c)?;
        }
        map.end()
    }
}

fn check(id: u8, name: &'static str, margin: f64) -> AssumptionCheck {
    AssumptionCheck {
        id,
        name,
        ok: Some(margin >= 0.0),
        margin: Some(margin),
    }
}

/// Evaluates the bound's assumptions. Assumption 3 is only checked when
/// operators are supplied.
pub fn check_assumptions(inputs: &BoundInputs, ops: Option<&OperatorSet>) -> AssumptionReport {
    let nu = f64::from(inputs.nu());
    let nq = inputs.nq();
    let lambda_check = match ops {
        Some(ops) => check(
            3,
            "lambda_bound",
            inputs.lambda - 2.0 * ops.max_norm() * (1.0 - NORM_RTOL),
        ),
        None => AssumptionCheck {
            id: 3,
            name: "lambda_bound",
            ok: None,
            margin: None,
        },
    };
    AssumptionReport {
        checks: vec![
            check(1, "order", nu - f64::from(inputs.k + 2)),
            lambda_check,
            check(4, "small_time", LN_2 / nq - inputs.lambda * inputs.t),
            check(5, "nq_at_least_one", nq - 1.0),
        ],
    }
}

fn violated(c: &AssumptionCheck) -> Error {
    Error::AssumptionViolated {
        id: c.id,
        name: c.name,
        margin: c.margin.unwrap_or(f64::NAN),
    }
}

/// `(e N Q Λ t / nu^{1/(k+1)})^nu`, the single-step error bound.
pub fn remainder_bound(inputs: &BoundInputs) -> Result<f64> {
    inputs.validate()?;
    if let Some(c) = check_assumptions(inputs, None).first_failure() {
        return Err(violated(c));
    }
    Ok(remainder_bound_unchecked(inputs))
}

/// The closed form without assumption checks.
pub fn remainder_bound_unchecked(inputs: &BoundInputs) -> f64 {
    (f64::from(inputs.nu()) * inputs.ln_x()).exp()
}

/// Whether `r` steps satisfy the step-count inequality, in log form:
/// `nu ln X - ln ε <= (p2 / (k+1)) ln r`.
pub fn steps_satisfy(inputs: &BoundInputs, r: u64) -> bool {
    let lhs = f64::from(inputs.nu()) * inputs.ln_x() - inputs.epsilon.ln();
    let rhs = f64::from(inputs.p2) / f64::from(inputs.k + 1) * (r as f64).ln();
    lhs <= rhs
}

/// Smallest `r >= 1` with `r` satisfying `pred`, starting from the estimate
/// `ln_r` and stepping to the exact boundary.
fn minimal_steps(ln_r: f64, what: &str, pred: impl Fn(u64) -> bool) -> Result<u64> {
    if !ln_r.is_finite() && ln_r > 0.0 || ln_r > (MAX_STEPS as f64).ln() {
        return Err(Error::Capacity(format!(
            "{what} needs more than 2^63 - 1 steps (ln r = {ln_r:.3})"
        )));
    }
    let mut r = if ln_r <= 0.0 {
        1
    } else {
        (ln_r.exp().ceil() as u64).clamp(1, MAX_STEPS)
    };
    while r > 1 && pred(r - 1) {
        r -= 1;
    }
    while !pred(r) {
        if r == MAX_STEPS {
            return Err(Error::Capacity(format!(
                "{what} needs more than 2^63 - 1 steps"
            )));
        }
        r += 1;
    }
    Ok(r)
}

/// Smallest integer `r` with `r >= (X^nu / ε)^{(k+1)/p2}`.
pub fn steps_required(inputs: &BoundInputs) -> Result<u64> {
    inputs.validate()?;
    let ln_r = f64::from(inputs.k + 1) / f64::from(inputs.p2)
        * (f64::from(inputs.nu()) * inputs.ln_x() - inputs.epsilon.ln());
    minimal_steps(ln_r, "the error target", |r| steps_satisfy(inputs, r))
}

/// The ε below which the per-step time automatically satisfies
/// assumption 4: `(e / nu^{1/(k+1)})^nu (ln 2)^{p2} (N Q Λ t)^{k+1}`.
pub fn epsilon_threshold(inputs: &BoundInputs) -> f64 {
    let nu = f64::from(inputs.nu());
    let kp1 = f64::from(inputs.k + 1);
    let ln = nu * (1.0 - nu.ln() / kp1)
        + f64::from(inputs.p2) * LN_2.ln()
        + kp1 * (inputs.nq() * inputs.lambda * inputs.t).ln();
    ln.exp()
}

/// `N * steps_required`.
pub fn total_exponentials(inputs: &BoundInputs) -> Result<u128> {
    Ok(u128::from(inputs.n_terms) * u128::from(steps_required(inputs)?))
}

/// How the per-step assumptions 4 and 5 were established.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum AssumptionPath {
    /// ε is below [`epsilon_threshold`], which implies assumption 4.
    Corollary,
    /// Checked directly on the per-step inputs.
    Explicit,
}

/// A segmented evolution meeting the error target.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvolutionPlan {
    pub family: String,
    pub p2: u32,
    pub k: u32,
    pub nu: u32,
    pub n_terms: u64,
    pub q: f64,
    pub lambda: f64,
    pub t: f64,
    pub epsilon: f64,
    pub r: u64,
    pub step_time: f64,
    pub n_exp: u128,
    /// `r` times the single-step bound at `step_time`.
    pub bound: f64,
    pub assumption_path: AssumptionPath,
    /// Assumptions evaluated on the per-step inputs.
    pub assumptions: AssumptionReport,
}

impl EvolutionPlan {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plans always serialize")
    }
}

/// Plans `r` steps meeting `inputs.epsilon`.
///
/// `r` is the larger of [`steps_required`] and the smallest count whose step
/// time satisfies assumption 4; the total bound only shrinks as `r` grows.
/// Failing assumption 1, 3 (with operators) or 5 makes the plan infeasible.
pub fn plan(
    inputs: &BoundInputs,
    family: &str,
    ops: Option<&OperatorSet>,
) -> Result<EvolutionPlan> {
    inputs.validate()?;
    let upfront = check_assumptions(inputs, ops);
    for id in [1u8, 3, 5] {
        if let Some(c) = upfront.get(id).filter(|c| c.ok == Some(false)) {
            return Err(Error::Infeasible(format!(
                "assumption {} ({}) fails with margin {:e}",
                c.id,
                c.name,
                c.margin.unwrap_or(f64::NAN)
            )));
        }
    }
    let r_bound = steps_required(inputs)?;
    let k = inputs.k;
    let threshold = epsilon_threshold(inputs);
    let assumption_path = if inputs.epsilon <= threshold {
        AssumptionPath::Corollary
    } else {
        AssumptionPath::Explicit
    };
    let kp1 = f64::from(k + 1);
    let small_time_ok = |r: u64| {
        let step = inputs.t / (r as f64).powf(1.0 / kp1);
        inputs.lambda * step <= LN_2 / inputs.nq()
    };
    let ln_r_small = kp1 * (inputs.lambda * inputs.t * inputs.nq() / LN_2).ln();
    let r_small = minimal_steps(ln_r_small, "the small-time assumption", small_time_ok)?;
    let r = r_bound.max(r_small);
    let step_time = inputs.t / (r as f64).powf(1.0 / kp1);
    let per_step = inputs.at_time(step_time);
    let assumptions = check_assumptions(&per_step, ops);
    if let Some(c) = assumptions.first_failure() {
        return Err(Error::Infeasible(format!(
            "per-step assumption {} ({}) fails with margin {:e}",
            c.id,
            c.name,
            c.margin.unwrap_or(f64::NAN)
        )));
    }
    let bound = r as f64 * remainder_bound(&per_step)?;
    Ok(EvolutionPlan {
        family: family.to_string(),
        p2: inputs.p2,
        k,
        nu: inputs.nu(),
        n_terms: inputs.n_terms,
        q: inputs.q,
        lambda: inputs.lambda,
        t: inputs.t,
        epsilon: inputs.epsilon,
        r,
        step_time,
        n_exp: u128::from(inputs.n_terms) * u128::from(r),
        bound,
        assumption_path,
        assumptions,
    })
}

/// Plan for a built formula.
pub fn plan_formula(
    f: &ProductFormula,
    family: &str,
    lambda: f64,
    t: f64,
    epsilon: f64,
    ops: Option<&OperatorSet>,
) -> Result<EvolutionPlan> {
    plan(
        &BoundInputs::from_formula(f, lambda, t, epsilon)?,
        family,
        ops,
    )
}

/// Order parameter, cost and order of one family member, without building it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    /// Construction parameter (`2p` for nestf, the step count for nestgc).
    pub p2: u32,
    pub nu: u32,
    pub n_terms: u64,
    pub q: f64,
}

/// Summary of the `nestf` or `nestgc` member with parameter `p2`.
pub fn candidate(family: Family, p2: u32, k: u32) -> Result<Candidate> {
    let (summary, nu) = match family {
        Family::Nestf => {
            if p2 % 2 == 1 {
                return Err(Error::InvalidArgument("nestf needs an even p2".into()));
            }
            (nested_summary(p2 / 2, k)?, nested_nu(p2 / 2, k))
        }
        Family::Nestgc => (nestgc_summary(p2, k)?, p2 + k + 1),
        other => {
            return Err(Error::InvalidArgument(format!(
                "order search covers nestf and nestgc, not {other}"
            )))
        }
    };
    if summary.n_terms > 2f64.powi(53) {
        return Err(Error::Capacity(format!(
            "{family} p2={p2} k={k} has too many terms"
        )));
    }
    Ok(Candidate {
        p2,
        nu,
        n_terms: summary.n_terms as u64,
        q: summary.q_mean(),
    })
}

/// Result of [`optimal_p`].
#[derive(Debug, Clone, PartialEq)]
pub struct OptimalChoice {
    pub p2: u32,
    pub n_exp: u128,
    pub plan: EvolutionPlan,
}

/// Exhaustive search over `p <= p_max` (integer `p` for nestf, half-integer
/// for nestgc) for the smallest total exponential count. Ties go to the
/// smaller `p`.
pub fn optimal_p(
    family: Family,
    k: u32,
    lambda: f64,
    t: f64,
    epsilon: f64,
    p_max: u32,
) -> Result<OptimalChoice> {
    if p_max == 0 {
        return Err(Error::InvalidArgument("p_max must be at least 1".into()));
    }
    let p2s: Vec<u32> = match family {
        Family::Nestf => (1..=p_max).map(|p| 2 * p).collect(),
        Family::Nestgc => (1..=2 * p_max).collect(),
        other => {
            return Err(Error::InvalidArgument(format!(
                "order search covers nestf and nestgc, not {other}"
            )))
        }
    };
    let results: Vec<(u32, Result<EvolutionPlan>)> = p2s
        .par_iter()
        .map(|&p2| {
            let outcome = candidate(family, p2, k).and_then(|c| {
                let inputs = BoundInputs {
                    p2: c.nu - k - 1,
                    k,
                    n_terms: c.n_terms,
                    q: c.q,
                    lambda,
                    t,
                    epsilon,
                };
                plan(&inputs, family.as_str(), None).map(|mut plan| {
                    plan.p2 = p2;
                    plan
                })
            });
            (p2, outcome)
        })
        .collect();
    let mut best: Option<OptimalChoice> = None;
    let mut reasons = Vec::new();
    for (p2, outcome) in results {
        match outcome {
            Ok(plan) => {
                if best.as_ref().is_none_or(|b| plan.n_exp < b.n_exp) {
                    best = Some(OptimalChoice {
                        p2,
                        n_exp: plan.n_exp,
                        plan,
                    });
                }
            }
            Err(e) => reasons.push(format!("p2={p2}: {e}")),
        }
    }
    best.ok_or_else(|| {
        Error::Infeasible(format!(
            "no order parameter up to p={p_max} is feasible; subdivide t further ({})",
            reasons.join("; ")
        ))
    })
}

/// Diagnostic estimate of the optimal `p`: the smallest integer `p` with
/// `(k+2) ln N_p >= ((k+1)^2 / 2p) ln(Λt / ε^{1/(k+1)})`, i.e. where the
/// growth of the term count overtakes the shrinking ε penalty. Returns `2p`.
pub fn popt_estimate(
    family: Family,
    k: u32,
    lambda: f64,
    t: f64,
    epsilon: f64,
    p_max: u32,
) -> Result<u32> {
    let kp1 = f64::from(k + 1);
    let log_ratio = (lambda * t).ln() - epsilon.ln() / kp1;
    for p in 1..=p_max {
        let n = match family {
            Family::Nestf => nested_summary(p, k)?.n_terms,
            Family::Nestgc => nestgc_summary(2 * p, k)?.n_terms,
            other => {
                return Err(Error::InvalidArgument(format!(
                    "estimate covers nestf and nestgc, not {other}"
                )))
            }
        };
        if f64::from(k + 2) * n.ln() >= kp1 * kp1 / (2.0 * f64::from(p)) * log_ratio {
            return Ok(2 * p);
        }
    }
    Ok(2 * p_max)
}

/// `log10` of the leading-order cost scalings of both nested families at
/// integer `p`, with `6^{pk}` and `5^{2p} 2^k` standing in for `N Q`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScalingComparison {
    pub k: u32,
    pub p: u32,
    pub log10_nestf: f64,
    pub log10_nestgc: f64,
}

impl ScalingComparison {
    pub fn preferred(&self) -> Family {
        if self.log10_nestgc < self.log10_nestf {
            Family::Nestgc
        } else {
            Family::Nestf
        }
    }
}

fn log_scaling(ln_n: f64, p: u32, k: u32, lambda: f64, t: f64, epsilon: f64) -> f64 {
    let kp1 = f64::from(k + 1);
    let two_p = f64::from(2 * p);
    let nu = two_p + kp1;
    let ln_x = 1.0 + ln_n + lambda.ln() + t.ln() - nu.ln() / kp1;
    ln_n + (kp1 + kp1 * kp1 / two_p) * ln_x - kp1 / two_p * epsilon.ln()
}

pub fn compare_scalings(k: u32, p: u32, lambda: f64, t: f64, epsilon: f64) -> ScalingComparison {
    let ln_nestf = f64::from(p * k) * 6f64.ln();
    let ln_nestgc = f64::from(2 * p) * 5f64.ln() + f64::from(k) * LN_2;
    ScalingComparison {
        k,
        p,
        log10_nestf: log_scaling(ln_nestf, p, k, lambda, t, epsilon) / std::f64::consts::LN_10,
        log10_nestgc: log_scaling(ln_nestgc, p, k, lambda, t, epsilon) / std::f64::consts::LN_10,
    }
}
