//! End-to-end applications: unstructured search by a commutator, a
//! two-axis control sequence, anticommutator simulation by dilation, the
//! 2x2 toric code from two-body exponentials, and a family comparison.

use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::builders::{build_jk, build_nested, build_nestgc, build_odd_symmetrized, Family};
use crate::error::{Error, Result};
use crate::evaluator::{evaluate, exact_for, segment_evolve, FIT_ERROR_MAX, FIT_ERROR_MIN};
use crate::formula::ProductFormula;
use crate::linalg::{
    anticommutator, basis_projector, commutator, dilate_anticomm, dilate_product, expm, identity,
    kron, pauli, plus_projector, random_hermitian, spectral_norm, ComplexMatrix, OperatorSet,
    Pauli,
};
use crate::planner::{optimal_p, plan_formula};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// One measured quantity with its expectation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdict {
    pub name: String,
    pub measured: f64,
    pub expected: String,
    pub pass: bool,
}

impl Verdict {
    fn new(name: &str, measured: f64, expected: impl Into<String>, pass: bool) -> Self {
        Self {
            name: name.to_string(),
            measured,
            expected: expected.into(),
            pass,
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}: measured {:.6e}, expected {} [{}]",
            self.name,
            self.measured,
            self.expected,
            if self.pass { "PASS" } else { "FAIL" }
        )
    }
}

/// All verdicts pass.
pub fn all_pass(verdicts: &[Verdict]) -> bool {
    verdicts.iter().all(|v| v.pass)
}

/// `|<a|b>|^2` for column vectors.
fn fidelity(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> f64 {
    (a.adjoint() * b)[(0, 0)].norm_sqr()
}

/// Columns of `m` whose last qubit is `|0>`.
fn ancilla_zero_columns(m: &ComplexMatrix) -> ComplexMatrix {
    let half = m.ncols() / 2;
    DMatrix::from_fn(m.nrows(), half, |i, j| m[(i, 2 * j)])
}

/// `u ⊗ |0>` as a `2d x d` isometry.
fn with_ancilla_zero(u: &ComplexMatrix) -> ComplexMatrix {
    let d = u.nrows();
    DMatrix::from_fn(2 * d, u.ncols(), |i, j| {
        if i % 2 == 0 {
            u[(i / 2, j)]
        } else {
            Complex64::default()
        }
    })
}

/// Segment count choice.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Segments {
    /// Planner-chosen order parameter and step count.
    Auto,
    Fixed(u64),
}

impl std::str::FromStr for Segments {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "auto" {
            return Ok(Segments::Auto);
        }
        match s.parse::<u64>() {
            Ok(r) if r > 0 => Ok(Segments::Fixed(r)),
            _ => Err(Error::InvalidArgument(format!(
                "segments must be 'auto' or a positive integer, got '{s}'"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroverConfig {
    pub n: usize,
    pub marked: usize,
    pub segments: Segments,
    /// Operator-norm budget of the product-formula run.
    pub epsilon: f64,
    /// Order parameter used with fixed segments.
    pub p2: u32,
    pub p_max: u32,
}

impl Default for GroverConfig {
    fn default() -> Self {
        Self {
            n: 16,
            marked: 0,
            segments: Segments::Auto,
            epsilon: 1e-3,
            p2: 4,
            p_max: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroverReport {
    pub n: usize,
    pub sqrt_n: f64,
    /// Evolution time of `e^{[|w><w|, |+><+|] T}`.
    pub time: f64,
    pub exact_fidelity: f64,
    pub p2: u32,
    pub r: u64,
    pub n_exp: u128,
    pub n_exp_per_sqrt_n: f64,
    pub formula_fidelity: f64,
    pub verdicts: Vec<Verdict>,
}

/// Search for `|w>` by evolving `|+>` under `[|w><w|, |+><+|]` for
/// `T = φ n / sqrt(n-1)` with `tan φ = sqrt(n-1)`.
pub fn grover(cfg: &GroverConfig) -> Result<GroverReport> {
    let n = cfg.n;
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "search needs n >= 2, got {n}"
        )));
    }
    let pw = basis_projector(n, cfg.marked)?;
    let pp = plus_projector(n);
    let nf = n as f64;
    let phi = (nf - 1.0).sqrt().atan();
    let time = phi * nf / (nf - 1.0).sqrt();
    let plus = DMatrix::from_element(n, 1, Complex64::new(1.0 / nf.sqrt(), 0.0));
    let mut marked = DMatrix::zeros(n, 1);
    marked[(cfg.marked, 0)] = Complex64::new(1.0, 0.0);

    let exact = expm(&commutator(&pw, &pp)?.map(|z| z * time))?;
    let exact_fidelity = fidelity(&marked, &(&exact * &plus));

    // [-i P_w, i P_+] = [P_w, P_+], evolved for t^2 = T.
    let ops = OperatorSet::pair(pw.map(|z| -I * z), pp.map(|z| I * z))?;
    let t = time.sqrt();
    let (p2, r) = match cfg.segments {
        Segments::Auto => {
            let best = optimal_p(Family::Nestf, 1, ops.lambda(), t, cfg.epsilon, cfg.p_max)?;
            (best.p2, best.plan.r)
        }
        Segments::Fixed(r) => (cfg.p2, r),
    };
    let f = build_nested(p2 / 2, 1)?;
    let approx = segment_evolve(&f, &ops, t, r)?;
    let formula_fidelity = fidelity(&marked, &(&approx * &plus));
    let n_exp = f.len() as u128 * u128::from(r);
    let sqrt_n = nf.sqrt();
    let verdicts = vec![
        Verdict::new(
            "exact fidelity",
            exact_fidelity,
            ">= 1 - 1e-9",
            exact_fidelity >= 1.0 - 1e-9,
        ),
        Verdict::new(
            "formula fidelity",
            formula_fidelity,
            ">= 0.99",
            formula_fidelity >= 0.99,
        ),
        Verdict::new(
            "exponentials per sqrt(n)",
            n_exp as f64 / sqrt_n,
            "grows at least like T ~ (pi/2) sqrt(n)",
            n_exp as f64 >= time,
        ),
    ];
    Ok(GroverReport {
        n,
        sqrt_n,
        time,
        exact_fidelity,
        p2,
        r,
        n_exp,
        n_exp_per_sqrt_n: n_exp as f64 / sqrt_n,
        formula_fidelity,
        verdicts,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControlConfig {
    pub b0: f64,
    pub omega0: f64,
    pub t: f64,
    pub p2: u32,
}

impl Default for ControlConfig {
    fn default() -> Self {
        Self {
            b0: 1.0,
            omega0: 1.0,
            t: 0.05,
            p2: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ControlReport {
    pub commutator_residual: f64,
    pub n_terms: usize,
    pub error: f64,
    pub error_half_time: f64,
    pub ratio: f64,
    pub expected_ratio: f64,
    /// `(p2, error at t)` for increasing orders.
    pub errors_by_order: Vec<(u32, f64)>,
    pub verdicts: Vec<Verdict>,
}

/// `A = B0 σz` and `B = B0 σz + ω0/(2 B0) (σz + σx)`, so `[A, B] = i ω0 σy`.
pub fn control_operators(b0: f64, omega0: f64) -> (ComplexMatrix, ComplexMatrix) {
    let z = pauli(Pauli::Z);
    let x = pauli(Pauli::X);
    let a = z.map(|v| v * b0);
    let b = &a + (&z + &x).map(|v| v * (omega0 / (2.0 * b0)));
    (a, b)
}

/// `e^{-i ω0 σy t^2}` from pulses `e^{±iAt/√2}`, `e^{±iBt/√2}` and their
/// higher-order refinements.
pub fn control(cfg: &ControlConfig) -> Result<ControlReport> {
    if !(cfg.b0 > 0.0 && cfg.omega0 > 0.0 && cfg.t > 0.0) {
        return Err(Error::InvalidArgument(
            "fields and time must be positive".into(),
        ));
    }
    if cfg.p2 == 0 || cfg.p2 % 2 == 1 {
        return Err(Error::InvalidArgument(format!(
            "control sequences need an even p2, got {}",
            cfg.p2
        )));
    }
    let (a, b) = control_operators(cfg.b0, cfg.omega0);
    let target_gen = pauli(Pauli::Y).map(|z| I * z * cfg.omega0);
    let commutator_residual = spectral_norm(&(commutator(&a, &b)? - &target_gen));
    // [-iA, -iB] = -[A, B] = -i ω0 σy.
    let ops = OperatorSet::pair(a.map(|z| -I * z), b.map(|z| -I * z))?;
    let target = |t: f64| expm(&pauli(Pauli::Y).map(|z| -I * z * cfg.omega0 * t * t));
    let err = |f: &ProductFormula, t: f64| -> Result<f64> {
        Ok(spectral_norm(&(evaluate(f, &ops, t)? - target(t)?)))
    };
    let f = build_odd_symmetrized(cfg.p2 / 2)?;
    let error = err(&f, cfg.t)?;
    let error_half_time = err(&f, cfg.t / 2.0)?;
    let ratio = error / error_half_time;
    let expected_ratio = 2f64.powi(f.nu() as i32);
    let mut errors_by_order = Vec::new();
    for p2 in [cfg.p2, cfg.p2 + 2, cfg.p2 + 4] {
        errors_by_order.push((p2, err(&build_odd_symmetrized(p2 / 2)?, cfg.t)?));
    }
    let decreasing = errors_by_order.windows(2).all(|w| w[1].1 < w[0].1);
    let verdicts = vec![
        Verdict::new(
            "[A,B] - i w0 sy",
            commutator_residual,
            "<= 1e-13",
            commutator_residual <= 1e-13,
        ),
        Verdict::new(
            "error ratio t vs t/2",
            ratio,
            format!("~ {expected_ratio} (order {})", f.nu()),
            (ratio.log2() - f64::from(f.nu())).abs() <= 0.25,
        ),
        Verdict::new(
            "higher orders reduce error",
            errors_by_order.last().map_or(f64::NAN, |e| e.1),
            "strictly decreasing in p2",
            decreasing,
        ),
    ];
    Ok(ControlReport {
        commutator_residual,
        n_terms: f.len(),
        error,
        error_half_time,
        ratio,
        expected_ratio,
        errors_by_order,
        verdicts,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnticommConfig {
    pub dim: usize,
    pub t: f64,
    pub p2: u32,
    pub seed: u64,
}

impl Default for AnticommConfig {
    fn default() -> Self {
        Self {
            dim: 4,
            t: 0.2,
            p2: 2,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnticommReport {
    pub dim: usize,
    pub block_error: f64,
    pub block_error_half_time: f64,
    pub measured_order: f64,
    pub expected_order: u32,
    pub leakage: f64,
    pub identity_error_at_zero: f64,
    pub verdicts: Vec<Verdict>,
}

/// `e^{-i{A,B} t^2}` for random Hermitian `A`, `B` via the commutator of
/// `A ⊗ σy` and `B ⊗ σx` with the ancilla in `|0>`.
pub fn anticomm(cfg: &AnticommConfig) -> Result<AnticommReport> {
    if cfg.dim == 0 {
        return Err(Error::InvalidArgument("dimension must be positive".into()));
    }
    if cfg.p2 == 0 || cfg.p2 % 2 == 1 {
        return Err(Error::InvalidArgument(format!(
            "anticommutator runs need an even p2, got {}",
            cfg.p2
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let a = random_hermitian(cfg.dim, &mut rng);
    let b = random_hermitian(cfg.dim, &mut rng);
    let (ad, bd) = dilate_anticomm(&a, &b)?;
    // [-iA', iB'] = [A', B'] = -i{A,B} ⊗ σz.
    let ops = OperatorSet::pair(ad.map(|z| -I * z), bd.map(|z| I * z))?;
    let f = build_odd_symmetrized(cfg.p2 / 2)?;
    let ac = anticommutator(&a, &b)?;
    let block = |t: f64| -> Result<(f64, f64)> {
        let v = ancilla_zero_columns(&evaluate(&f, &ops, t)?);
        let exact = with_ancilla_zero(&expm(&ac.map(|z| -I * z * t * t))?);
        let diff = &v - &exact;
        let leak = DMatrix::from_fn(cfg.dim, cfg.dim, |i, j| v[(2 * i + 1, j)]);
        Ok((spectral_norm(&diff), spectral_norm(&leak)))
    };
    let (block_error, leakage) = block(cfg.t)?;
    let (block_error_half_time, _) = block(cfg.t / 2.0)?;
    let (identity_error_at_zero, _) = block(0.0)?;
    let measured_order = (block_error / block_error_half_time).log2();
    let expected_order = f.nu();
    let nu = f64::from(expected_order);
    let verdicts = vec![
        Verdict::new(
            "order from t and t/2",
            measured_order,
            format!("{expected_order} (within -0.5/+1.0)"),
            measured_order >= nu - 0.5 && measured_order <= nu + 1.0,
        ),
        Verdict::new(
            "ancilla leakage",
            leakage,
            "<= block error",
            leakage <= block_error * (1.0 + 1e-9) + 1e-15,
        ),
        Verdict::new(
            "t = 0 is the identity",
            identity_error_at_zero,
            "0",
            identity_error_at_zero <= 1e-15,
        ),
    ];
    Ok(AnticommReport {
        dim: cfg.dim,
        block_error,
        block_error_half_time,
        measured_order,
        expected_order,
        leakage,
        identity_error_at_zero,
        verdicts,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToricConfig {
    pub lx: usize,
    pub ly: usize,
    pub j: f64,
    pub t: f64,
    pub epsilon: f64,
    pub p2: u32,
}

impl Default for ToricConfig {
    fn default() -> Self {
        Self {
            lx: 2,
            ly: 2,
            j: 1.0,
            t: 0.5,
            epsilon: 1e-3,
            p2: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ToricReport {
    pub qubits: usize,
    pub n_factors: usize,
    pub max_stabilizer_commutator: f64,
    pub factorization_residual: f64,
    pub factor_budget: f64,
    pub formula_terms: usize,
    pub nu: u32,
    pub steps_vertex: u64,
    pub steps_plaquette: u64,
    pub step_source: StepSource,
    /// Why the planner's count was not used, if it was not.
    pub planner_note: Option<String>,
    pub factor_error_vertex: f64,
    pub factor_error_plaquette: f64,
    pub total_error: f64,
    pub two_body_exponentials: u128,
    pub verdicts: Vec<Verdict>,
}

/// Embeds `local` acting on `qubits` (most significant first) into `n`
/// qubits, where qubit 0 is the most significant.
fn embed(local: &ComplexMatrix, qubits: &[usize], n: usize) -> ComplexMatrix {
    let dim = 1usize << n;
    let m = qubits.len();
    let bit = |q: usize| 1usize << (n - 1 - q);
    let mask: usize = qubits.iter().map(|&q| bit(q)).sum();
    let gather = |g: usize| {
        qubits.iter().enumerate().fold(0usize, |l, (i, &q)| {
            if g & bit(q) != 0 {
                l | 1 << (m - 1 - i)
            } else {
                l
            }
        })
    };
    let scatter = |l: usize| {
        qubits.iter().enumerate().fold(0usize, |g, (i, &q)| {
            if l & (1 << (m - 1 - i)) != 0 {
                g | bit(q)
            } else {
                g
            }
        })
    };
    let mut out = DMatrix::zeros(dim, dim);
    for g_in in 0..dim {
        let rest = g_in & !mask;
        let l_in = gather(g_in);
        for l_out in 0..(1usize << m) {
            let v = local[(l_out, l_in)];
            if v != Complex64::default() {
                out[(rest | scatter(l_out), g_in)] = v;
            }
        }
    }
    out
}

fn pauli_string(p: Pauli, count: usize) -> ComplexMatrix {
    (0..count).fold(identity(1), |acc, _| kron(&acc, &pauli(p)))
}

/// Edge qubits of each star and plaquette on an `lx x ly` torus.
pub fn toric_stabilizers(lx: usize, ly: usize) -> (Vec<[usize; 4]>, Vec<[usize; 4]>) {
    let h = |x: usize, y: usize| 2 * ((y % ly) * lx + (x % lx));
    let v = |x: usize, y: usize| h(x, y) + 1;
    let mut stars = Vec::new();
    let mut plaquettes = Vec::new();
    for y in 0..ly {
        for x in 0..lx {
            stars.push([h(x, y), h(x + lx - 1, y), v(x, y), v(x, y + ly - 1)]);
            plaquettes.push([h(x, y), h(x, y + 1), v(x, y), v(x + 1, y)]);
        }
    }
    (stars, plaquettes)
}

/// Where a per-factor step count came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum StepSource {
    /// The error-bound planner.
    Planner,
    /// The smallest count whose measured error meets the budget, used when
    /// the planner's count exceeds its capacity.
    Calibrated,
}

struct FactorSim {
    unitary: ComplexMatrix,
    error: f64,
    r: u64,
    source: StepSource,
    planner_note: Option<String>,
    terms: usize,
    nu: u32,
}

/// `e^{i θ P⊗4}` on four qubits plus an ancilla in `|0>`, from the nested
/// commutator of the dilated single-qubit operators.
fn simulate_factor(p: Pauli, theta: f64, p2: u32, budget: f64) -> Result<FactorSim> {
    let singles: Vec<(ComplexMatrix, usize)> = (0..4)
        .map(|q| {
            let m = (0..4).fold(identity(1), |acc, j| {
                kron(&acc, &if j == q { pauli(p) } else { identity(2) })
            });
            (m, 1)
        })
        .collect();
    let dilated = dilate_product(&singles)?;
    // Z = 8i P⊗4 ⊗ σz with slot 0 scaled by i and the rest by -i;
    // the sign of slot 0 follows the sign of θ.
    let first = if theta >= 0.0 { I } else { -I };
    let ops: Vec<ComplexMatrix> = dilated
        .ops()
        .iter()
        .enumerate()
        .map(|(j, m)| m.map(|z| z * if j == 0 { first } else { -I }))
        .collect();
    let ops = OperatorSet::new(ops)?;
    let tau = (theta.abs() / 8.0).powf(0.25);
    let f = build_nested(p2 / 2, 3)?;
    let exact = exact_for(&f, &ops, tau)?;
    let run = |r: u64| -> Result<(ComplexMatrix, f64)> {
        let u = segment_evolve(&f, &ops, tau, r)?;
        let e = spectral_norm(&(&u - &exact));
        Ok((u, e))
    };
    let (r, source, planner_note) = if tau == 0.0 {
        (1, StepSource::Planner, None)
    } else {
        match plan_formula(&f, "nestf", ops.lambda(), tau, budget, Some(&ops)) {
            Ok(plan) => (plan.r, StepSource::Planner, None),
            Err(e @ Error::Capacity(_)) => (
                calibrate_steps(&run, budget)?,
                StepSource::Calibrated,
                Some(e.to_string()),
            ),
            Err(e) => return Err(e),
        }
    };
    let (unitary, error) = run(r)?;
    Ok(FactorSim {
        unitary,
        error,
        r,
        source,
        planner_note,
        terms: f.len(),
        nu: f.nu(),
    })
}

/// Smallest `r` whose measured error meets `budget`, by doubling then
/// bisection.
fn calibrate_steps(run: &impl Fn(u64) -> Result<(ComplexMatrix, f64)>, budget: f64) -> Result<u64> {
    let meets = |r: u64| -> Result<bool> { Ok(run(r)?.1 <= budget) };
    let mut hi = 1u64;
    while !meets(hi)? {
        if hi >= 1 << 40 {
            return Err(Error::Infeasible(format!(
                "no step count up to 2^40 reaches the factor budget {budget:e}"
            )));
        }
        hi *= 2;
    }
    let mut lo = hi / 2;
    if lo == 0 {
        return Ok(1);
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if meets(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Toric code evolution `e^{-iHt}`, `H = -J(Σ A_v + Σ B_p)`, from two-body
/// exponentials with one shared ancilla.
pub fn toric(cfg: &ToricConfig) -> Result<ToricReport> {
    if (cfg.lx, cfg.ly) != (2, 2) {
        return Err(Error::InvalidArgument(format!(
            "only the 2x2 torus is supported, got {}x{}",
            cfg.lx, cfg.ly
        )));
    }
    if cfg.epsilon.is_nan() || cfg.epsilon <= 0.0 || cfg.p2 == 0 || cfg.p2 % 2 == 1 {
        return Err(Error::InvalidArgument(
            "need epsilon > 0 and an even p2".into(),
        ));
    }
    let (stars, plaquettes) = toric_stabilizers(cfg.lx, cfg.ly);
    let n = 2 * cfg.lx * cfg.ly;
    let x4 = pauli_string(Pauli::X, 4);
    let z4 = pauli_string(Pauli::Z, 4);
    let a_ops: Vec<_> = stars.iter().map(|q| embed(&x4, q, n)).collect();
    let b_ops: Vec<_> = plaquettes.iter().map(|q| embed(&z4, q, n)).collect();
    let mut max_stabilizer_commutator = 0.0f64;
    for a in &a_ops {
        for b in &b_ops {
            max_stabilizer_commutator =
                max_stabilizer_commutator.max(spectral_norm(&commutator(a, b)?));
        }
    }
    let dim = 1usize << n;
    let h = a_ops
        .iter()
        .chain(&b_ops)
        .fold(DMatrix::zeros(dim, dim), |acc: ComplexMatrix, m| {
            acc - m.map(|z| z * cfg.j)
        });
    let exact = expm(&h.map(|z| -I * z * cfg.t))?;
    let theta = cfg.j * cfg.t;
    let factors: Vec<ComplexMatrix> = a_ops
        .iter()
        .chain(&b_ops)
        .map(|m| expm(&m.map(|z| I * z * theta)))
        .collect::<Result<_>>()?;
    let product = factors.iter().fold(identity(dim), |acc, f| acc * f);
    let factorization_residual = spectral_norm(&(&product - &exact));

    let n_factors = stars.len() + plaquettes.len();
    let factor_budget = cfg.epsilon / n_factors as f64;
    let (vertex, plaquette) = rayon::join(
        || simulate_factor(Pauli::X, theta, cfg.p2, factor_budget),
        || simulate_factor(Pauli::Z, theta, cfg.p2, factor_budget),
    );
    let (vertex, plaquette) = (vertex?, plaquette?);
    let ancilla = n;
    let placed: Vec<ComplexMatrix> = stars
        .par_iter()
        .map(|q| (q, &vertex.unitary))
        .chain(plaquettes.par_iter().map(|q| (q, &plaquette.unitary)))
        .map(|(q, u)| {
            let mut qubits = q.to_vec();
            qubits.push(ancilla);
            embed(u, &qubits, n + 1)
        })
        .collect();
    let simulated = placed.iter().fold(identity(2 * dim), |acc, f| acc * f);
    let total_error =
        spectral_norm(&(ancilla_zero_columns(&simulated) - with_ancilla_zero(&exact)));
    let step_source =
        if vertex.source == StepSource::Planner && plaquette.source == StepSource::Planner {
            StepSource::Planner
        } else {
            StepSource::Calibrated
        };
    let planner_note = vertex
        .planner_note
        .clone()
        .or_else(|| plaquette.planner_note.clone());
    let two_body_exponentials = stars.len() as u128 * vertex.terms as u128 * u128::from(vertex.r)
        + plaquettes.len() as u128 * plaquette.terms as u128 * u128::from(plaquette.r);
    let verdicts = vec![
        Verdict::new(
            "stabilizers commute",
            max_stabilizer_commutator,
            "0",
            max_stabilizer_commutator == 0.0,
        ),
        Verdict::new(
            "commuting factorization",
            factorization_residual,
            "<= 1e-12",
            factorization_residual <= 1e-12,
        ),
        Verdict::new(
            "factor error",
            vertex.error.max(plaquette.error),
            format!("<= {factor_budget:.3e} per factor"),
            vertex.error.max(plaquette.error) <= factor_budget,
        ),
        Verdict::new(
            "total error",
            total_error,
            format!("<= {:.3e}", cfg.epsilon),
            total_error <= cfg.epsilon,
        ),
    ];
    Ok(ToricReport {
        qubits: n,
        n_factors,
        max_stabilizer_commutator,
        factorization_residual,
        factor_budget,
        formula_terms: vertex.terms,
        nu: vertex.nu,
        steps_vertex: vertex.r,
        steps_plaquette: plaquette.r,
        step_source,
        planner_note,
        factor_error_vertex: vertex.error,
        factor_error_plaquette: plaquette.error,
        total_error,
        two_body_exponentials,
        verdicts,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareConfig {
    pub families: Vec<Family>,
    pub k: u32,
    /// Order parameters tried for each family; odd values are skipped for
    /// integer-order families.
    pub p2s: Vec<u32>,
    /// Segment counts `2^0 .. 2^max_log2_r`.
    pub max_log2_r: u32,
}

impl Default for CompareConfig {
    fn default() -> Self {
        Self {
            families: vec![Family::Nestf, Family::Nestgc, Family::Jk],
            k: 1,
            p2s: vec![2, 3, 4],
            max_log2_r: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurvePoint {
    pub r: u64,
    pub n_exp: u128,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Curve {
    pub family: String,
    pub p2: u32,
    pub n_terms: usize,
    pub points: Vec<CurvePoint>,
}

/// Outcome of a head-to-head check at matched exponential counts.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatchedComparison {
    pub p2: u32,
    pub winner: String,
    pub loser: String,
    pub matched_points: usize,
    /// Largest `log10(winner error / loser error)` over matched points;
    /// non-positive when the winner is never worse.
    pub worst_log10_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareReport {
    pub k: u32,
    pub curves: Vec<Curve>,
    pub warnings: Vec<String>,
    pub nestgc_vs_jk: Vec<MatchedComparison>,
    pub verdicts: Vec<Verdict>,
}

impl CompareReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("family,p2,r,n_exp,error\n");
        for c in &self.curves {
            for p in &c.points {
                out.push_str(&format!(
                    "{},{},{},{},{:.16e}\n",
                    c.family, c.p2, p.r, p.n_exp, p.error
                ));
            }
        }
        out
    }

    pub fn curve(&self, family: &str, p2: u32) -> Option<&Curve> {
        self.curves
            .iter()
            .find(|c| c.family == family && c.p2 == p2)
    }
}

/// `-iσy` in slot 0 and `-iσx` in every other slot; for `k = 1` the target
/// is `e^{[-iσx, -iσy]}`.
pub fn compare_operators(k: u32) -> Result<OperatorSet> {
    let y = pauli(Pauli::Y).map(|z| -I * z);
    let x = pauli(Pauli::X).map(|z| -I * z);
    OperatorSet::new(
        std::iter::once(y)
            .chain((0..k).map(|_| x.clone()))
            .collect(),
    )
}

fn curve_for(
    f: &ProductFormula,
    family: Family,
    p2: u32,
    ops: &OperatorSet,
    max_log2_r: u32,
) -> Result<Curve> {
    let exact = exact_for(f, ops, 1.0)?;
    let points = (0..=max_log2_r)
        .into_par_iter()
        .map(|j| {
            let r = 1u64 << j;
            let approx = segment_evolve(f, ops, 1.0, r)?;
            Ok(CurvePoint {
                r,
                n_exp: f.len() as u128 * u128::from(r),
                error: spectral_norm(&(approx - &exact)),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Curve {
        family: family.as_str().to_string(),
        p2,
        n_terms: f.len(),
        points,
    })
}

/// Log-log interpolation of a curve's error at `n_exp`.
fn interpolate(curve: &Curve, n_exp: f64) -> Option<f64> {
    curve.points.windows(2).find_map(|w| {
        let (x0, x1) = (w[0].n_exp as f64, w[1].n_exp as f64);
        if n_exp < x0 || n_exp > x1 {
            return None;
        }
        let s = (n_exp.ln() - x0.ln()) / (x1.ln() - x0.ln());
        Some((w[0].error.ln() * (1.0 - s) + w[1].error.ln() * s).exp())
    })
}

/// Compares `winner` against `loser` at the winner's exponential counts,
/// keeping points where both errors lie in the fit window.
pub fn matched_comparison(winner: &Curve, loser: &Curve) -> MatchedComparison {
    let mut worst = f64::NEG_INFINITY;
    let mut matched = 0;
    for p in &winner.points {
        let in_window = |e: f64| (FIT_ERROR_MIN..=FIT_ERROR_MAX).contains(&e);
        if let Some(other) = interpolate(loser, p.n_exp as f64) {
            if in_window(p.error) && in_window(other) {
                matched += 1;
                worst = worst.max((p.error / other).log10());
            }
        }
    }
    MatchedComparison {
        p2: winner.p2,
        winner: winner.family.clone(),
        loser: loser.family.clone(),
        matched_points: matched,
        worst_log10_ratio: worst,
    }
}

/// Error against exponential count for each family, approximating the
/// target at unit time with `r` segments of `f(·/r^{1/(k+1)})`.
pub fn compare(cfg: &CompareConfig) -> Result<CompareReport> {
    let ops = compare_operators(cfg.k)?;
    let mut curves = Vec::new();
    let mut warnings = Vec::new();
    for &family in &cfg.families {
        for &p2 in &cfg.p2s {
            let built = match family {
                Family::Nestf if p2 % 2 == 0 => build_nested(p2 / 2, cfg.k),
                Family::Nestf => continue,
                Family::Nestgc => build_nestgc(p2, cfg.k),
                Family::Jk => build_jk(p2, cfg.k),
                other => {
                    return Err(Error::InvalidArgument(format!(
                        "comparison covers nestf, nestgc and jk, not {other}"
                    )))
                }
            };
            match built {
                Ok(f) => curves.push(curve_for(&f, family, p2, &ops, cfg.max_log2_r)?),
                Err(e @ Error::ConstructionUnverified { .. }) => {
                    warnings.push(format!("{family} p2={p2} omitted: {e}"));
                }
                Err(e) => return Err(e),
            }
        }
    }
    let mut nestgc_vs_jk = Vec::new();
    for &p2 in &cfg.p2s {
        let find = |name: &str| {
            curves
                .iter()
                .find(|c: &&Curve| c.family == name && c.p2 == p2)
        };
        if let (Some(g), Some(j)) = (find("nestgc"), find("jk")) {
            nestgc_vs_jk.push(matched_comparison(g, j));
        }
    }
    let mut verdicts = Vec::new();
    for c in &curves {
        let decreasing = c
            .points
            .windows(2)
            .filter(|w| w[0].error <= FIT_ERROR_MAX && w[0].error > 1e-13)
            .all(|w| w[1].error <= w[0].error);
        verdicts.push(Verdict::new(
            &format!("{} p2={} refines", c.family, c.p2),
            c.points.last().map_or(f64::NAN, |p| p.error),
            "error decreasing in r once below 1e-2",
            decreasing,
        ));
    }
    for m in &nestgc_vs_jk {
        verdicts.push(Verdict::new(
            &format!("nestgc beats jk at p2={}", m.p2),
            m.worst_log10_ratio,
            "<= 0 at matched exponential counts",
            m.matched_points > 0 && m.worst_log10_ratio <= 0.0,
        ));
    }
    Ok(CompareReport {
        k: cfg.k,
        curves,
        warnings,
        nestgc_vs_jk,
        verdicts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn embedding_matches_kron_on_leading_qubits() {
        let x = pauli(Pauli::X);
        let z = pauli(Pauli::Z);
        let local = kron(&x, &z);
        let full = kron(&kron(&local, &identity(2)), &identity(2));
        assert_eq!(embed(&local, &[0, 1], 4), full);
        let swapped = kron(&kron(&z, &identity(2)), &kron(&x, &identity(2)));
        assert_eq!(embed(&local, &[2, 0], 4), swapped);
    }

    #[test]
    fn torus_stabilizers_share_even_edges() {
        let (stars, plaquettes) = toric_stabilizers(2, 2);
        assert_eq!((stars.len(), plaquettes.len()), (4, 4));
        for s in &stars {
            for p in &plaquettes {
                let shared = s.iter().filter(|q| p.contains(q)).count();
                assert_eq!(shared % 2, 0);
            }
        }
        for q in 0..8 {
            assert_eq!(stars.iter().filter(|s| s.contains(&q)).count(), 2);
            assert_eq!(plaquettes.iter().filter(|p| p.contains(&q)).count(), 2);
        }
    }

    #[test]
    fn control_sequence_is_fourth_order() {
        let r = control(&ControlConfig::default()).unwrap();
        assert!(all_pass(&r.verdicts), "{:#?}", r.verdicts);
        assert_eq!(r.n_terms, 8);
        assert!((r.ratio - 16.0).abs() < 0.5);
    }

    #[test]
    fn control_pulses_match_the_eight_exponential_sequence() {
        let (a, b) = control_operators(1.0, 1.0);
        let t = 0.05;
        let c = t / 2f64.sqrt();
        let e = |m: &ComplexMatrix, s: f64| expm(&m.map(|z| I * z * s)).unwrap();
        let seq = [
            e(&a, -c),
            e(&b, -c),
            e(&a, c),
            e(&b, c),
            e(&a, c),
            e(&b, c),
            e(&a, -c),
            e(&b, -c),
        ];
        let product = seq.iter().fold(identity(2), |acc, m| acc * m);
        let ops = OperatorSet::pair(a.map(|z| -I * z), b.map(|z| -I * z)).unwrap();
        let built = evaluate(&build_odd_symmetrized(1).unwrap(), &ops, t).unwrap();
        assert!(spectral_norm(&(product - built)) < 1e-15);
    }

    #[test]
    fn anticommutator_demo_verdicts() {
        let r = anticomm(&AnticommConfig::default()).unwrap();
        assert!(all_pass(&r.verdicts), "{:#?}", r.verdicts);
        let again = anticomm(&AnticommConfig::default()).unwrap();
        assert_eq!(r, again);
        let other = anticomm(&AnticommConfig {
            seed: 1,
            ..Default::default()
        })
        .unwrap();
        assert_ne!(r.block_error, other.block_error);
    }

    #[test]
    fn grover_small_instance() {
        let r = grover(&GroverConfig::default()).unwrap();
        assert!(all_pass(&r.verdicts), "{:#?}", r.verdicts);
        let fixed = grover(&GroverConfig {
            segments: Segments::Fixed(64),
            ..Default::default()
        })
        .unwrap();
        assert_eq!(fixed.r, 64);
        assert_eq!(fixed.n_exp, 48 * 64);
    }

    #[test]
    fn grover_rejects_tiny_n() {
        assert!(grover(&GroverConfig {
            n: 1,
            ..Default::default()
        })
        .is_err());
    }

    #[test]
    fn segments_parse() {
        assert_eq!("auto".parse::<Segments>().unwrap(), Segments::Auto);
        assert_eq!("12".parse::<Segments>().unwrap(), Segments::Fixed(12));
        assert!("0".parse::<Segments>().is_err());
        assert!("many".parse::<Segments>().is_err());
    }

    #[test]
    fn toric_rejects_large_lattices() {
        let cfg = ToricConfig {
            lx: 3,
            ..Default::default()
        };
        assert!(matches!(toric(&cfg), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn small_comparison_curves() {
        let cfg = CompareConfig {
            families: vec![Family::Nestf, Family::Nestgc],
            p2s: vec![2, 3],
            max_log2_r: 6,
            ..Default::default()
        };
        let r = compare(&cfg).unwrap();
        assert_eq!(r.curves.len(), 3);
        assert_eq!(r.curve("nestgc", 3).unwrap().n_terms, 100);
        assert!(r.curve("nestf", 3).is_none());
        assert!(r.to_csv().starts_with("family,p2,r,n_exp,error\n"));
    }

    #[test]
    fn matched_comparison_on_synthetic_curves() {
        let line = |family: &str, scale: f64| Curve {
            family: family.into(),
            p2: 2,
            n_terms: 1,
            points: (0..10)
                .map(|j| {
                    let n = 1u128 << j;
                    CurvePoint {
                        r: n as u64,
                        n_exp: n,
                        error: scale / n as f64,
                    }
                })
                .collect(),
        };
        let m = matched_comparison(&line("a", 1e-4), &line("b", 1e-3));
        assert_eq!(m.matched_points, 10);
        assert!((m.worst_log10_ratio + 1.0).abs() < 1e-12);
    }
}
