//! Dense complex matrices and the handful of operations the product-formula
//! machinery needs: a scaling-and-squaring matrix exponential, the spectral
//! norm, commutator algebra, Pauli/projector constructors, and the ancilla
//! dilations that turn anticommutators and operator products into nested
//! commutators.
//!
//! The exponential is available in two forms. [`expm`] returns `e^M`, while
//! [`expm_offset`] returns `e^M - I` without ever forming the identity, so
//! near-identity products keep their small part to full relative precision.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::formula::SlotId;

pub type ComplexMatrix = DMatrix<Complex64>;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// Default tolerance for the structural predicates.
pub const DEFAULT_TOL: f64 = 1e-10;

/// Relative commutation threshold used by [`dilate_product`].
pub const COMMUTE_TOL: f64 = 1e-10;

pub fn identity(dim: usize) -> ComplexMatrix {
    ComplexMatrix::identity(dim, dim)
}

pub fn zeros(dim: usize) -> ComplexMatrix {
    ComplexMatrix::zeros(dim, dim)
}

fn ensure_square(m: &ComplexMatrix, what: &str) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "{what} must be square, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(())
}

fn ensure_same_dim(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} vs {}x{}",
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols()
        )));
    }
    Ok(())
}

fn is_finite(m: &ComplexMatrix) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

/// Maximum absolute column sum.
pub fn one_norm(m: &ComplexMatrix) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

fn max_abs(m: &ComplexMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Largest singular value. Works for rectangular matrices too.
pub fn spectral_norm(m: &ComplexMatrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.singular_values().max()
}

// Padé coefficients b_0..b_m for the diagonal approximants of degree 3..13.
const PADE3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const PADE5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const PADE7: [f64; 8] = [
    17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0,
];
const PADE9: [f64; 10] = [
    17643225600.0,
    8821612800.0,
    2075673600.0,
    302702400.0,
    30270240.0,
    2162160.0,
    110880.0,
    3960.0,
    90.0,
    1.0,
];
const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

// Largest 1-norms for which each degree meets unit roundoff.
const THETA3: f64 = 1.495585217958292e-2;
const THETA5: f64 = 2.539_398_330_063_23e-1;
const THETA7: f64 = 9.504178996162932e-1;
const THETA9: f64 = 2.097847961257068e0;
const THETA13: f64 = 5.371920351148152e0;

fn scaled(m: &ComplexMatrix, c: f64) -> ComplexMatrix {
    m.map(|z| z * c)
}

/// Odd and even parts (U, V) of a low-degree Padé numerator.
fn pade_low(a: &ComplexMatrix, b: &[f64]) -> (ComplexMatrix, ComplexMatrix) {
    let n = a.nrows();
    let a2 = a * a;
    let mut odd = scaled(&identity(n), b[1]);
    let mut even = scaled(&identity(n), b[0]);
    let mut power = identity(n);
    let degree = b.len() - 1;
    let mut j = 2;
    while j <= degree {
        power = &power * &a2;
        even += scaled(&power, b[j]);
        if j < degree {
            odd += scaled(&power, b[j + 1]);
        }
        j += 2;
    }
    (a * odd, even)
}

fn pade13(a: &ComplexMatrix) -> (ComplexMatrix, ComplexMatrix) {
    let b = &PADE13;
    let n = a.nrows();
    let id = identity(n);
    let a2 = a * a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let inner_u = scaled(&a6, b[13]) + scaled(&a4, b[11]) + scaled(&a2, b[9]);
    let u = a
        * (&a6 * inner_u
            + scaled(&a6, b[7])
            + scaled(&a4, b[5])
            + scaled(&a2, b[3])
            + scaled(&id, b[1]));
    let inner_v = scaled(&a6, b[12]) + scaled(&a4, b[10]) + scaled(&a2, b[8]);
    let v = &a6 * inner_v
        + scaled(&a6, b[6])
        + scaled(&a4, b[4])
        + scaled(&a2, b[2])
        + scaled(&id, b[0]);
    (u, v)
}

/// `e^M - I`, computed by scaling and squaring a diagonal Padé approximant.
///
/// The Padé step yields `r(M) - I = (V - U)^{-1} 2U` directly and each
/// squaring uses `(I + E)^2 - I = 2E + E^2`, so no identity is ever added
/// and the result keeps full relative precision when `M` is small.
pub fn expm_offset(m: &ComplexMatrix) -> Result<ComplexMatrix> {
    ensure_square(m, "exponent")?;
    if !is_finite(m) {
        return Err(Error::InvalidArgument(
            "matrix exponential of non-finite entries".into(),
        ));
    }
    let n = m.nrows();
    if n == 0 {
        return Ok(zeros(0));
    }
    let norm = one_norm(m);
    let (u, v, squarings) = if norm <= THETA3 {
        let (u, v) = pade_low(m, &PADE3);
        (u, v, 0)
    } else if norm <= THETA5 {
        let (u, v) = pade_low(m, &PADE5);
        (u, v, 0)
    } else if norm <= THETA7 {
        let (u, v) = pade_low(m, &PADE7);
        (u, v, 0)
    } else if norm <= THETA9 {
        let (u, v) = pade_low(m, &PADE9);
        (u, v, 0)
    } else {
        let s = (norm / THETA13).log2().ceil().max(0.0) as i32;
        let a = scaled(m, 0.5f64.powi(s));
        let (u, v) = pade13(&a);
        (u, v, s)
    };
    let denom = &v - &u;
    let rhs = scaled(&u, 2.0);
    let mut offset = denom
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::InvalidArgument("singular Padé denominator".into()))?;
    for _ in 0..squarings {
        let sq = &offset * &offset;
        offset = scaled(&offset, 2.0) + sq;
    }
    Ok(offset)
}

/// Matrix exponential `e^M`.
pub fn expm(m: &ComplexMatrix) -> Result<ComplexMatrix> {
    let mut e = expm_offset(m)?;
    for i in 0..e.nrows() {
        e[(i, i)] += ONE;
    }
    Ok(e)
}

pub fn commutator(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    ensure_same_dim(a, b)?;
    Ok(a * b - b * a)
}

pub fn anticommutator(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    ensure_same_dim(a, b)?;
    Ok(a * b + b * a)
}

pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a.kronecker(b)
}

pub fn is_hermitian(m: &ComplexMatrix, tol: f64) -> bool {
    m.is_square() && max_abs(&(m - m.adjoint())) <= tol * max_abs(m).max(1.0)
}

pub fn is_anti_hermitian(m: &ComplexMatrix, tol: f64) -> bool {
    m.is_square() && max_abs(&(m + m.adjoint())) <= tol * max_abs(m).max(1.0)
}

pub fn is_unitary(m: &ComplexMatrix, tol: f64) -> bool {
    m.is_square() && max_abs(&(m.adjoint() * m - identity(m.nrows()))) <= tol
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pauli {
    X,
    Y,
    Z,
}

pub fn pauli(which: Pauli) -> ComplexMatrix {
    match which {
        Pauli::X => ComplexMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO]),
        Pauli::Y => ComplexMatrix::from_row_slice(2, 2, &[ZERO, -I, I, ZERO]),
        Pauli::Z => ComplexMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE]),
    }
}

/// `|w><w|` on an `n`-dimensional space.
pub fn basis_projector(n: usize, w: usize) -> Result<ComplexMatrix> {
    if w >= n {
        return Err(Error::InvalidArgument(format!(
            "basis index {w} out of range for dimension {n}"
        )));
    }
    let mut p = zeros(n);
    p[(w, w)] = ONE;
    Ok(p)
}

/// `|+><+|` with `|+> = n^{-1/2} sum_x |x>`.
pub fn plus_projector(n: usize) -> ComplexMatrix {
    ComplexMatrix::from_element(n, n, Complex64::new(1.0 / n as f64, 0.0))
}

/// Random Hermitian matrix with spectral norm 1 (GUE-like entries).
pub fn random_hermitian<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> ComplexMatrix {
    let g = ComplexMatrix::from_fn(dim, dim, |_, _| {
        Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    });
    let h = (&g + g.adjoint()).map(|z| z * 0.5);
    let norm = spectral_norm(&h);
    h.map(|z| z / norm)
}

/// Random anti-Hermitian matrix `iH` with spectral norm 1.
pub fn random_anti_hermitian<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> ComplexMatrix {
    random_hermitian(dim, rng).map(|z| z * I)
}

/// Binding from formula slots to concrete matrices.
///
/// `ops[j]` is the matrix for slot `j`: `A_j` for nested formulas, and
/// `B = ops[0]`, `A = ops[1]` for two-operator formulas.
#[derive(Debug, Clone)]
pub struct OperatorSet {
    ops: Vec<ComplexMatrix>,
    lambda: f64,
}

impl OperatorSet {
    /// Builds the set and sets `lambda = 2 max_j ||A_j||`.
    pub fn new(ops: Vec<ComplexMatrix>) -> Result<Self> {
        let first = ops
            .first()
            .ok_or_else(|| Error::InvalidArgument("empty operator set".into()))?;
        ensure_square(first, "operator")?;
        for op in &ops[1..] {
            ensure_same_dim(first, op)?;
        }
        if !ops.iter().all(is_finite) {
            return Err(Error::InvalidArgument("non-finite operator entries".into()));
        }
        let lambda = 2.0 * ops.iter().map(spectral_norm).fold(0.0, f64::max);
        Ok(Self { ops, lambda })
    }

    /// Two-operator set with `A` in slot 1 and `B` in slot 0.
    pub fn pair(a: ComplexMatrix, b: ComplexMatrix) -> Result<Self> {
        Self::new(vec![b, a])
    }

    /// Overrides the automatically computed `lambda`.
    pub fn with_lambda(mut self, lambda: f64) -> Result<Self> {
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "lambda must be positive, got {lambda}"
            )));
        }
        self.lambda = lambda;
        Ok(self)
    }

    pub fn k(&self) -> usize {
        self.ops.len() - 1
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.ops[0].nrows()
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn get(&self, slot: SlotId) -> Result<&ComplexMatrix> {
        self.ops.get(slot.index()).ok_or(Error::MissingSlot(slot.0))
    }

    pub fn ops(&self) -> &[ComplexMatrix] {
        &self.ops
    }

    pub fn max_norm(&self) -> f64 {
        self.ops.iter().map(spectral_norm).fold(0.0, f64::max)
    }

    /// Every operator multiplied by `c`; `lambda` is recomputed.
    pub fn scaled(&self, c: Complex64) -> Self {
        let ops: Vec<_> = self.ops.iter().map(|m| m.map(|z| z * c)).collect();
        Self::new(ops).expect("scaling preserves validity")
    }
}

/// `Z_k = [A_k, [A_{k-1}, ..., [A_1, A_0]...]]`, folded from the inside out.
pub fn nested_z(ops: &OperatorSet) -> ComplexMatrix {
    let mut z = ops.ops[0].clone();
    for a in &ops.ops[1..] {
        z = a * &z - &z * a;
    }
    z
}

/// `(A ⊗ σ_y, B ⊗ σ_x)`, whose commutator is `-i{A,B} ⊗ σ_z`.
pub fn dilate_anticomm(
    a: &ComplexMatrix,
    b: &ComplexMatrix,
) -> Result<(ComplexMatrix, ComplexMatrix)> {
    ensure_square(a, "operator")?;
    ensure_same_dim(a, b)?;
    Ok((kron(a, &pauli(Pauli::Y)), kron(b, &pauli(Pauli::X))))
}

fn expand_factors(factors: &[(ComplexMatrix, usize)]) -> Vec<&ComplexMatrix> {
    factors
        .iter()
        .flat_map(|(m, mult)| std::iter::repeat_n(m, *mult))
        .collect()
}

/// Dilates commuting Hermitian factors, each repeated by its multiplicity,
/// into `k + 1` operators on the space with one extra qubit: slot 0 gets
/// `A_0 ⊗ σ_x` and every other slot `A_j ⊗ σ_y`.
///
/// The nested commutator of the result equals [`dilated_product_target`].
pub fn dilate_product(factors: &[(ComplexMatrix, usize)]) -> Result<OperatorSet> {
    if factors.is_empty() {
        return Err(Error::InvalidArgument("no factors to dilate".into()));
    }
    for (m, _) in factors {
        ensure_square(m, "factor")?;
        ensure_same_dim(&factors[0].0, m)?;
        if !is_hermitian(m, DEFAULT_TOL) {
            return Err(Error::InvalidArgument(
                "dilated factors must be Hermitian".into(),
            ));
        }
    }
    for i in 0..factors.len() {
        for j in i + 1..factors.len() {
            let (a, b) = (&factors[i].0, &factors[j].0);
            let residual = spectral_norm(&commutator(a, b)?);
            let scale = spectral_norm(a) * spectral_norm(b);
            if residual > COMMUTE_TOL * scale.max(f64::MIN_POSITIVE) {
                return Err(Error::NonCommuting {
                    first: i,
                    second: j,
                    residual,
                });
            }
        }
    }
    let expanded = expand_factors(factors);
    if expanded.len() < 2 {
        return Err(Error::InvalidArgument(
            "total multiplicity must be at least 2".into(),
        ));
    }
    let sx = pauli(Pauli::X);
    let sy = pauli(Pauli::Y);
    let ops = expanded
        .iter()
        .enumerate()
        .map(|(j, m)| if j == 0 { kron(m, &sx) } else { kron(m, &sy) })
        .collect();
    OperatorSet::new(ops)
}

/// Closed form of the nested commutator of [`dilate_product`]'s output:
/// `-i 2^k (prod A) ⊗ σ_z` for odd `k` and `2^k (prod A) ⊗ σ_x` for even `k`.
pub fn dilated_product_target(factors: &[(ComplexMatrix, usize)]) -> Result<ComplexMatrix> {
    let expanded = expand_factors(factors);
    let first = expanded
        .first()
        .ok_or_else(|| Error::InvalidArgument("no factors".into()))?;
    let k = expanded.len() - 1;
    let mut product = identity(first.nrows());
    for m in &expanded {
        product = &product * *m;
    }
    let scale = 2f64.powi(k as i32);
    Ok(if k % 2 == 1 {
        kron(&product, &pauli(Pauli::Z)).map(|z| z * (-I * scale))
    } else {
        kron(&product, &pauli(Pauli::X)).map(|z| z * scale)
    })
}
