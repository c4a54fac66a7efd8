//! Numerical evaluation of product formulas.
//!
//! Products are accumulated as offsets from the identity: with `S = P - I`
//! and `D = e^X - I`, the next product is `S + D + S D`. Errors are then the
//! difference of two small offsets, so they stay accurate far below the
//! size of the identity.

use std::fmt::Write as _;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::formula::{ProductFormula, Target};
use crate::linalg::{
    self, commutator, expm_offset, nested_z, spectral_norm, ComplexMatrix, OperatorSet,
};

/// Errors below this are dominated by rounding.
pub const FIT_ERROR_MIN: f64 = 1e-12;
/// Errors above this are outside the asymptotic regime.
pub const FIT_ERROR_MAX: f64 = 1e-2;
/// Fewest rows inside the window for a slope fit.
pub const MIN_USABLE_ROWS: usize = 4;
/// Fewest grid points accepted by [`order_scan`].
pub const MIN_GRID_POINTS: usize = 8;

fn add_identity(mut m: ComplexMatrix) -> ComplexMatrix {
    for i in 0..m.nrows() {
        m[(i, i)] += Complex64::new(1.0, 0.0);
    }
    m
}

/// `S1 + S2 + S1 S2`, the offset of `(I + S1)(I + S2)`.
fn compose_offsets(s1: &ComplexMatrix, s2: &ComplexMatrix) -> ComplexMatrix {
    s1 * s2 + s1 + s2
}

fn check_coverage(f: &ProductFormula, ops: &OperatorSet) -> Result<()> {
    if f.n_slots() > ops.len() {
        return Err(Error::MissingSlot(ops.len() as u32));
    }
    Ok(())
}

/// `evaluate(f, ops, t) - I`.
pub fn evaluate_offset(f: &ProductFormula, ops: &OperatorSet, t: f64) -> Result<ComplexMatrix> {
    check_coverage(f, ops)?;
    let dim = ops.dim();
    let mut acc = DMatrix::zeros(dim, dim);
    for term in f.terms() {
        let m = ops.get(term.slot)?;
        let scale = term.coeff * t.powi(term.tpow as i32);
        if scale == 0.0 {
            continue;
        }
        let d = expm_offset(&m.map(|z| z * scale))?;
        acc = compose_offsets(&acc, &d);
    }
    Ok(acc)
}

/// Left-to-right product of `e^{c t^q M_slot}`; the first term is the
/// leftmost factor.
pub fn evaluate(f: &ProductFormula, ops: &OperatorSet, t: f64) -> Result<ComplexMatrix> {
    Ok(add_identity(evaluate_offset(f, ops, t)?))
}

/// `e^{Z_k t^{k+1}}` with `k = ops.k()`.
pub fn exact_target(ops: &OperatorSet, t: f64) -> Result<ComplexMatrix> {
    let k = ops.k() as i32;
    linalg::expm(&nested_z(ops).map(|z| z * t.powi(k + 1)))
}

/// The generator `G` with target `e^{G t^{k+1}}` for the formula's kind.
pub fn target_generator(f: &ProductFormula, ops: &OperatorSet) -> Result<ComplexMatrix> {
    let need = match f.target() {
        Target::Nested => f.k() as usize + 1,
        Target::Commutator | Target::DoubleCommutator => 2,
    };
    if ops.len() != need {
        return Err(Error::InvalidArgument(format!(
            "{} target with k={} needs {need} operators, got {}",
            f.target().as_str(),
            f.k(),
            ops.len()
        )));
    }
    let o = ops.ops();
    match f.target() {
        Target::Nested => Ok(nested_z(ops)),
        Target::Commutator => commutator(&o[1], &o[0]),
        Target::DoubleCommutator => Ok(-commutator(&o[1], &commutator(&o[1], &o[0])?)?),
    }
}

/// `e^{G t^{k+1}} - I` for the formula's target.
pub fn exact_offset(f: &ProductFormula, ops: &OperatorSet, t: f64) -> Result<ComplexMatrix> {
    let g = target_generator(f, ops)?;
    expm_offset(&g.map(|z| z * t.powi(f.k() as i32 + 1)))
}

/// The formula's target as a full matrix.
pub fn exact_for(f: &ProductFormula, ops: &OperatorSet, t: f64) -> Result<ComplexMatrix> {
    Ok(add_identity(exact_offset(f, ops, t)?))
}

/// Spectral-norm distance between the formula and its target.
pub fn error_at(f: &ProductFormula, ops: &OperatorSet, t: f64) -> Result<f64> {
    let approx = evaluate_offset(f, ops, t)?;
    let exact = exact_offset(f, ops, t)?;
    Ok(spectral_norm(&(approx - exact)))
}

/// `points` values from `tmax` down to `tmin`, equally spaced in log t.
pub fn geometric_grid(tmin: f64, tmax: f64, points: usize) -> Result<Vec<f64>> {
    if !(tmin > 0.0 && tmax > tmin && tmax.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "grid needs 0 < tmin < tmax, got [{tmin}, {tmax}]"
        )));
    }
    if points < 2 {
        return Err(Error::InvalidArgument(
            "grid needs at least 2 points".into(),
        ));
    }
    let (lo, hi) = (tmin.ln(), tmax.ln());
    Ok((0..points)
        .map(|i| (hi + (lo - hi) * i as f64 / (points - 1) as f64).exp())
        .collect())
}

fn check_grid(grid: &[f64]) -> Result<Vec<f64>> {
    if grid.len() < MIN_GRID_POINTS {
        return Err(Error::InvalidArgument(format!(
            "scan grid needs at least {MIN_GRID_POINTS} points, got {}",
            grid.len()
        )));
    }
    if grid.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
        return Err(Error::InvalidArgument("scan times must be positive".into()));
    }
    let mut sorted = grid.to_vec();
    sorted.sort_by(f64::total_cmp);
    let steps: Vec<f64> = sorted.windows(2).map(|w| (w[1] / w[0]).ln()).collect();
    let first = steps[0];
    let geometric = steps
        .iter()
        .all(|s| (s - first).abs() <= 1e-6 * first.abs().max(1e-300));
    if !(first > 0.0 && geometric) {
        return Err(Error::InvalidArgument("scan grid must be geometric".into()));
    }
    if first > 0.5 * std::f64::consts::LN_10 * (1.0 + 1e-9) {
        return Err(Error::InvalidArgument(format!(
            "scan grid step ratio {:.3} is coarser than half a decade",
            first.exp()
        )));
    }
    Ok(sorted)
}

/// Rows and fitted log-log slope of an error scan.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanResult {
    /// `(t, error)` sorted by ascending `t`.
    pub rows: Vec<(f64, f64)>,
    pub fitted_slope: f64,
    pub fit_window: (f64, f64),
    pub usable: usize,
    /// Free-form `key=value` metadata written to the CSV header.
    pub metadata: Vec<(String, String)>,
}

/// Ordinary least-squares slope of `log error` against `log t` over rows
/// whose error lies in `[lo, hi]`.
pub fn fit_slope(rows: &[(f64, f64)], lo: f64, hi: f64) -> Result<(f64, usize)> {
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|(_, e)| *e >= lo && *e <= hi && *e > 0.0)
        .map(|(t, e)| (t.ln(), e.ln()))
        .collect();
    if pts.len() < MIN_USABLE_ROWS {
        return Err(Error::InsufficientData {
            usable: pts.len(),
            needed: MIN_USABLE_ROWS,
            lo,
            hi,
        });
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Ok((sxy / sxx, pts.len()))
}

fn formula_metadata(f: &ProductFormula) -> Vec<(String, String)> {
    vec![
        ("k".into(), f.k().to_string()),
        ("p2".into(), f.p2().to_string()),
        ("nu".into(), f.nu().to_string()),
        ("terms".into(), f.len().to_string()),
        ("target".into(), f.target().as_str().into()),
        ("symmetry".into(), f.symmetry().as_str().into()),
    ]
}

/// Errors over a geometric grid and the fitted convergence order.
///
/// The grid needs at least eight points spaced half a decade or finer. Grid
/// points are evaluated concurrently and merged by `t`.
pub fn order_scan(f: &ProductFormula, ops: &OperatorSet, grid: &[f64]) -> Result<ScanResult> {
    let times = check_grid(grid)?;
    let errors: Vec<f64> = times
        .par_iter()
        .map(|t| error_at(f, ops, *t))
        .collect::<Result<_>>()?;
    let rows: Vec<(f64, f64)> = times.into_iter().zip(errors).collect();
    let (fitted_slope, usable) = fit_slope(&rows, FIT_ERROR_MIN, FIT_ERROR_MAX)?;
    Ok(ScanResult {
        rows,
        fitted_slope,
        fit_window: (FIT_ERROR_MIN, FIT_ERROR_MAX),
        usable,
        metadata: formula_metadata(f),
    })
}

/// Default scan range and resolution: 41 points from `1e-3` to `0.1`.
pub const SCAN_TMIN: f64 = 1e-3;
pub const SCAN_TMAX: f64 = 0.1;
pub const SCAN_POINTS: usize = 41;

/// [`geometric_grid`] over the default scan range.
pub fn reference_grid() -> Vec<f64> {
    geometric_grid(SCAN_TMIN, SCAN_TMAX, SCAN_POINTS).expect("default grid is valid")
}

/// Pauli operators for a formula's target: `(iσx, iσz)` in slots 1 and 0
/// for the double commutator, otherwise `-iσz` in slot 0 and `-iσx` in every
/// other slot.
pub fn pauli_xz(f: &ProductFormula) -> Result<OperatorSet> {
    let x = linalg::pauli(linalg::Pauli::X);
    let z = linalg::pauli(linalg::Pauli::Z);
    let i = Complex64::new(0.0, 1.0);
    match f.target() {
        Target::DoubleCommutator => OperatorSet::pair(x.map(|v| i * v), z.map(|v| i * v)),
        Target::Commutator => OperatorSet::pair(x.map(|v| -i * v), z.map(|v| -i * v)),
        Target::Nested => OperatorSet::new(
            std::iter::once(z.map(|v| -i * v))
                .chain((0..f.k()).map(|_| x.map(|v| -i * v)))
                .collect(),
        ),
    }
}

/// Scan over `t = 10^{-j/10}` for `t` from 1 down to `1e-8`, which puts
/// several rows in the fit window for any order up to about 12.
pub fn order_scan_auto(f: &ProductFormula, ops: &OperatorSet) -> Result<ScanResult> {
    let grid: Vec<f64> = (0..=80).map(|j| 10f64.powf(-f64::from(j) / 10.0)).collect();
    order_scan(f, ops, &grid)
}

/// Fitted order of `f` on seeded random anti-Hermitian `dim x dim`
/// operators with unit spectral norm.
pub fn verify_order(f: &ProductFormula, dim: usize, seed: u64) -> Result<f64> {
    let ops = random_operator_set(f.n_slots(), dim, seed)?;
    Ok(order_scan_auto(f, &ops)?.fitted_slope)
}

/// `n` seeded random anti-Hermitian `dim x dim` operators, unit norm.
pub fn random_operator_set(n: usize, dim: usize, seed: u64) -> Result<OperatorSet> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    OperatorSet::new(
        (0..n)
            .map(|_| linalg::random_anti_hermitian(dim, &mut rng))
            .collect(),
    )
}

/// `(I + s)^r - I` by repeated squaring in offset form.
pub fn power_offset(step: &ComplexMatrix, r: u64) -> ComplexMatrix {
    let dim = step.nrows();
    let mut result = DMatrix::zeros(dim, dim);
    let mut base = step.clone();
    let mut e = r;
    while e > 0 {
        if e & 1 == 1 {
            result = compose_offsets(&result, &base);
        }
        e >>= 1;
        if e > 0 {
            base = compose_offsets(&base, &base);
        }
    }
    result
}

/// Step duration `t / r^{1/(k+1)}`.
pub fn step_time(k: u32, t: f64, r: u64) -> f64 {
    t / (r as f64).powf(1.0 / f64::from(k + 1))
}

/// `evaluate(f, ops, t / r^{1/(k+1)})^r - I`.
pub fn segment_evolve_offset(
    f: &ProductFormula,
    ops: &OperatorSet,
    t: f64,
    r: u64,
) -> Result<ComplexMatrix> {
    if r == 0 {
        return Err(Error::InvalidArgument(
            "segment count must be at least 1".into(),
        ));
    }
    let step = evaluate_offset(f, ops, step_time(f.k(), t, r))?;
    Ok(power_offset(&step, r))
}

/// `evaluate(f, ops, t / r^{1/(k+1)})^r`.
pub fn segment_evolve(
    f: &ProductFormula,
    ops: &OperatorSet,
    t: f64,
    r: u64,
) -> Result<ComplexMatrix> {
    Ok(add_identity(segment_evolve_offset(f, ops, t, r)?))
}

/// Spectral-norm error of [`segment_evolve`] against the target at `t`.
pub fn segment_error(f: &ProductFormula, ops: &OperatorSet, t: f64, r: u64) -> Result<f64> {
    let approx = segment_evolve_offset(f, ops, t, r)?;
    Ok(spectral_norm(&(approx - exact_offset(f, ops, t)?)))
}

fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

impl ScanResult {
    /// CSV text: `#` metadata lines, the slope line, a `t,error` header and
    /// one row per grid point.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for (key, value) in &self.metadata {
            let _ = writeln!(out, "# {key}={value}");
        }
        let _ = writeln!(
            out,
            "# slope={:.6} window=[{:e},{:e}] points={}",
            self.fitted_slope, self.fit_window.0, self.fit_window.1, self.usable
        );
        out.push_str("t,error\n");
        for (t, e) in &self.rows {
            let _ = writeln!(out, "{},{}", fmt_f64(*t), fmt_f64(*e));
        }
        out
    }

    /// Parses the rows and metadata written by [`ScanResult::to_csv`]; the
    /// slope is refitted from the rows.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut metadata = Vec::new();
        let mut rows = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let parse_err = |message: String| Error::Parse {
                line: i + 1,
                column: 1,
                message,
            };
            if let Some(rest) = line.strip_prefix('#') {
                let rest = rest.trim();
                if rest.starts_with("slope=") {
                    continue;
                }
                if let Some((k, v)) = rest.split_once('=') {
                    metadata.push((k.to_string(), v.to_string()));
                }
                continue;
            }
            if line == "t,error" || line.trim().is_empty() {
                continue;
            }
            let (t, e) = line
                .split_once(',')
                .ok_or_else(|| parse_err(format!("expected 't,error', got '{line}'")))?;
            let t: f64 = t
                .parse()
                .map_err(|_| parse_err(format!("bad time '{t}'")))?;
            let e: f64 = e
                .parse()
                .map_err(|_| parse_err(format!("bad error '{e}'")))?;
            rows.push((t, e));
        }
        let (fitted_slope, usable) = fit_slope(&rows, FIT_ERROR_MIN, FIT_ERROR_MAX)?;
        Ok(Self {
            rows,
            fitted_slope,
            fit_window: (FIT_ERROR_MIN, FIT_ERROR_MAX),
            usable,
            metadata,
        })
    }
}
