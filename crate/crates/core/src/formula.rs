//! Product formulas as ordered lists of elementary exponentials.
//!
//! A term `(slot, c, q)` stands for `e^{c t^q M_slot}`. The first term of a
//! formula is the leftmost matrix factor. Orders are threaded as `p2 = 2p`
//! so half-integer orders stay exact.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Abstract operator label. In nested formulas slot `j` is `A_j` (slot 0 is
/// innermost); in two-operator formulas slot 1 is `A` and slot 0 is `B`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SlotId(pub u32);

impl SlotId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for SlotId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// The `A` slot of a two-operator formula.
pub const SLOT_A: SlotId = SlotId(1);
/// The `B` slot of a two-operator formula.
pub const SLOT_B: SlotId = SlotId(0);

/// One elementary exponential `e^{coeff * t^tpow * M_slot}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpTerm {
    pub slot: SlotId,
    pub coeff: f64,
    pub tpow: u32,
}

impl ExpTerm {
    pub fn new(slot: u32, coeff: f64, tpow: u32) -> Self {
        Self {
            slot: SlotId(slot),
            coeff,
            tpow,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Symmetry {
    Symmetric,
    Antisymmetric,
    None,
}

impl Symmetry {
    /// The tag after one odd-k recursion step.
    pub fn flipped(self) -> Self {
        match self {
            Symmetry::Symmetric => Symmetry::Antisymmetric,
            Symmetry::Antisymmetric => Symmetry::Symmetric,
            Symmetry::None => Symmetry::None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Symmetry::Symmetric => "symmetric",
            Symmetry::Antisymmetric => "antisymmetric",
            Symmetry::None => "none",
        }
    }
}

impl FromStr for Symmetry {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "symmetric" => Ok(Symmetry::Symmetric),
            "antisymmetric" => Ok(Symmetry::Antisymmetric),
            "none" => Ok(Symmetry::None),
            other => Err(Error::InvalidArgument(format!(
                "unknown symmetry '{other}'"
            ))),
        }
    }
}

/// The exponential a formula approximates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Target {
    /// `e^{Z_k t^{k+1}}` over slots `0..=k`.
    Nested,
    /// `e^{[A,B] t^{k+1}}` with `A` in slot 1 and `B` in slot 0.
    Commutator,
    /// `e^{-[A,[A,B]] t^3}`, the repeated-outer-operator target.
    DoubleCommutator,
}

impl Target {
    pub fn as_str(self) -> &'static str {
        match self {
            Target::Nested => "nested",
            Target::Commutator => "commutator",
            Target::DoubleCommutator => "double-commutator",
        }
    }
}

/// An ordered product of elementary exponentials plus its metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductFormula {
    k: u32,
    p2: u32,
    terms: Vec<ExpTerm>,
    symmetry: Symmetry,
    nu: u32,
    target: Target,
}

/// Term count and coefficient magnitudes of a formula.
#[derive(Debug, Clone, PartialEq)]
pub struct FormulaStats {
    pub n_terms: usize,
    pub q_mean: f64,
    pub q_max: f64,
    /// Coefficient sums keyed by `(slot, tpow)`.
    pub slot_sums: BTreeMap<(SlotId, u32), f64>,
}

fn slot_set(terms: &[ExpTerm]) -> BTreeSet<u32> {
    terms.iter().map(|t| t.slot.0).collect()
}

fn check_target(k: u32, target: Target, terms: &[ExpTerm]) -> Result<()> {
    let slots = slot_set(terms);
    let max = *slots.iter().next_back().expect("terms are nonempty");
    let contiguous = slots.len() as u32 == max + 1;
    match target {
        Target::Nested => {
            if max != k || !contiguous {
                return Err(Error::InvalidArgument(format!(
                    "nested formula with k={k} must use every slot 0..={k}, found {slots:?}"
                )));
            }
        }
        Target::Commutator | Target::DoubleCommutator => {
            if max != 1 || !contiguous {
                return Err(Error::InvalidArgument(format!(
                    "two-operator formula must use slots 0 and 1, found {slots:?}"
                )));
            }
            if target == Target::DoubleCommutator && k != 2 {
                return Err(Error::InvalidArgument(format!(
                    "double-commutator target needs k=2, got k={k}"
                )));
            }
        }
    }
    Ok(())
}

fn infer_target(k: u32, terms: &[ExpTerm]) -> Target {
    let max = terms.iter().map(|t| t.slot.0).max().unwrap_or(0);
    if max == k {
        Target::Nested
    } else {
        Target::Commutator
    }
}

impl ProductFormula {
    /// Validated constructor.
    pub fn new(
        k: u32,
        p2: u32,
        terms: Vec<ExpTerm>,
        symmetry: Symmetry,
        nu: u32,
        target: Target,
    ) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidArgument("k must be at least 1".into()));
        }
        if p2 == 0 {
            return Err(Error::InvalidArgument("p2 must be at least 1".into()));
        }
        if nu <= k + 1 {
            return Err(Error::InvalidArgument(format!(
                "claimed order nu={nu} must exceed k+1={}",
                k + 1
            )));
        }
        if terms.is_empty() {
            return Err(Error::InvalidArgument(
                "a formula needs at least one term".into(),
            ));
        }
        for (i, term) in terms.iter().enumerate() {
            if !term.coeff.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "term {i} has a non-finite coefficient"
                )));
            }
            if term.tpow == 0 || term.tpow > k {
                return Err(Error::InvalidArgument(format!(
                    "term {i} has tpow={} outside 1..={k}",
                    term.tpow
                )));
            }
        }
        check_target(k, target, &terms)?;
        Ok(Self {
            k,
            p2,
            terms,
            symmetry,
            nu,
            target,
        })
    }

    /// Like [`ProductFormula::new`], inferring the target from the slots used:
    /// `k + 1` slots means nested, two slots means a plain commutator.
    pub fn with_inferred_target(
        k: u32,
        p2: u32,
        terms: Vec<ExpTerm>,
        symmetry: Symmetry,
        nu: u32,
    ) -> Result<Self> {
        let target = infer_target(k, &terms);
        Self::new(k, p2, terms, symmetry, nu, target)
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn p2(&self) -> u32 {
        self.p2
    }

    pub fn terms(&self) -> &[ExpTerm] {
        &self.terms
    }

    pub fn symmetry(&self) -> Symmetry {
        self.symmetry
    }

    pub fn nu(&self) -> u32 {
        self.nu
    }

    pub fn target(&self) -> Target {
        self.target
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Number of operator slots the formula reads (`max slot + 1`).
    pub fn n_slots(&self) -> usize {
        self.terms.iter().map(|t| t.slot.index()).max().unwrap_or(0) + 1
    }

    pub fn with_symmetry(mut self, symmetry: Symmetry) -> Self {
        self.symmetry = symmetry;
        self
    }

    pub fn with_order(mut self, p2: u32, nu: u32) -> Result<Self> {
        if p2 == 0 || nu <= self.k + 1 {
            return Err(Error::InvalidArgument(format!(
                "invalid order p2={p2}, nu={nu} for k={}",
                self.k
            )));
        }
        self.p2 = p2;
        self.nu = nu;
        Ok(self)
    }

    /// Multiplies each coefficient by its slot's factor.
    pub fn scale(&self, factors: &BTreeMap<SlotId, f64>) -> Result<Self> {
        let mut terms = self.terms.clone();
        for term in &mut terms {
            let f = factors.get(&term.slot).ok_or_else(|| {
                Error::InvalidArgument(format!("no scale factor for slot {}", term.slot))
            })?;
            if !f.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "non-finite scale factor for slot {}",
                    term.slot
                )));
            }
            term.coeff *= f;
        }
        let used = slot_set(&self.terms);
        let mags: Vec<f64> = used.iter().map(|s| factors[&SlotId(*s)].abs()).collect();
        let uniform = mags.windows(2).all(|w| w[0] == w[1]);
        let symmetry = if uniform {
            self.symmetry
        } else {
            Symmetry::None
        };
        Ok(Self {
            terms,
            symmetry,
            ..self.clone()
        })
    }

    /// Same factor for every slot.
    pub fn scale_uniform(&self, factor: f64) -> Result<Self> {
        let factors = (0..self.n_slots() as u32)
            .map(|s| (SlotId(s), factor))
            .collect();
        self.scale(&factors)
    }

    /// Exact inverse: reversed order, negated coefficients.
    pub fn invert(&self) -> Self {
        let terms = self
            .terms
            .iter()
            .rev()
            .map(|t| ExpTerm {
                coeff: -t.coeff,
                ..*t
            })
            .collect();
        Self {
            terms,
            ..self.clone()
        }
    }

    /// `self` followed by `other`. The result has no symmetry tag and the
    /// smaller of the two orders.
    pub fn concat(&self, other: &Self) -> Result<Self> {
        if self.k != other.k {
            return Err(Error::InvalidArgument(format!(
                "cannot concatenate k={} with k={}",
                self.k, other.k
            )));
        }
        if self.target != other.target {
            return Err(Error::InvalidArgument(format!(
                "cannot concatenate {} with {} formulas",
                self.target.as_str(),
                other.target.as_str()
            )));
        }
        let mut terms = Vec::with_capacity(self.len() + other.len());
        terms.extend_from_slice(&self.terms);
        terms.extend_from_slice(&other.terms);
        Ok(Self {
            k: self.k,
            p2: self.p2.min(other.p2),
            terms,
            symmetry: Symmetry::None,
            nu: self.nu.min(other.nu),
            target: self.target,
        })
    }

    /// Concatenation of several formulas in order.
    pub fn concat_all(parts: &[Self]) -> Result<Self> {
        let (first, rest) = parts
            .split_first()
            .ok_or_else(|| Error::InvalidArgument("nothing to concatenate".into()))?;
        let mut out = first.clone();
        for part in rest {
            out = out.concat(part)?;
        }
        if parts.len() == 1 {
            out.symmetry = Symmetry::None;
        }
        Ok(out)
    }

    /// Merges adjacent terms that share slot and tpow, dropping terms with
    /// `|coeff| <= tol`. Merges cascade, so `(A,1)(B,1)(B,-1)(A,2)` becomes
    /// `(A,3)`.
    ///
    /// A formula that cancels completely is kept as a single zero term on
    /// slot 0 so the result is still a valid (identity) formula.
    pub fn simplify(&self, tol: f64) -> Self {
        let tol = tol.max(0.0);
        let mut out: Vec<ExpTerm> = Vec::with_capacity(self.terms.len());
        for term in &self.terms {
            let mut current = *term;
            if let Some(last) = out.last() {
                if last.slot == current.slot && last.tpow == current.tpow {
                    current.coeff += last.coeff;
                    out.pop();
                }
            }
            if current.coeff.abs() > tol {
                out.push(current);
            }
        }
        if out.is_empty() {
            out.push(ExpTerm::new(0, 0.0, 1));
        }
        Self {
            terms: out,
            ..self.clone()
        }
    }

    pub fn stats(&self) -> FormulaStats {
        let n = self.terms.len();
        let mut sum_abs = 0.0;
        let mut q_max: f64 = 0.0;
        let mut slot_sums = BTreeMap::new();
        for t in &self.terms {
            sum_abs += t.coeff.abs();
            q_max = q_max.max(t.coeff.abs());
            *slot_sums.entry((t.slot, t.tpow)).or_insert(0.0) += t.coeff;
        }
        FormulaStats {
            n_terms: n,
            q_mean: sum_abs / n as f64,
            q_max,
            slot_sums,
        }
    }

    /// Pretty-printed JSON document.
    pub fn to_json(&self) -> String {
        let doc = FormulaDoc {
            k: self.k,
            p2: self.p2,
            symmetry: self.symmetry,
            nu: self.nu,
            target: Some(self.target),
            terms: self
                .terms
                .iter()
                .map(|t| TermDoc {
                    slot: t.slot.0,
                    coeff: format!("{:.16e}", t.coeff),
                    tpow: t.tpow,
                })
                .collect(),
        };
        serde_json::to_string_pretty(&doc).expect("formula documents always serialize")
    }

    /// Parses a JSON document. Errors carry the line and column where
    /// parsing stopped.
    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ValidatedDoc = serde_json::from_str(text).map_err(|e| Error::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        Ok(doc.0)
    }
}

#[derive(Serialize, Deserialize)]
struct TermDoc {
    slot: u32,
    #[serde(deserialize_with = "de_coeff")]
    coeff: String,
    #[serde(deserialize_with = "de_tpow")]
    tpow: u32,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FormulaDoc {
    k: u32,
    p2: u32,
    symmetry: Symmetry,
    nu: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    target: Option<Target>,
    terms: Vec<TermDoc>,
}

#[derive(Deserialize)]
#[serde(try_from = "FormulaDoc")]
struct ValidatedDoc(ProductFormula);

impl TryFrom<FormulaDoc> for ValidatedDoc {
    type Error = String;

    fn try_from(doc: FormulaDoc) -> std::result::Result<Self, String> {
        let terms: Vec<ExpTerm> = doc
            .terms
            .iter()
            .map(|t| {
                ExpTerm::new(
                    t.slot,
                    t.coeff.parse().expect("checked by de_coeff"),
                    t.tpow,
                )
            })
            .collect();
        let target = doc.target.unwrap_or_else(|| infer_target(doc.k, &terms));
        ProductFormula::new(doc.k, doc.p2, terms, doc.symmetry, doc.nu, target)
            .map(ValidatedDoc)
            .map_err(|e| e.to_string())
    }
}

fn de_coeff<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<String, D::Error> {
    let s = String::deserialize(d)?;
    match s.trim().parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(s),
        _ => Err(serde::de::Error::custom(format!(
            "coefficient '{s}' is not a finite number"
        ))),
    }
}

fn de_tpow<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<u32, D::Error> {
    let v = u32::deserialize(d)?;
    if v == 0 {
        return Err(serde::de::Error::custom("tpow must be a positive integer"));
    }
    Ok(v)
}
