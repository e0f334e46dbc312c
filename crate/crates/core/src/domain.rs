//! Points, blackbox evaluations, caches and the (h, f) order shared by the
//! outer solver, the surrogate and the candidate selection.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Raised by a blackbox that could not produce its outputs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvalFailure(pub String);

impl fmt::Display for EvalFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "blackbox failure: {}", self.0)
    }
}

impl std::error::Error for EvalFailure {}

/// Blackbox returning `[f, c_1, ..., c_m]` for a design vector.
pub type Blackbox = dyn Fn(&[f64]) -> std::result::Result<Vec<f64>, EvalFailure> + Send + Sync;

/// A constrained blackbox problem `min f(x) s.t. c_j(x) <= 0, lower <= x <= upper`.
#[derive(Clone)]
pub struct ProblemSpec {
    pub name: String,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub integer_mask: Vec<bool>,
    pub n_constraints: usize,
    evaluator: Arc<Blackbox>,
}

impl fmt::Debug for ProblemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemSpec")
            .field("name", &self.name)
            .field("lower", &self.lower)
            .field("upper", &self.upper)
            .field("integer_mask", &self.integer_mask)
            .field("n_constraints", &self.n_constraints)
            .finish_non_exhaustive()
    }
}

impl ProblemSpec {
    pub fn new<F>(
        name: impl Into<String>,
        lower: Vec<f64>,
        upper: Vec<f64>,
        n_constraints: usize,
        evaluator: F,
    ) -> Result<Self>
    where
        F: Fn(&[f64]) -> std::result::Result<Vec<f64>, EvalFailure> + Send + Sync + 'static,
    {
        let n = lower.len();
        if n == 0 {
            return Err(Error::InvalidProblem("dimension must be at least 1".into()));
        }
        if upper.len() != n {
            return Err(Error::InvalidProblem(format!(
                "bound lengths differ ({} lower, {} upper)",
                n,
                upper.len()
            )));
        }
        for (i, (lo, up)) in lower.iter().zip(&upper).enumerate() {
            if lo.is_nan() || up.is_nan() || lo > up {
                return Err(Error::InvalidProblem(format!(
                    "variable {i}: lower bound {lo} exceeds upper bound {up}"
                )));
            }
        }
        Ok(Self {
            name: name.into(),
            lower,
            upper,
            integer_mask: vec![false; n],
            n_constraints,
            evaluator: Arc::new(evaluator),
        })
    }

    pub fn with_integer_mask(mut self, mask: Vec<bool>) -> Result<Self> {
        if mask.len() != self.dim() {
            return Err(Error::InvalidProblem("integer mask length mismatch".into()));
        }
        self.integer_mask = mask;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    /// Calls the blackbox and folds every failure mode (error, wrong arity,
    /// non-finite output) into a failed [`Evaluation`].
    pub fn evaluate(&self, x: &[f64]) -> Evaluation {
        match (self.evaluator)(x) {
            Ok(out) if out.len() == self.n_constraints + 1 => {
                Evaluation::from_outputs(x.to_vec(), out[0], out[1..].to_vec(), EvalSource::Blackbox)
            }
            Ok(out) => {
                log::warn!(
                    "{}: blackbox returned {} outputs, expected {}",
                    self.name,
                    out.len(),
                    self.n_constraints + 1
                );
                Evaluation::failed(x.to_vec(), EvalSource::Blackbox)
            }
            Err(e) => {
                log::debug!("{}: {e}", self.name);
                Evaluation::failed(x.to_vec(), EvalSource::Blackbox)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalSource {
    Blackbox,
    Surrogate,
}

/// Outputs at one point. Failed evaluations carry `f = h = +inf` and no
/// constraint vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub x: Vec<f64>,
    pub f: f64,
    pub c: Option<Vec<f64>>,
    pub h: f64,
    pub source: EvalSource,
}

impl Evaluation {
    pub fn from_outputs(x: Vec<f64>, f: f64, c: Vec<f64>, source: EvalSource) -> Self {
        match aggregate_violation(&c) {
            Some(h) if !f.is_nan() => Self {
                x,
                f,
                c: Some(c),
                h,
                source,
            },
            _ => Self::failed(x, source),
        }
    }

    pub fn failed(x: Vec<f64>, source: EvalSource) -> Self {
        Self {
            x,
            f: f64::INFINITY,
            c: None,
            h: f64::INFINITY,
            source,
        }
    }

    pub fn is_failed(&self) -> bool {
        self.c.is_none()
    }

    pub fn is_feasible(&self) -> bool {
        self.h == 0.0 && self.f < f64::INFINITY
    }

    pub fn score(&self) -> Score {
        Score::new(self.h, self.f)
    }
}

/// Aggregate constraint violation `sum_j max(0, c_j)^2`.
///
/// Returns `None` when a constraint value is not finite; callers treat that
/// as a failed evaluation.
pub fn aggregate_violation(c: &[f64]) -> Option<f64> {
    let mut h = 0.0;
    for &cj in c {
        if !cj.is_finite() {
            return None;
        }
        if cj > 0.0 {
            h += cj * cj;
        }
    }
    Some(h)
}

/// The `(h, f)` pair that drives the order `x ≺ x'`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Score {
    pub h: f64,
    pub f: f64,
}

impl Score {
    pub const fn new(h: f64, f: f64) -> Self {
        Self { h, f }
    }

    /// The virtual worst candidate: `h = f = +inf`.
    pub const WORST: Score = Score::new(f64::INFINITY, f64::INFINITY);

    /// `self ≺ other`: smaller violation, or equal violation and smaller objective.
    pub fn precedes(&self, other: &Score) -> bool {
        self.h < other.h || (self.h == other.h && self.f < other.f)
    }

    /// `self ⪯ other`, defined as `not(other ≺ self)`; a total preorder.
    pub fn precedes_eq(&self, other: &Score) -> bool {
        !other.precedes(self)
    }

    /// Ordering consistent with `precedes` (equal scores compare `Equal`).
    pub fn order(&self, other: &Score) -> Ordering {
        if self.precedes(other) {
            Ordering::Less
        } else if other.precedes(self) {
            Ordering::Greater
        } else {
            Ordering::Equal
        }
    }
}

pub fn precedes(a: &Evaluation, b: &Evaluation) -> bool {
    a.score().precedes(&b.score())
}

pub fn precedes_eq(a: &Evaluation, b: &Evaluation) -> bool {
    a.score().precedes_eq(&b.score())
}

/// Sentinel for the worst possible candidate: it has no coordinates, infinite
/// outputs and sits at distance zero from any evaluated set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct VirtualWorst;

impl VirtualWorst {
    pub fn score(&self) -> Score {
        Score::WORST
    }

    pub fn distance_to_evaluated(&self) -> f64 {
        0.0
    }
}

pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    squared_distance(a, b).sqrt()
}

/// `min_{a in A} min_{b in B} ||a - b||_2`, with `+inf` when either set is empty.
pub fn set_distance<A, B>(a: &[A], b: &[B]) -> f64
where
    A: AsRef<[f64]>,
    B: AsRef<[f64]>,
{
    let mut best = f64::INFINITY;
    for pa in a {
        for pb in b {
            let d2 = squared_distance(pa.as_ref(), pb.as_ref());
            if d2 < best {
                best = d2;
            }
        }
    }
    best.sqrt()
}

/// Bitwise key of a coordinate vector. `-0.0` is folded onto `+0.0`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PointKey(Box<[u64]>);

impl PointKey {
    pub fn new(x: &[f64]) -> Self {
        PointKey(
            x.iter()
                .map(|&v| if v == 0.0 { 0u64 } else { v.to_bits() })
                .collect(),
        )
    }
}

/// Insertion-ordered set of evaluations with exact-coordinate lookup.
#[derive(Debug, Clone, Default)]
pub struct Cache {
    entries: Vec<Evaluation>,
    index: HashMap<PointKey, usize>,
}

impl Cache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.index.contains_key(&PointKey::new(x))
    }

    pub fn get(&self, x: &[f64]) -> Option<&Evaluation> {
        self.index.get(&PointKey::new(x)).map(|&i| &self.entries[i])
    }

    /// Inserts `eval` unless its coordinates are already cached. Returns the
    /// index of the entry holding those coordinates and whether it is new.
    pub fn insert(&mut self, eval: Evaluation) -> (usize, bool) {
        let key = PointKey::new(&eval.x);
        if let Some(&i) = self.index.get(&key) {
            return (i, false);
        }
        let i = self.entries.len();
        self.index.insert(key, i);
        self.entries.push(eval);
        (i, true)
    }

    pub fn entries(&self) -> &[Evaluation] {
        &self.entries
    }

    pub fn iter(&self) -> impl Iterator<Item = &Evaluation> {
        self.entries.iter()
    }

    /// Best entry under `≺`; ties keep the earliest insertion.
    pub fn best(&self) -> Option<&Evaluation> {
        let mut best: Option<&Evaluation> = None;
        for e in &self.entries {
            if best.is_none_or(|b| precedes(e, b)) {
                best = Some(e);
            }
        }
        best
    }
}
