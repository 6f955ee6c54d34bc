//! H-representation polytopes `{x : A x ≤ b}`.
//!
//! Every set operation needed by the fixed-point engine is native to this
//! representation: intersection stacks constraints, containment and emptiness
//! reduce to one LP per row, and projection is Fourier–Motzkin elimination
//! with redundancy removal after each eliminated coordinate.
//!
//! Empty sets have a single canonical encoding, the zero row `0·x ≤ −1`, so
//! downstream code can test emptiness structurally once a set has been through
//! [`Polytope::remove_redundancy`].

mod fourier_motzkin;
pub mod lp;
mod vertices;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
pub use lp::{LpOutcome, LpStatus};

/// Rows whose Euclidean norm falls below this are treated as `0·x ≤ b`.
const ZERO_ROW: f64 = 1e-12;
/// Normals closer than this (after normalization) are considered parallel.
const PARALLEL: f64 = 1e-10;

/// Numeric tolerances for feasibility, redundancy and containment tests.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tolerance {
    pub feas: f64,
    pub red: f64,
    pub subset: f64,
}

impl Tolerance {
    pub const DEFAULT: f64 = 1e-7;

    pub fn uniform(eps: f64) -> Self {
        Tolerance {
            feas: eps,
            red: eps,
            subset: eps,
        }
    }
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance::uniform(Self::DEFAULT)
    }
}

/// A convex polyhedron `{x ∈ ℝⁿ : A x ≤ b}` with `A` stored row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PolytopeJson", into = "PolytopeJson")]
pub struct Polytope {
    dim: usize,
    a: Vec<f64>,
    b: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct PolytopeJson {
    #[serde(rename = "A")]
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    dim: Option<usize>,
}

impl TryFrom<PolytopeJson> for Polytope {
    type Error = Error;

    fn try_from(json: PolytopeJson) -> Result<Self> {
        let dim = match (json.a.first(), json.dim) {
            (Some(row), _) => row.len(),
            (None, Some(d)) => d,
            (None, None) => {
                return Err(Error::MalformedPolytope(
                    "a polytope without rows needs an explicit \"dim\"".into(),
                ))
            }
        };
        Polytope::new(dim, json.a, json.b)
    }
}

impl From<Polytope> for PolytopeJson {
    fn from(p: Polytope) -> Self {
        let a = p.rows().map(|(row, _)| row.to_vec()).collect();
        let dim = (p.b.is_empty()).then_some(p.dim);
        PolytopeJson { a, b: p.b, dim }
    }
}

impl Polytope {
    pub fn new(dim: usize, rows: Vec<Vec<f64>>, b: Vec<f64>) -> Result<Self> {
        if rows.len() != b.len() {
            return Err(Error::MalformedPolytope(format!(
                "{} rows but {} right-hand sides",
                rows.len(),
                b.len()
            )));
        }
        let mut a = Vec::with_capacity(rows.len() * dim);
        for row in &rows {
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: row.len(),
                });
            }
            a.extend_from_slice(row);
        }
        if a.iter().chain(&b).any(|v| v.is_nan()) {
            return Err(Error::MalformedPolytope("NaN coefficient".into()));
        }
        Ok(Polytope { dim, a, b })
    }

    pub(crate) fn from_raw(dim: usize, a: Vec<f64>, b: Vec<f64>) -> Self {
        debug_assert_eq!(a.len(), dim * b.len());
        Polytope { dim, a, b }
    }

    /// The whole space `ℝⁿ` (no constraints).
    pub fn universe(dim: usize) -> Self {
        Polytope {
            dim,
            a: Vec::new(),
            b: Vec::new(),
        }
    }

    /// The canonical empty set `0·x ≤ −1`.
    pub fn empty(dim: usize) -> Self {
        Polytope {
            dim,
            a: vec![0.0; dim],
            b: vec![-1.0],
        }
    }

    /// Axis-aligned box `lo ≤ x ≤ hi`. Infinite bounds are skipped.
    pub fn from_box(lo: &[f64], hi: &[f64]) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::DimensionMismatch {
                expected: lo.len(),
                found: hi.len(),
            });
        }
        let dim = lo.len();
        let mut a = Vec::new();
        let mut b = Vec::new();
        for i in 0..dim {
            if hi[i].is_finite() {
                let mut row = vec![0.0; dim];
                row[i] = 1.0;
                a.extend(row);
                b.push(hi[i]);
            }
            if lo[i].is_finite() {
                let mut row = vec![0.0; dim];
                row[i] = -1.0;
                a.extend(row);
                b.push(0.0 - lo[i]);
            }
        }
        Ok(Polytope { dim, a, b })
    }

    /// Closed interval `[lo, hi]` on the real line.
    pub fn interval(lo: f64, hi: f64) -> Self {
        Polytope::from_box(&[lo], &[hi]).expect("one-dimensional box")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_rows(&self) -> usize {
        self.b.len()
    }

    pub fn row(&self, i: usize) -> (&[f64], f64) {
        (&self.a[i * self.dim..(i + 1) * self.dim], self.b[i])
    }

    pub fn rows(&self) -> impl Iterator<Item = (&[f64], f64)> + '_ {
        (0..self.n_rows()).map(move |i| self.row(i))
    }

    pub(crate) fn raw(&self) -> (&[f64], &[f64]) {
        (&self.a, &self.b)
    }

    /// True only for the structural empty encoding (a zero row with negative
    /// right-hand side). Use [`Polytope::is_empty`] for the semantic test.
    pub fn is_canonical_empty(&self) -> bool {
        self.rows()
            .any(|(row, rhs)| rhs < 0.0 && row.iter().all(|v| v.abs() < ZERO_ROW))
    }

    fn check_dim(&self, other: &Polytope) -> Result<()> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: other.dim,
            });
        }
        Ok(())
    }

    /// Scales every row to unit Euclidean norm. Zero rows are dropped when
    /// trivially satisfied and collapse the set to the canonical empty
    /// encoding otherwise.
    pub fn normalize(&self) -> Polytope {
        self.normalize_with(Tolerance::default().feas)
    }

    fn normalize_with(&self, feas: f64) -> Polytope {
        let mut a = Vec::with_capacity(self.a.len());
        let mut b = Vec::with_capacity(self.b.len());
        for (row, rhs) in self.rows() {
            let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm < ZERO_ROW {
                if rhs < -feas {
                    return Polytope::empty(self.dim);
                }
                continue;
            }
            a.extend(row.iter().map(|v| v / norm));
            b.push(rhs / norm);
        }
        Polytope { dim: self.dim, a, b }
    }

    /// Keeps only the tightest of each group of parallel rows. Expects
    /// normalized input.
    fn dedupe_parallel(&self) -> Polytope {
        let n = self.dim;
        let mut kept: Vec<usize> = Vec::new();
        for i in 0..self.n_rows() {
            let (row, rhs) = self.row(i);
            let twin = kept.iter().position(|&k| {
                let (other, _) = self.row(k);
                row.iter().zip(other).all(|(x, y)| (x - y).abs() < PARALLEL)
            });
            match twin {
                Some(pos) => {
                    if rhs < self.b[kept[pos]] {
                        kept[pos] = i;
                    }
                }
                None => kept.push(i),
            }
        }
        let mut a = Vec::with_capacity(kept.len() * n);
        let mut b = Vec::with_capacity(kept.len());
        for k in kept {
            let (row, rhs) = self.row(k);
            a.extend_from_slice(row);
            b.push(rhs);
        }
        Polytope { dim: n, a, b }
    }

    /// Largest ball `{c + r·e : ‖e‖ ≤ 1}` inside the set, with `r` capped at
    /// `cap` so unbounded sets still have an answer. The radius is negative
    /// (the most-violated-constraint distance) for empty sets.
    pub fn chebyshev(&self, cap: f64) -> Result<(Vec<f64>, f64)> {
        let p = self.normalize();
        if p.is_canonical_empty() {
            return Ok((vec![0.0; self.dim], f64::NEG_INFINITY));
        }
        let n = self.dim;
        let m = p.n_rows();
        if m == 0 {
            return Ok((vec![0.0; n], cap));
        }
        let mut a = Vec::with_capacity(m * (n + 1));
        for (row, _) in p.rows() {
            a.extend_from_slice(row);
            a.push(1.0);
        }
        let mut c = vec![0.0; n + 1];
        c[n] = 1.0;
        let mut bounds = vec![(f64::NEG_INFINITY, f64::INFINITY); n + 1];
        bounds[n] = (f64::NEG_INFINITY, cap);
        let out = lp::maximize(&c, &a, &p.b, Some(&bounds))?;
        match out.status {
            LpStatus::Optimal => {
                let mut point = out.point;
                let r = point.pop().unwrap_or(f64::NEG_INFINITY);
                Ok((point, r))
            }
            // The slack variable makes the program feasible; anything else is
            // a solver failure.
            other => Err(Error::Lp {
                row: None,
                detail: format!("Chebyshev program reported {other:?}"),
            }),
        }
    }

    /// True iff no point satisfies all constraints to within `tol.feas`.
    pub fn is_empty(&self, tol: &Tolerance) -> Result<bool> {
        if self.is_canonical_empty() {
            return Ok(true);
        }
        if self.n_rows() == 0 {
            return Ok(false);
        }
        if self.dim == 1 {
            return Ok(self.interval_bounds().is_none_or(|(lo, hi)| hi < lo - tol.feas));
        }
        let (_, r) = self.chebyshev(1.0)?;
        Ok(r < -tol.feas)
    }

    /// `[lo, hi]` of a one-dimensional set, `None` for the canonical empty
    /// encoding.
    fn interval_bounds(&self) -> Option<(f64, f64)> {
        debug_assert_eq!(self.dim, 1);
        let mut lo = f64::NEG_INFINITY;
        let mut hi = f64::INFINITY;
        for (row, rhs) in self.rows() {
            let c = row[0];
            if c > ZERO_ROW {
                hi = hi.min(rhs / c);
            } else if c < -ZERO_ROW {
                lo = lo.max(rhs / c);
            } else if rhs < 0.0 {
                return None;
            }
        }
        Some((lo, hi))
    }

    /// `max_{x∈P} c·x`, returning `f64::INFINITY` when unbounded.
    pub fn support(&self, c: &[f64]) -> Result<f64> {
        if self.dim == 1 && c.len() == 1 {
            let (lo, hi) = self.interval_bounds().ok_or(Error::EmptySet)?;
            if hi < lo {
                return Err(Error::EmptySet);
            }
            return Ok(match c[0] {
                v if v > 0.0 => v * hi,
                v if v < 0.0 => v * lo,
                _ => 0.0,
            });
        }
        if c.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: c.len(),
            });
        }
        if self.is_canonical_empty() {
            return Err(Error::EmptySet);
        }
        match lp::max_value(c, &self.a, &self.b)? {
            lp::Value::Finite(v) => Ok(v),
            lp::Value::Unbounded => Ok(f64::INFINITY),
            lp::Value::Infeasible => Err(Error::EmptySet),
        }
    }

    /// Full LP outcome of the support query, including the maximizer.
    pub fn support_lp(&self, c: &[f64]) -> Result<LpOutcome> {
        if c.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: c.len(),
            });
        }
        if self.is_canonical_empty() {
            return Err(Error::EmptySet);
        }
        let out = lp::maximize(c, &self.a, &self.b, None)?;
        match out.status {
            LpStatus::Infeasible => Err(Error::EmptySet),
            _ => Ok(out),
        }
    }

    /// `self ⊆ other`, tested row by row on `other` with slack `tol.subset`.
    /// An empty `self` is a subset of everything.
    pub fn is_subset(&self, other: &Polytope, tol: &Tolerance) -> Result<bool> {
        self.check_dim(other)?;
        if self.is_canonical_empty() {
            return Ok(true);
        }
        let q = other.normalize();
        if q.is_canonical_empty() {
            return self.is_empty(tol);
        }
        if self.dim == 1 {
            let Some((lo, hi)) = self.interval_bounds() else {
                return Ok(true);
            };
            if hi < lo - tol.feas {
                return Ok(true);
            }
            let Some((qlo, qhi)) = q.interval_bounds() else {
                return Ok(false);
            };
            return Ok(hi <= qhi + tol.subset && lo >= qlo - tol.subset);
        }
        for (i, (row, rhs)) in q.rows().enumerate() {
            let out = lp::max_value(row, &self.a, &self.b).map_err(|e| match e {
                Error::Lp { detail, .. } => Error::Lp {
                    row: Some(i),
                    detail,
                },
                other => other,
            })?;
            match out {
                lp::Value::Infeasible => return Ok(true),
                lp::Value::Unbounded => return Ok(false),
                lp::Value::Finite(v) if v > rhs + tol.subset => return Ok(false),
                lp::Value::Finite(_) => {}
            }
        }
        Ok(true)
    }

    /// Mutual containment.
    pub fn set_eq(&self, other: &Polytope, tol: &Tolerance) -> Result<bool> {
        Ok(self.is_subset(other, tol)? && other.is_subset(self, tol)?)
    }

    /// Drops every row whose removal leaves the set unchanged (to within
    /// `tol.red`). Empty inputs come back as the canonical empty set.
    pub fn remove_redundancy(&self, tol: &Tolerance) -> Result<Polytope> {
        let p = self.normalize_with(tol.feas);
        if p.is_canonical_empty() {
            return Ok(Polytope::empty(self.dim));
        }
        let p = p.dedupe_parallel();
        if p.n_rows() == 0 {
            return Ok(p);
        }
        if p.dim == 1 {
            return Ok(p.reduce_interval(tol));
        }
        if p.is_empty(tol)? {
            return Ok(Polytope::empty(self.dim));
        }
        let n = p.dim;
        let m = p.n_rows();
        let mut keep = vec![true; m];
        let mut a = Vec::with_capacity(m * n);
        let mut b = Vec::with_capacity(m);
        for i in 0..m {
            a.clear();
            b.clear();
            for j in (0..m).filter(|&j| j != i && keep[j]) {
                let (row, rhs) = p.row(j);
                a.extend_from_slice(row);
                b.push(rhs);
            }
            let (row, rhs) = p.row(i);
            // Cap the tested row so the program stays bounded.
            a.extend_from_slice(row);
            b.push(rhs + 1.0);
            if matches!(lp::max_value(row, &a, &b)?, lp::Value::Finite(v) if v <= rhs + tol.red) {
                keep[i] = false;
            }
        }
        let mut ka = Vec::new();
        let mut kb = Vec::new();
        for (i, _) in keep.iter().enumerate().filter(|(_, k)| **k) {
            let (row, rhs) = p.row(i);
            ka.extend_from_slice(row);
            kb.push(rhs);
        }
        Ok(Polytope {
            dim: n,
            a: ka,
            b: kb,
        })
    }

    fn reduce_interval(&self, tol: &Tolerance) -> Polytope {
        match self.interval_bounds() {
            None => Polytope::empty(1),
            Some((lo, hi)) if hi < lo - tol.feas => Polytope::empty(1),
            Some((lo, hi)) => Polytope::from_box(&[lo], &[hi]).expect("1-D box"),
        }
    }

    /// Intersection by constraint stacking followed by redundancy removal.
    pub fn intersect(&self, other: &Polytope, tol: &Tolerance) -> Result<Polytope> {
        self.check_dim(other)?;
        self.stack(other).remove_redundancy(tol)
    }

    /// Constraint stacking without redundancy removal.
    pub fn stack(&self, other: &Polytope) -> Polytope {
        debug_assert_eq!(self.dim, other.dim);
        let mut a = self.a.clone();
        a.extend_from_slice(&other.a);
        let mut b = self.b.clone();
        b.extend_from_slice(&other.b);
        Polytope { dim: self.dim, a, b }
    }

    /// Lifts the set into `total` dimensions, placing its coordinates at
    /// `offset..offset + dim`; the other coordinates are unconstrained.
    pub fn embed(&self, total: usize, offset: usize) -> Polytope {
        assert!(offset + self.dim <= total);
        let mut a = Vec::with_capacity(self.n_rows() * total);
        for (row, _) in self.rows() {
            let mut lifted = vec![0.0; total];
            lifted[offset..offset + self.dim].copy_from_slice(row);
            a.extend(lifted);
        }
        Polytope {
            dim: total,
            a,
            b: self.b.clone(),
        }
    }

    /// Orthogonal projection onto the coordinates in `keep` (0-based, in the
    /// order given), by Fourier–Motzkin elimination of all other coordinates.
    pub fn project(&self, keep: &[usize], tol: &Tolerance) -> Result<Polytope> {
        fourier_motzkin::project(self, keep, tol)
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        self.margin(x) >= -tol
    }

    /// Smallest normalized slack `(b_i − a_i·x)/‖a_i‖` over all rows; `+∞`
    /// for the universe.
    pub fn margin(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dim);
        self.rows()
            .map(|(row, rhs)| {
                let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
                let lhs: f64 = row.iter().zip(x).map(|(a, x)| a * x).sum();
                if norm < ZERO_ROW {
                    if lhs <= rhs {
                        f64::INFINITY
                    } else {
                        f64::NEG_INFINITY
                    }
                } else {
                    (rhs - lhs) / norm
                }
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Per-coordinate `[min, max]`, or `None` when the set is empty.
    /// Unbounded directions show up as infinite endpoints.
    pub fn bounding_box(&self, tol: &Tolerance) -> Result<Option<Vec<(f64, f64)>>> {
        if self.is_empty(tol)? {
            return Ok(None);
        }
        let mut out = Vec::with_capacity(self.dim);
        for i in 0..self.dim {
            let mut e = vec![0.0; self.dim];
            e[i] = 1.0;
            let hi = self.support(&e)?;
            e[i] = -1.0;
            let lo = -self.support(&e)?;
            out.push((lo, hi));
        }
        Ok(Some(out))
    }

    /// Vertices of a bounded set in at most three dimensions.
    pub fn vertices(&self, tol: &Tolerance) -> Result<Vec<Vec<f64>>> {
        vertices::enumerate(self, tol)
    }

    /// Lebesgue measure of a bounded set in at most three dimensions.
    pub fn volume(&self, tol: &Tolerance) -> Result<f64> {
        vertices::volume(self, tol)
    }
}
