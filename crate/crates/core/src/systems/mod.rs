//! Switched systems `x(t+1) ∈ f_σ(x(t), u(t))` and their controlled
//! predecessor operators.
//!
//! Two backends implement [`Plant`]: [`FiniteSystem`] (explicit transition
//! tables, exact) and [`AffineSystem`] (polytopic constraints, numeric).
//! [`SwitchedSystem`] wraps either one behind a single type.

mod affine;
mod finite;

use std::fmt::Debug;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Polytope;

pub use affine::{discretize, AffineMode, AffineSystem, Discretization};
pub use finite::{FiniteSet, FiniteSystem};

/// Set-valued dynamics together with the set algebra of its state space.
pub trait Plant {
    type Set: Clone + Debug;
    type State: Clone + Debug;
    type Input: Clone + Debug;

    fn num_modes(&self) -> usize;

    /// The state domain `X`.
    fn domain(&self) -> Self::Set;

    fn empty_set(&self) -> Self::Set;

    /// `{x ∈ X : ∃u ∈ U, f_m(x, u) ⊆ target for every m in modes}`.
    fn pre_common(&self, modes: &[usize], target: &Self::Set) -> Result<Self::Set>;

    fn intersect(&self, a: &Self::Set, b: &Self::Set) -> Result<Self::Set>;

    fn is_subset(&self, a: &Self::Set, b: &Self::Set) -> Result<bool>;

    fn is_empty(&self, a: &Self::Set) -> Result<bool>;

    fn set_eq(&self, a: &Self::Set, b: &Self::Set) -> Result<bool> {
        Ok(self.is_subset(a, b)? && self.is_subset(b, a)?)
    }

    fn contains(&self, set: &Self::Set, x: &Self::State) -> bool;

    /// Signed distance-like slack of `x` in `set`; negative outside.
    fn margin(&self, set: &Self::Set, x: &Self::State) -> f64;

    /// An input that keeps every successor of `x` under mode `mode` inside
    /// `target`, or `None` if there is none.
    fn select_input(&self, mode: usize, x: &Self::State, target: &Self::Set) -> Result<Option<Self::Input>>;

    /// Some admissible input, used when no input reaches the target.
    fn fallback_input(&self) -> Self::Input;

    /// One successor, with the nondeterminism resolved by `rng`.
    fn successor<R: Rng + ?Sized>(&self, mode: usize, x: &Self::State, u: &Self::Input, rng: &mut R)
        -> Result<Self::State>;

    /// A point of `set`, or `None` if it is empty.
    fn sample<R: Rng + ?Sized>(&self, set: &Self::Set, rng: &mut R) -> Result<Option<Self::State>>;
}

/// `Pre^{f_mode}(target)`.
pub fn pre<P: Plant>(plant: &P, mode: usize, target: &P::Set) -> Result<P::Set> {
    plant.pre_common(&[mode], target)
}

/// `Pre^{f_mode}(target) ∩ safe`.
pub fn pre_int<P: Plant>(plant: &P, mode: usize, target: &P::Set, safe: &P::Set) -> Result<P::Set> {
    pre_int_modes(plant, &[mode], target, safe)
}

fn pre_int_modes<P: Plant>(plant: &P, modes: &[usize], target: &P::Set, safe: &P::Set) -> Result<P::Set> {
    plant.intersect(&plant.pre_common(modes, target)?, safe)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixpointOptions {
    pub max_iters: usize,
}

impl Default for FixpointOptions {
    fn default() -> Self {
        FixpointOptions { max_iters: 500 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Converged,
    IterationCapped,
}

impl Status {
    /// `IterationCapped` wins over `Converged`.
    pub fn and(self, other: Status) -> Status {
        if self == Status::Converged {
            other
        } else {
            self
        }
    }
}

#[derive(Clone, Debug)]
pub struct InvOutcome<S> {
    pub set: S,
    pub status: Status,
    /// Number of `PreInt` applications.
    pub iterations: usize,
}

/// Maximal controlled invariant subset of `safe` under mode `mode`.
pub fn inv<P: Plant>(plant: &P, mode: usize, safe: &P::Set, opts: &FixpointOptions) -> Result<InvOutcome<P::Set>> {
    inv_modes(plant, &[mode], safe, opts)
}

/// Maximal subset of `safe` that can be kept invariant whatever mode in
/// `modes` is active at each step, the mode being unknown to the controller.
///
/// Iterates `V ← Pre(V) ∩ safe` from `V = safe`. Each new iterate must be
/// contained in the previous one; a violation is reported as an error.
pub fn inv_modes<P: Plant>(
    plant: &P,
    modes: &[usize],
    safe: &P::Set,
    opts: &FixpointOptions,
) -> Result<InvOutcome<P::Set>> {
    let mut current = safe.clone();
    let mut iterations = 0;
    loop {
        if iterations >= opts.max_iters {
            return Ok(InvOutcome {
                set: current,
                status: Status::IterationCapped,
                iterations,
            });
        }
        let next = pre_int_modes(plant, modes, &current, safe)?;
        iterations += 1;
        if !plant.is_subset(&next, &current)? {
            return Err(Error::InvariantViolated(format!(
                "invariance iterate {iterations} grew"
            )));
        }
        if plant.is_subset(&current, &next)? {
            return Ok(InvOutcome {
                set: next,
                status: Status::Converged,
                iterations,
            });
        }
        current = next;
    }
}

/// A state set tagged with its backend.
#[derive(Clone, Debug, PartialEq)]
pub enum StateSet {
    Finite(FiniteSet),
    Polytope(Polytope),
}

/// A state or input of either backend: an id or a real vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Point {
    Id(usize),
    Vector(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq)]
pub enum SwitchedSystem {
    Finite(FiniteSystem),
    Affine(AffineSystem),
}

impl SwitchedSystem {
    fn finite_set<'a>(&self, s: &'a StateSet) -> Result<&'a FiniteSet> {
        match s {
            StateSet::Finite(f) => Ok(f),
            StateSet::Polytope(_) => Err(Error::BackendMismatch),
        }
    }

    fn poly_set<'a>(&self, s: &'a StateSet) -> Result<&'a Polytope> {
        match s {
            StateSet::Polytope(p) => Ok(p),
            StateSet::Finite(_) => Err(Error::BackendMismatch),
        }
    }
}

fn id(p: &Point) -> Result<usize> {
    match p {
        Point::Id(i) => Ok(*i),
        Point::Vector(_) => Err(Error::BackendMismatch),
    }
}

fn vector(p: &Point) -> Result<&Vec<f64>> {
    match p {
        Point::Vector(v) => Ok(v),
        Point::Id(_) => Err(Error::BackendMismatch),
    }
}

impl Plant for SwitchedSystem {
    type Set = StateSet;
    type State = Point;
    type Input = Point;

    fn num_modes(&self) -> usize {
        match self {
            SwitchedSystem::Finite(s) => s.num_modes(),
            SwitchedSystem::Affine(s) => s.num_modes(),
        }
    }

    fn domain(&self) -> StateSet {
        match self {
            SwitchedSystem::Finite(s) => StateSet::Finite(s.domain()),
            SwitchedSystem::Affine(s) => StateSet::Polytope(s.domain()),
        }
    }

    fn empty_set(&self) -> StateSet {
        match self {
            SwitchedSystem::Finite(s) => StateSet::Finite(s.empty_set()),
            SwitchedSystem::Affine(s) => StateSet::Polytope(s.empty_set()),
        }
    }

    fn pre_common(&self, modes: &[usize], target: &StateSet) -> Result<StateSet> {
        match self {
            SwitchedSystem::Finite(s) => Ok(StateSet::Finite(s.pre_common(modes, self.finite_set(target)?)?)),
            SwitchedSystem::Affine(s) => Ok(StateSet::Polytope(s.pre_common(modes, self.poly_set(target)?)?)),
        }
    }

    fn intersect(&self, a: &StateSet, b: &StateSet) -> Result<StateSet> {
        match self {
            SwitchedSystem::Finite(s) => Ok(StateSet::Finite(s.intersect(self.finite_set(a)?, self.finite_set(b)?)?)),
            SwitchedSystem::Affine(s) => Ok(StateSet::Polytope(s.intersect(self.poly_set(a)?, self.poly_set(b)?)?)),
        }
    }

    fn is_subset(&self, a: &StateSet, b: &StateSet) -> Result<bool> {
        match self {
            SwitchedSystem::Finite(s) => s.is_subset(self.finite_set(a)?, self.finite_set(b)?),
            SwitchedSystem::Affine(s) => s.is_subset(self.poly_set(a)?, self.poly_set(b)?),
        }
    }

    fn is_empty(&self, a: &StateSet) -> Result<bool> {
        match self {
            SwitchedSystem::Finite(s) => s.is_empty(self.finite_set(a)?),
            SwitchedSystem::Affine(s) => s.is_empty(self.poly_set(a)?),
        }
    }

    fn contains(&self, set: &StateSet, x: &Point) -> bool {
        match (self, set, x) {
            (SwitchedSystem::Finite(s), StateSet::Finite(f), Point::Id(i)) => s.contains(f, i),
            (SwitchedSystem::Affine(s), StateSet::Polytope(p), Point::Vector(v)) => s.contains(p, v),
            _ => false,
        }
    }

    fn margin(&self, set: &StateSet, x: &Point) -> f64 {
        match (self, set, x) {
            (SwitchedSystem::Finite(s), StateSet::Finite(f), Point::Id(i)) => s.margin(f, i),
            (SwitchedSystem::Affine(s), StateSet::Polytope(p), Point::Vector(v)) => s.margin(p, v),
            _ => f64::NEG_INFINITY,
        }
    }

    fn select_input(&self, mode: usize, x: &Point, target: &StateSet) -> Result<Option<Point>> {
        match self {
            SwitchedSystem::Finite(s) => Ok(s
                .select_input(mode, &id(x)?, self.finite_set(target)?)?
                .map(Point::Id)),
            SwitchedSystem::Affine(s) => Ok(s
                .select_input(mode, vector(x)?, self.poly_set(target)?)?
                .map(Point::Vector)),
        }
    }

    fn fallback_input(&self) -> Point {
        match self {
            SwitchedSystem::Finite(s) => Point::Id(s.fallback_input()),
            SwitchedSystem::Affine(s) => Point::Vector(s.fallback_input()),
        }
    }

    fn successor<R: Rng + ?Sized>(&self, mode: usize, x: &Point, u: &Point, rng: &mut R) -> Result<Point> {
        match self {
            SwitchedSystem::Finite(s) => Ok(Point::Id(s.successor(mode, &id(x)?, &id(u)?, rng)?)),
            SwitchedSystem::Affine(s) => Ok(Point::Vector(s.successor(mode, vector(x)?, vector(u)?, rng)?)),
        }
    }

    fn sample<R: Rng + ?Sized>(&self, set: &StateSet, rng: &mut R) -> Result<Option<Point>> {
        match self {
            SwitchedSystem::Finite(s) => Ok(s.sample(self.finite_set(set)?, rng)?.map(Point::Id)),
            SwitchedSystem::Affine(s) => Ok(s.sample(self.poly_set(set)?, rng)?.map(Point::Vector)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wrapper_rejects_mixed_backends() {
        let sys = SwitchedSystem::Finite(FiniteSystem::from_fn(2, 1, 1, |_, x, _| vec![x]).unwrap());
        let poly = StateSet::Polytope(Polytope::interval(0.0, 1.0));
        assert!(matches!(pre(&sys, 0, &poly), Err(Error::BackendMismatch)));
        let fin = StateSet::Finite(FiniteSet::new([0]));
        assert_eq!(pre(&sys, 0, &fin).unwrap(), fin);
    }

    #[test]
    fn zero_cap_reports_capped() {
        let sys = FiniteSystem::from_fn(2, 1, 1, |_, x, _| vec![x]).unwrap();
        let out = inv(&sys, 0, &sys.domain(), &FixpointOptions { max_iters: 0 }).unwrap();
        assert_eq!(out.status, Status::IterationCapped);
    }

    #[test]
    fn status_combination() {
        assert_eq!(Status::Converged.and(Status::IterationCapped), Status::IterationCapped);
        assert_eq!(Status::IterationCapped.and(Status::Converged), Status::IterationCapped);
        assert_eq!(Status::Converged.and(Status::Converged), Status::Converged);
    }
}
