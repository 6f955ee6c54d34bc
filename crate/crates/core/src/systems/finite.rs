use std::collections::BTreeSet;

use rand::seq::IndexedRandom;
use rand::Rng;
use serde::Serialize;

use super::Plant;
use crate::error::{Error, Result};

/// Explicit set of state ids.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize)]
pub struct FiniteSet(BTreeSet<usize>);

impl FiniteSet {
    pub fn new(ids: impl IntoIterator<Item = usize>) -> Self {
        FiniteSet(ids.into_iter().collect())
    }

    pub fn empty() -> Self {
        FiniteSet::default()
    }

    pub fn contains(&self, x: usize) -> bool {
        self.0.contains(&x)
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_subset(&self, other: &FiniteSet) -> bool {
        self.0.is_subset(&other.0)
    }

    pub fn intersect(&self, other: &FiniteSet) -> FiniteSet {
        FiniteSet(self.0.intersection(&other.0).copied().collect())
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().copied()
    }
}

impl FromIterator<usize> for FiniteSet {
    fn from_iter<I: IntoIterator<Item = usize>>(iter: I) -> Self {
        FiniteSet::new(iter)
    }
}

/// Mode `m` maps `(x, u)` to `succ[m][x][u]`, a nonempty sorted id list.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FiniteSystem {
    states: Vec<String>,
    inputs: Vec<String>,
    mode_names: Vec<String>,
    succ: Vec<Vec<Vec<Vec<usize>>>>,
}

impl FiniteSystem {
    /// `tables[m][x][u]` lists the successors of `x` under `u` in mode `m`.
    pub fn new(
        states: Vec<String>,
        inputs: Vec<String>,
        mode_names: Vec<String>,
        tables: Vec<Vec<Vec<Vec<usize>>>>,
    ) -> Result<Self> {
        let (n, k) = (states.len(), inputs.len());
        if n == 0 || k == 0 {
            return Err(Error::InvalidSystem("need at least one state and one input".into()));
        }
        if tables.is_empty() || tables.len() != mode_names.len() {
            return Err(Error::InvalidSystem(format!(
                "{} mode names for {} transition tables",
                mode_names.len(),
                tables.len()
            )));
        }
        let mut succ = tables;
        for (m, table) in succ.iter_mut().enumerate() {
            if table.len() != n {
                return Err(Error::InvalidSystem(format!(
                    "mode {} has {} state rows, expected {n}",
                    mode_names[m],
                    table.len()
                )));
            }
            for (x, row) in table.iter_mut().enumerate() {
                if row.len() != k {
                    return Err(Error::InvalidSystem(format!(
                        "mode {} state {} has {} input entries, expected {k}",
                        mode_names[m],
                        states[x],
                        row.len()
                    )));
                }
                for (u, next) in row.iter_mut().enumerate() {
                    next.sort_unstable();
                    next.dedup();
                    if next.is_empty() {
                        return Err(Error::InvalidSystem(format!(
                            "mode {}: ({}, {}) has no successor",
                            mode_names[m], states[x], inputs[u]
                        )));
                    }
                    if let Some(&bad) = next.iter().find(|&&y| y >= n) {
                        return Err(Error::InvalidSystem(format!(
                            "mode {}: successor id {bad} out of range",
                            mode_names[m]
                        )));
                    }
                }
            }
        }
        Ok(FiniteSystem {
            states,
            inputs,
            mode_names,
            succ,
        })
    }

    /// Builds a system named `s1.., u1.., f1..` from a transition function.
    pub fn from_fn(
        n_states: usize,
        n_inputs: usize,
        n_modes: usize,
        f: impl Fn(usize, usize, usize) -> Vec<usize>,
    ) -> Result<Self> {
        let tables = (0..n_modes)
            .map(|m| {
                (0..n_states)
                    .map(|x| (0..n_inputs).map(|u| f(m, x, u)).collect())
                    .collect()
            })
            .collect();
        FiniteSystem::new(
            (1..=n_states).map(|i| format!("s{i}")).collect(),
            (1..=n_inputs).map(|i| format!("u{i}")).collect(),
            (1..=n_modes).map(|i| format!("f{i}")).collect(),
            tables,
        )
    }

    pub fn n_states(&self) -> usize {
        self.states.len()
    }

    pub fn n_inputs(&self) -> usize {
        self.inputs.len()
    }

    pub fn state_names(&self) -> &[String] {
        &self.states
    }

    pub fn input_names(&self) -> &[String] {
        &self.inputs
    }

    pub fn mode_names(&self) -> &[String] {
        &self.mode_names
    }

    pub fn state_index(&self, name: &str) -> Option<usize> {
        self.states.iter().position(|s| s == name)
    }

    pub fn input_index(&self, name: &str) -> Option<usize> {
        self.inputs.iter().position(|s| s == name)
    }

    pub fn successors(&self, mode: usize, x: usize, u: usize) -> &[usize] {
        &self.succ[mode][x][u]
    }

    /// The set of named states; unknown names are an error.
    pub fn named_set<S: AsRef<str>>(&self, names: &[S]) -> Result<FiniteSet> {
        names
            .iter()
            .map(|s| {
                self.state_index(s.as_ref())
                    .ok_or_else(|| Error::Spec(format!("unknown state {:?}", s.as_ref())))
            })
            .collect()
    }

    fn check_mode(&self, mode: usize) -> Result<()> {
        if mode < self.succ.len() {
            Ok(())
        } else {
            Err(Error::UnknownMode(mode))
        }
    }

    fn admissible(&self, modes: &[usize], x: usize, u: usize, target: &FiniteSet) -> bool {
        modes
            .iter()
            .all(|&m| self.succ[m][x][u].iter().all(|&y| target.contains(y)))
    }
}

impl Plant for FiniteSystem {
    type Set = FiniteSet;
    type State = usize;
    type Input = usize;

    fn num_modes(&self) -> usize {
        self.succ.len()
    }

    fn domain(&self) -> FiniteSet {
        (0..self.n_states()).collect()
    }

    fn empty_set(&self) -> FiniteSet {
        FiniteSet::empty()
    }

    fn pre_common(&self, modes: &[usize], target: &FiniteSet) -> Result<FiniteSet> {
        for &m in modes {
            self.check_mode(m)?;
        }
        Ok((0..self.n_states())
            .filter(|&x| (0..self.n_inputs()).any(|u| self.admissible(modes, x, u, target)))
            .collect())
    }

    fn intersect(&self, a: &FiniteSet, b: &FiniteSet) -> Result<FiniteSet> {
        Ok(a.intersect(b))
    }

    fn is_subset(&self, a: &FiniteSet, b: &FiniteSet) -> Result<bool> {
        Ok(a.is_subset(b))
    }

    fn is_empty(&self, a: &FiniteSet) -> Result<bool> {
        Ok(a.is_empty())
    }

    fn contains(&self, set: &FiniteSet, x: &usize) -> bool {
        set.contains(*x)
    }

    fn margin(&self, set: &FiniteSet, x: &usize) -> f64 {
        if set.contains(*x) {
            0.0
        } else {
            -1.0
        }
    }

    fn select_input(&self, mode: usize, x: &usize, target: &FiniteSet) -> Result<Option<usize>> {
        self.check_mode(mode)?;
        Ok((0..self.n_inputs()).find(|&u| self.admissible(&[mode], *x, u, target)))
    }

    fn fallback_input(&self) -> usize {
        0
    }

    fn successor<R: Rng + ?Sized>(&self, mode: usize, x: &usize, u: &usize, rng: &mut R) -> Result<usize> {
        self.check_mode(mode)?;
        Ok(*self.succ[mode][*x][*u].choose(rng).expect("nonempty successor list"))
    }

    fn sample<R: Rng + ?Sized>(&self, set: &FiniteSet, rng: &mut R) -> Result<Option<usize>> {
        let ids: Vec<usize> = set.iter().collect();
        Ok(ids.choose(rng).copied())
    }
}
