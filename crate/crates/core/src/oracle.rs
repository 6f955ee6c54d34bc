//! Brute-force winning sets for finite plants, used as ground truth.
//!
//! The preview automaton is unrolled into a finite graph of *phases*. A
//! phase records what the controller knows at the current step, after the
//! environment has announced (or not) a switch at this step:
//!
//! - `Hold { node, clock }`: `clock` steps since `node` was entered and no
//!   switch announced. Clocks past the point where every announcement is
//!   allowed are merged into the last one.
//! - `Pending { node, dest, remaining }`: a switch to `dest` was announced
//!   and happens `remaining` steps from now.
//! - `Sink { node }`: nothing can happen any more.
//!
//! A round of the game at position `(x, phase)` is: `x` must lie in the safe
//! set of the phase's node, the controller picks `u`, then the environment
//! picks a successor of `x` under the node's mode and the next phase. The
//! environment's two choices are independent, so a position is winning iff
//! some `u` makes every (successor, next phase) pair winning. The winning
//! set of a node is the set of states winning in every phase the node can
//! be entered in.
//!
//! Nothing here is shared with [`crate::synthesis`]; the two are meant to be
//! compared against each other.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::preview::PreviewAutomaton;
use crate::systems::{FiniteSet, FiniteSystem};

/// Extra steps allowed above the lower bound of an unbounded preview
/// interval by [`winning_sets`].
pub const UNBOUNDED_EXTRA: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Phase {
    Hold { node: usize, clock: usize },
    Pending { node: usize, dest: usize, remaining: usize },
    Sink { node: usize },
}

impl Phase {
    /// The node whose mode is active in this phase.
    pub fn node(&self) -> usize {
        match *self {
            Phase::Hold { node, .. } | Phase::Pending { node, .. } | Phase::Sink { node } => node,
        }
    }
}

/// Phases, the environment's moves between them, and the entry phases of
/// each node.
#[derive(Clone, Debug)]
pub struct PhaseGraph {
    phases: Vec<Phase>,
    next: Vec<Vec<usize>>,
    entry: Vec<Vec<usize>>,
}

impl PhaseGraph {
    pub fn phases(&self) -> &[Phase] {
        &self.phases
    }

    pub fn len(&self) -> usize {
        self.phases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phases.is_empty()
    }

    pub fn successors(&self, phase: usize) -> &[usize] {
        &self.next[phase]
    }

    pub fn entry(&self, node: usize) -> &[usize] {
        &self.entry[node]
    }

    pub fn phases_of(&self, node: usize) -> usize {
        self.phases.iter().filter(|p| p.node() == node).count()
    }
}

/// Phase count of a non-sink node with holding time `H`, smallest preview
/// time `T_min` and preview times `τ_j`: `H − T_min + Σ_j τ_j`. A sink has
/// one phase.
///
/// When `H = T_min` the graph built here has one more phase than this, the
/// hold phase with no announcement yet.
pub fn phase_bound(g: &PreviewAutomaton, node: usize) -> usize {
    match (g.holding(node), g.t_min(node)) {
        (Some(h), Some(t_min)) => h - t_min + g.successors(node).map(|(_, t)| t.lo).sum::<usize>(),
        _ => 1,
    }
}

/// Phase graph of an automaton whose preview intervals are singletons.
pub fn expand_automaton(g_hat: &PreviewAutomaton) -> Result<PhaseGraph> {
    if !g_hat.is_reduced() {
        return Err(Error::Precondition(
            "phase expansion needs singleton preview intervals".into(),
        ));
    }
    expand_general(g_hat, 0)
}

/// Phase graph of any valid automaton. Every preview time inside an
/// interval is a separate environment choice; an unbounded interval
/// `[lo, ∞)` is cut at `lo + unbounded_extra`.
pub fn expand_general(g: &PreviewAutomaton, unbounded_extra: usize) -> Result<PhaseGraph> {
    g.ensure_valid()?;
    let n = g.nodes();
    let taus = |i: usize| -> Vec<(usize, Vec<usize>)> {
        g.successors(i)
            .map(|(j, t)| (j, (t.lo..=t.hi.unwrap_or(t.lo + unbounded_extra)).collect()))
            .collect()
    };

    let mut phases = Vec::new();
    for i in 0..n {
        match (g.holding(i), g.t_min(i)) {
            (Some(h), Some(t_min)) => {
                let c = h.saturating_sub(t_min).max(1);
                phases.extend((0..c).map(|clock| Phase::Hold { node: i, clock }));
                for (j, ts) in taus(i) {
                    let top = ts.iter().copied().max().unwrap_or(0);
                    phases.extend((1..=top).map(|remaining| Phase::Pending {
                        node: i,
                        dest: j,
                        remaining,
                    }));
                }
            }
            _ => phases.push(Phase::Sink { node: i }),
        }
    }
    let index: BTreeMap<Phase, usize> = phases.iter().enumerate().map(|(k, p)| (*p, k)).collect();

    let entry: Vec<Vec<usize>> = (0..n)
        .map(|i| {
            let Some(h) = g.holding(i) else {
                return vec![index[&Phase::Sink { node: i }]];
            };
            let mut out = vec![index[&Phase::Hold { node: i, clock: 0 }]];
            for (j, ts) in taus(i) {
                for tau in ts.into_iter().filter(|&tau| tau >= h.max(1)) {
                    out.push(index[&Phase::Pending {
                        node: i,
                        dest: j,
                        remaining: tau,
                    }]);
                }
            }
            out
        })
        .collect();

    let next = phases
        .iter()
        .map(|&p| {
            let mut out = match p {
                Phase::Sink { .. } => vec![index[&p]],
                Phase::Pending { dest, remaining: 1, .. } => entry[dest].clone(),
                Phase::Pending { node, dest, remaining } => vec![index[&Phase::Pending {
                    node,
                    dest,
                    remaining: remaining - 1,
                }]],
                Phase::Hold { node, clock } => {
                    let h = g.holding(node).expect("hold phases belong to non-sinks");
                    let last = h.saturating_sub(g.t_min(node).expect("non-sink")).max(1) - 1;
                    let elapsed = clock + 1;
                    let mut out = vec![index[&Phase::Hold {
                        node,
                        clock: elapsed.min(last),
                    }]];
                    for (j, ts) in taus(node) {
                        for tau in ts {
                            if tau == 0 && elapsed >= h {
                                out.extend_from_slice(&entry[j]);
                            } else if tau > 0 && elapsed + tau >= h {
                                out.push(index[&Phase::Pending {
                                    node,
                                    dest: j,
                                    remaining: tau,
                                }]);
                            }
                        }
                    }
                    out
                }
            };
            out.sort_unstable();
            out.dedup();
            out
        })
        .collect();

    Ok(PhaseGraph { phases, next, entry })
}

/// Solves the safety game on the product of `plant` and `graph` and
/// returns, per node, the states winning in all of its entry phases.
pub fn solve_product_game(plant: &FiniteSystem, graph: &PhaseGraph, safe: &[FiniteSet]) -> Result<Vec<FiniteSet>> {
    let nodes = graph.entry.len();
    if safe.len() != nodes || plant.mode_names().len() != nodes {
        return Err(Error::Precondition(format!(
            "{nodes} nodes, {} safe sets, {} modes",
            safe.len(),
            plant.mode_names().len()
        )));
    }
    let states = plant.n_states();
    let mut win: Vec<Vec<bool>> = graph
        .phases
        .iter()
        .map(|p| (0..states).map(|x| safe[p.node()].contains(x)).collect())
        .collect();

    loop {
        let mut changed = false;
        for (p, phase) in graph.phases.iter().enumerate() {
            for x in 0..states {
                if !win[p][x] {
                    continue;
                }
                let keeps = (0..plant.n_inputs()).any(|u| {
                    plant
                        .successors(phase.node(), x, u)
                        .iter()
                        .all(|&y| graph.next[p].iter().all(|&q| win[q][y]))
                });
                if !keeps {
                    win[p][x] = false;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }

    Ok((0..nodes)
        .map(|i| (0..states).filter(|&x| graph.entry[i].iter().all(|&e| win[e][x])).collect())
        .collect())
}

/// Winning sets of `(plant, g)`, unbounded intervals cut as in
/// [`expand_general`] with [`UNBOUNDED_EXTRA`].
pub fn winning_sets(plant: &FiniteSystem, g: &PreviewAutomaton, safe: &[FiniteSet]) -> Result<Vec<FiniteSet>> {
    solve_product_game(plant, &expand_general(g, UNBOUNDED_EXTRA)?, safe)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::preview::Interval;

    fn toy() -> FiniteSystem {
        FiniteSystem::from_fn(3, 2, 2, |m, x, u| {
            let (keep, other) = if m == 0 { (0, 1) } else { (1, 0) };
            match (x, u) {
                (x, 0) if x == keep => vec![keep],
                (x, _) if x == keep => vec![other],
                _ => vec![2],
            }
        })
        .unwrap()
    }

    fn two_node(tau: usize) -> PreviewAutomaton {
        PreviewAutomaton::uniform(2, &[(0, 1), (1, 0)], Interval::singleton(tau), 3).unwrap()
    }

    #[test]
    fn phase_counts() {
        let g = two_node(1);
        let graph = expand_automaton(&g).unwrap();
        assert_eq!(graph.len(), 6);
        assert_eq!((phase_bound(&g, 0), graph.phases_of(0)), (3, 3));

        let line = PreviewAutomaton::uniform(3, &[(0, 1), (1, 0), (1, 2), (2, 1)], Interval::singleton(1), 2).unwrap();
        let graph = expand_automaton(&line).unwrap();
        assert_eq!((phase_bound(&line, 1), graph.phases_of(1)), (3, 3));

        let sink = PreviewAutomaton::checked(1, vec![], vec![None]).unwrap();
        let graph = expand_automaton(&sink).unwrap();
        assert_eq!(graph.phases(), &[Phase::Sink { node: 0 }]);
        assert_eq!(graph.successors(0), &[0]);
    }

    #[test]
    fn holding_equal_to_preview_gets_one_extra_phase() {
        let g = PreviewAutomaton::uniform(2, &[(0, 1), (1, 0)], Interval::singleton(2), 2).unwrap();
        let graph = expand_automaton(&g).unwrap();
        assert_eq!(phase_bound(&g, 0), 2);
        assert_eq!(graph.phases_of(0), 3);
    }

    #[test]
    fn intervals_need_general_expansion() {
        let g = two_node(1).with_timing(Interval::new(1, Some(3)), 3).unwrap();
        assert!(matches!(expand_automaton(&g), Err(Error::Precondition(_))));
        let graph = expand_general(&g, 0).unwrap();
        assert_eq!(graph.phases_of(0), 2 + 3);
    }

    #[test]
    fn toy_game() {
        let safe = vec![FiniteSet::new([0, 1]); 2];
        let w = winning_sets(&toy(), &two_node(1), &safe).unwrap();
        assert_eq!(w, vec![FiniteSet::new([0]), FiniteSet::new([1])]);
        let w = winning_sets(&toy(), &two_node(0), &safe).unwrap();
        assert!(w.iter().all(FiniteSet::is_empty));
    }

    #[test]
    fn interval_preview_matches_lower_bound() {
        let safe = vec![FiniteSet::new([0, 1]); 2];
        let g = two_node(1).with_timing(Interval::unbounded(1), 3).unwrap();
        assert_eq!(
            winning_sets(&toy(), &g, &safe).unwrap(),
            winning_sets(&toy(), &g.reduce_to_lower_bounds(), &safe).unwrap()
        );
    }
}
