//! Maximal winning sets for switched systems with preview.
//!
//! [`con_inv`] first replaces every preview interval by its lower bound,
//! which leaves the winning sets unchanged, and then sweeps the non-sink
//! nodes in ascending order with [`inv_pre`] until no set changes. The sets
//! computed in the last sweep are kept as a [`Certificate`] from which the
//! controller is read off.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::preview::PreviewAutomaton;
use crate::systems::{inv, inv_modes, pre_int, FixpointOptions, InvOutcome, Plant, Status};

/// Sets retained for one node.
#[derive(Clone, Debug, PartialEq)]
pub enum NodeCertificate<S> {
    Sink {
        invariant: S,
    },
    NonSink {
        t_min: usize,
        holding: usize,
        /// `reach[j][l]`: states from which `W_j` can be reached in exactly
        /// `l` steps while staying safe; `reach[j][0] = W_j`.
        reach: BTreeMap<usize, Vec<S>>,
        /// `hold[k - t_min]` for `k = t_min..=holding`; the last one is `W_i`.
        hold: Vec<S>,
    },
}

impl<S> NodeCertificate<S> {
    pub fn winning(&self) -> &S {
        match self {
            NodeCertificate::Sink { invariant } => invariant,
            NodeCertificate::NonSink { hold, .. } => hold.last().expect("hold chain is never empty"),
        }
    }

    /// `C_k`, with `k` clamped into `t_min..=holding`.
    pub fn hold_set(&self, k: usize) -> &S {
        match self {
            NodeCertificate::Sink { invariant } => invariant,
            NodeCertificate::NonSink {
                t_min, holding, hold, ..
            } => &hold[k.clamp(*t_min, *holding) - t_min],
        }
    }

    pub fn reach_set(&self, dest: usize, steps: usize) -> Option<&S> {
        match self {
            NodeCertificate::Sink { .. } => None,
            NodeCertificate::NonSink { reach, .. } => reach.get(&dest).and_then(|c| c.get(steps)),
        }
    }

    pub fn map<T>(self, f: &mut impl FnMut(S) -> Result<T>) -> Result<NodeCertificate<T>> {
        Ok(match self {
            NodeCertificate::Sink { invariant } => NodeCertificate::Sink { invariant: f(invariant)? },
            NodeCertificate::NonSink {
                t_min,
                holding,
                reach,
                hold,
            } => NodeCertificate::NonSink {
                t_min,
                holding,
                reach: reach
                    .into_iter()
                    .map(|(j, chain)| Ok((j, chain.into_iter().map(&mut *f).collect::<Result<Vec<_>>>()?)))
                    .collect::<Result<_>>()?,
                hold: hold.into_iter().map(&mut *f).collect::<Result<_>>()?,
            },
        })
    }
}

/// Everything the controller needs: the reduced automaton and, per node,
/// the sets of the final sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct Certificate<S> {
    pub automaton: PreviewAutomaton,
    pub nodes: Vec<NodeCertificate<S>>,
}

impl<S> Certificate<S> {
    pub fn winning(&self, node: usize) -> &S {
        self.nodes[node].winning()
    }

    pub fn map<T>(self, mut f: impl FnMut(S) -> Result<T>) -> Result<Certificate<T>> {
        Ok(Certificate {
            automaton: self.automaton,
            nodes: self
                .nodes
                .into_iter()
                .map(|n| n.map(&mut f))
                .collect::<Result<_>>()?,
        })
    }
}

#[derive(Clone, Debug)]
pub struct WinningSet<S> {
    pub sets: Vec<S>,
    pub status: Status,
    /// Number of sweeps over the non-sink nodes.
    pub iterations: usize,
    /// Nodes whose set shrank in each sweep.
    pub changed: Vec<Vec<usize>>,
}

#[derive(Clone, Debug)]
pub struct Synthesis<S> {
    pub winning: WinningSet<S>,
    pub certificate: Certificate<S>,
}

impl<S> Synthesis<S> {
    pub fn is_certified(&self) -> bool {
        self.winning.status == Status::Converged
    }
}

fn check_inputs<P: Plant>(plant: &P, g: &PreviewAutomaton, safe: &[P::Set]) -> Result<()> {
    g.ensure_valid()?;
    if g.nodes() != plant.num_modes() {
        return Err(Error::Precondition(format!(
            "automaton has {} nodes but the system has {} modes",
            g.nodes(),
            plant.num_modes()
        )));
    }
    if safe.len() != g.nodes() {
        return Err(Error::Precondition(format!(
            "{} safe sets for {} nodes",
            safe.len(),
            g.nodes()
        )));
    }
    Ok(())
}

/// Update of the winning set of non-sink node `i` given the current sets
/// `w` of all nodes. `g_hat` must have singleton preview intervals.
pub fn inv_pre<P: Plant>(
    plant: &P,
    g_hat: &PreviewAutomaton,
    i: usize,
    w: &[P::Set],
    safe: &[P::Set],
    opts: &FixpointOptions,
) -> Result<(NodeCertificate<P::Set>, Status)> {
    if !g_hat.is_reduced() {
        return Err(Error::Precondition("preview intervals must be singletons".into()));
    }
    let (Some(holding), Some(t_min)) = (g_hat.holding(i), g_hat.t_min(i)) else {
        return Err(Error::Precondition(format!("node {} is a sink", i + 1)));
    };
    let s_i = &safe[i];
    let succ: Vec<(usize, usize)> = g_hat.successors(i).map(|(j, t)| (j, t.lo)).collect();

    let mut reach = BTreeMap::new();
    for &(j, tau) in &succ {
        let mut chain = Vec::with_capacity(tau + 1);
        chain.push(w[j].clone());
        for l in 1..=tau {
            chain.push(pre_int(plant, i, &chain[l - 1], s_i)?);
        }
        reach.insert(j, chain);
    }
    let end_of = |j: usize, tau: usize| &reach[&j][tau];

    // The switch may not happen, so the core also has to stay inside S_i.
    let mut core = s_i.clone();
    for &(j, tau) in &succ {
        core = plant.intersect(&core, end_of(j, tau))?;
    }
    let InvOutcome { set, status, .. } = inv(plant, i, &core, opts)?;

    let mut hold = Vec::with_capacity(holding - t_min + 1);
    hold.push(set);
    for k in t_min + 1..=holding {
        let mut next = pre_int(plant, i, hold.last().expect("nonempty"), s_i)?;
        for &(j, tau) in succ.iter().filter(|&&(_, tau)| tau >= k) {
            next = plant.intersect(&next, end_of(j, tau))?;
        }
        hold.push(next);
    }
    let cert = NodeCertificate::NonSink {
        t_min,
        holding,
        reach,
        hold,
    };
    if !plant.is_subset(cert.winning(), s_i)? {
        return Err(Error::InvariantViolated(format!(
            "update of node {} left its safe set",
            i + 1
        )));
    }
    Ok((cert, status))
}

/// Maximal winning sets of `(plant, g)` for the per-node safe sets `safe`.
///
/// `opts.max_iters` bounds both the inner invariance iterations and the
/// number of sweeps. Any cap hit marks the result as not converged.
pub fn con_inv<P: Plant>(
    plant: &P,
    g: &PreviewAutomaton,
    safe: &[P::Set],
    opts: &FixpointOptions,
) -> Result<Synthesis<P::Set>> {
    check_inputs(plant, g, safe)?;
    let g_hat = g.reduce_to_lower_bounds();
    let n = g_hat.nodes();
    let mut w: Vec<P::Set> = safe.to_vec();
    let mut certs: Vec<Option<NodeCertificate<P::Set>>> = vec![None; n];
    let mut status = Status::Converged;

    for q in (0..n).filter(|&q| g_hat.is_sink(q)) {
        let out = inv(plant, q, &safe[q], opts)?;
        status = status.and(out.status);
        w[q] = out.set.clone();
        certs[q] = Some(NodeCertificate::Sink { invariant: out.set });
    }

    let mut changed_log = Vec::new();
    loop {
        if changed_log.len() >= opts.max_iters {
            status = Status::IterationCapped;
            break;
        }
        let mut changed = Vec::new();
        for i in (0..n).filter(|&q| !g_hat.is_sink(q)) {
            let (cert, st) = inv_pre(plant, &g_hat, i, &w, safe, opts)?;
            status = status.and(st);
            let updated = cert.winning();
            if !plant.is_subset(updated, &w[i])? {
                return Err(Error::InvariantViolated(format!(
                    "winning set of node {} grew during sweep {}",
                    i + 1,
                    changed_log.len() + 1
                )));
            }
            if !plant.is_subset(&w[i], updated)? {
                changed.push(i);
            }
            w[i] = updated.clone();
            certs[i] = Some(cert);
        }
        let done = changed.is_empty();
        changed_log.push(changed);
        if done {
            break;
        }
    }

    let nodes = match certs.into_iter().collect::<Option<Vec<_>>>() {
        Some(nodes) => nodes,
        // Only reachable with a zero sweep budget: no non-sink was visited.
        None => (0..n)
            .map(|q| NodeCertificate::Sink {
                invariant: w[q].clone(),
            })
            .collect(),
    };
    Ok(Synthesis {
        winning: WinningSet {
            sets: w,
            status,
            iterations: changed_log.len(),
            changed: changed_log,
        },
        certificate: Certificate {
            automaton: g_hat,
            nodes,
        },
    })
}

/// Largest set that can be kept inside `safe` without knowing which mode is
/// active: the baseline that ignores preview information.
pub fn max_controlled_invariant<P: Plant>(
    plant: &P,
    safe: &P::Set,
    opts: &FixpointOptions,
) -> Result<InvOutcome<P::Set>> {
    let modes: Vec<usize> = (0..plant.num_modes()).collect();
    inv_modes(plant, &modes, safe, opts)
}

/// Rechecks that `w` satisfies the fixed-point equations: each sink holds
/// its maximal invariant set and each non-sink is reproduced by
/// [`inv_pre`].
pub fn verify_fixed_point<P: Plant>(
    plant: &P,
    g: &PreviewAutomaton,
    safe: &[P::Set],
    w: &[P::Set],
    opts: &FixpointOptions,
) -> Result<bool> {
    check_inputs(plant, g, safe)?;
    let g_hat = g.reduce_to_lower_bounds();
    for q in 0..g_hat.nodes() {
        let expected = if g_hat.is_sink(q) {
            inv(plant, q, &safe[q], opts)?.set
        } else {
            inv_pre(plant, &g_hat, q, w, safe, opts)?.0.winning().clone()
        };
        if !plant.set_eq(&expected, &w[q])? {
            return Ok(false);
        }
    }
    Ok(true)
}
