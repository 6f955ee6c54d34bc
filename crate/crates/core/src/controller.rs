//! Safety controller read off a [`Certificate`].
//!
//! Between switches the controller steers into the holding sets `C_k`, so
//! that whenever a preview can arrive the state already lies in the matching
//! reachability set. Once a preview is active it walks down the chain
//! `C_reach[d][l]` one index per step and lands in `W_d` at the switch.
//!
//! Previews longer than the shortest admissible one are acted on late: the
//! controller waits until the switch is exactly `min T(mode, d)` steps away.
//!
//! Worked holding trace for `H = 3`, `T_min = 1`, no preview:
//!
//! | steps in mode `n` | state lies in | target |
//! |---|---|---|
//! | 0 | `C_3 = W` | `C_2` |
//! | 1 | `C_2` | `C_1` |
//! | 2 | `C_1` | `C_1` |
//! | 3, 4, ... | `C_1` | `C_1` |

use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::preview::{infer_reduced_input, PreviewAutomaton, PreviewInput};
use crate::synthesis::{Certificate, NodeCertificate};
use crate::systems::Plant;

/// An announced switch as seen by the controller.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Pending {
    pub dest: usize,
    pub switch_time: usize,
    /// Time from which the reachability chain is followed.
    pub activation: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ControllerState {
    pub mode: usize,
    pub steps_in_mode: usize,
    pub time: usize,
    pub pending: Option<Pending>,
    pub raw_pending: Option<PreviewInput>,
}

impl ControllerState {
    pub fn new(mode: usize) -> Self {
        ControllerState {
            mode,
            steps_in_mode: 0,
            time: 0,
            pending: None,
            raw_pending: None,
        }
    }

    /// `(destination, steps until the switch)` of the announced switch.
    pub fn countdown(&self) -> Option<(usize, usize)> {
        self.pending
            .map(|p| (p.dest, p.switch_time.saturating_sub(self.time)))
    }

    fn entry_time(&self) -> usize {
        self.time - self.steps_in_mode
    }
}

/// Which certificate set an input was chosen for.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Target {
    Invariant { node: usize },
    Hold { node: usize, k: usize },
    Reach { node: usize, dest: usize, steps: usize },
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Target::Invariant { node } => write!(f, "inv[{}]", node + 1),
            Target::Hold { node, k } => write!(f, "hold[{}][{k}]", node + 1),
            Target::Reach { node, dest, steps } => write!(f, "reach[{}][{}][{steps}]", node + 1, dest + 1),
        }
    }
}

impl Serialize for Target {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

#[derive(Clone, Debug)]
pub struct Step<I> {
    pub input: I,
    pub next: ControllerState,
    pub target: Target,
}

pub struct Controller<'a, P: Plant> {
    plant: &'a P,
    automaton: &'a PreviewAutomaton,
    cert: &'a Certificate<P::Set>,
}

impl<'a, P: Plant> Controller<'a, P> {
    /// `automaton` is the original one, possibly with preview intervals; the
    /// certificate must come from its reduction.
    pub fn new(plant: &'a P, automaton: &'a PreviewAutomaton, cert: &'a Certificate<P::Set>) -> Result<Self> {
        if cert.automaton != automaton.reduce_to_lower_bounds() {
            return Err(Error::Precondition(
                "certificate was computed for a different automaton".into(),
            ));
        }
        Ok(Controller {
            plant,
            automaton,
            cert,
        })
    }

    pub fn certificate(&self) -> &Certificate<P::Set> {
        self.cert
    }

    pub fn automaton(&self) -> &PreviewAutomaton {
        self.automaton
    }

    /// Registers a preview issued at the current time.
    pub fn receive_preview(&self, cs: &ControllerState, p: PreviewInput) -> Result<ControllerState> {
        if p.t != cs.time {
            return Err(Error::PreviewRejected(format!(
                "preview stamped {} delivered at time {}",
                p.t, cs.time
            )));
        }
        if cs.pending.is_some() {
            return Err(Error::PreviewRejected("a previewed switch is still pending".into()));
        }
        let reduced = infer_reduced_input(self.automaton, p, cs.mode)?;
        let held = p.switch_time() - cs.entry_time();
        match self.automaton.holding(cs.mode) {
            Some(h) if held >= h => {}
            h => {
                return Err(Error::PreviewRejected(format!(
                    "switch after {held} steps in mode {} breaks holding time {}",
                    cs.mode + 1,
                    h.map_or("inf".into(), |h| h.to_string())
                )))
            }
        }
        let mut next = cs.clone();
        next.pending = Some(Pending {
            dest: p.dest,
            switch_time: p.switch_time(),
            activation: reduced.t,
        });
        next.raw_pending = Some(p);
        Ok(next)
    }

    /// The environment switched to `new_mode` at the current time.
    pub fn on_switch(&self, cs: &ControllerState, new_mode: usize) -> Result<ControllerState> {
        match cs.pending {
            Some(p) if p.dest == new_mode && p.switch_time == cs.time => Ok(ControllerState {
                mode: new_mode,
                steps_in_mode: 0,
                time: cs.time,
                pending: None,
                raw_pending: None,
            }),
            Some(p) => Err(Error::UnannouncedSwitch {
                to: new_mode,
                detail: format!(
                    "announced switch is to mode {} at time {}, now is {}",
                    p.dest + 1,
                    p.switch_time,
                    cs.time
                ),
            }),
            None => Err(Error::UnannouncedSwitch {
                to: new_mode,
                detail: "no preview was received".into(),
            }),
        }
    }

    /// The set the next state has to land in.
    pub fn target(&self, cs: &ControllerState) -> Result<(Target, &'a P::Set)> {
        let node = self.cert.nodes.get(cs.mode).ok_or(Error::UnknownMode(cs.mode))?;
        match node {
            NodeCertificate::Sink { invariant } => Ok((Target::Invariant { node: cs.mode }, invariant)),
            NodeCertificate::NonSink { t_min, holding, .. } => {
                if let Some(p) = cs.pending {
                    let countdown = p.switch_time.saturating_sub(cs.time);
                    if countdown == 0 {
                        return Err(Error::Precondition(format!(
                            "switch to mode {} is due before the next input",
                            p.dest + 1
                        )));
                    }
                    if cs.time >= p.activation {
                        let steps = countdown - 1;
                        let set = node.reach_set(p.dest, steps).ok_or_else(|| {
                            Error::Precondition(format!("no reachability set for mode {}", p.dest + 1))
                        })?;
                        return Ok((
                            Target::Reach {
                                node: cs.mode,
                                dest: p.dest,
                                steps,
                            },
                            set,
                        ));
                    }
                }
                let k = holding.saturating_sub(cs.steps_in_mode + 1).max(*t_min);
                Ok((Target::Hold { node: cs.mode, k }, node.hold_set(k)))
            }
        }
    }

    pub fn step(&self, cs: &ControllerState, x: &P::State) -> Result<Step<P::Input>> {
        let (target, set) = self.target(cs)?;
        let input = self
            .plant
            .select_input(cs.mode, x, set)?
            .ok_or_else(|| Error::InfeasibleState {
                target: target.to_string(),
            })?;
        let mut next = cs.clone();
        next.time += 1;
        next.steps_in_mode += 1;
        Ok(Step { input, next, target })
    }
}
