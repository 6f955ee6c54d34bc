//! Closed-loop runs: an environment issuing valid previews and resolving
//! the plant's nondeterminism, against the extracted controller.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::controller::{Controller, ControllerState, Target};
use crate::error::{Error, Result};
use crate::preview::{random_input_sequence, PreviewAutomaton, PreviewInput};
use crate::synthesis::Certificate;
use crate::systems::{FiniteSet, FiniteSystem, Plant};

/// Interval upper bounds of `None` are explored up to `lo + UNBOUNDED_SPAN`
/// by [`exhaustive_check`].
const UNBOUNDED_SPAN: usize = 3;

/// Plant, controller and per-node safe sets.
pub struct Harness<'a, P: Plant> {
    plant: &'a P,
    controller: Controller<'a, P>,
    safe: &'a [P::Set],
}

impl<'a, P: Plant> Harness<'a, P> {
    pub fn new(
        plant: &'a P,
        automaton: &'a PreviewAutomaton,
        cert: &'a Certificate<P::Set>,
        safe: &'a [P::Set],
    ) -> Result<Self> {
        if safe.len() != automaton.nodes() {
            return Err(Error::Precondition(format!(
                "{} safe sets for {} nodes",
                safe.len(),
                automaton.nodes()
            )));
        }
        Ok(Harness {
            plant,
            controller: Controller::new(plant, automaton, cert)?,
            safe,
        })
    }

    pub fn controller(&self) -> &Controller<'a, P> {
        &self.controller
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct TraceStep<S, I> {
    pub time: usize,
    pub mode: usize,
    pub state: S,
    pub input: Option<I>,
    /// Preview delivered at this time.
    pub preview: Option<PreviewInput>,
    /// `(destination, steps to switch)` of the announced switch.
    pub pending: Option<(usize, usize)>,
    pub target: Option<Target>,
    pub safe: bool,
    pub margin: f64,
    /// The controller found no admissible input and a fallback was applied.
    pub fallback: bool,
}

#[derive(Clone, Debug)]
pub struct RunTrace<S, I> {
    pub steps: Vec<TraceStep<S, I>>,
    pub inputs: Vec<PreviewInput>,
    /// Set when the run stopped early because the controller failed.
    pub failure: Option<String>,
}

impl<S, I> RunTrace<S, I> {
    pub fn unsafe_steps(&self) -> usize {
        self.steps.iter().filter(|s| !s.safe).count()
    }

    pub fn violated(&self) -> bool {
        self.failure.is_some() || self.unsafe_steps() > 0 || self.steps.iter().any(|s| s.fallback)
    }

    pub fn min_margin(&self) -> f64 {
        self.steps.iter().map(|s| s.margin).fold(f64::INFINITY, f64::min)
    }
}

#[derive(Clone, Copy, Debug)]
pub struct SimOptions {
    pub horizon: usize,
    pub seed: u64,
    /// Keep running with [`Plant::fallback_input`] when the controller has
    /// no admissible input, instead of stopping.
    pub fallback: bool,
}

/// Runs the closed loop for `opts.horizon` steps against the given preview
/// inputs. `seq` must be valid for the automaton from `q0`.
pub fn simulate<P: Plant>(
    h: &Harness<'_, P>,
    x0: P::State,
    q0: usize,
    seq: &[PreviewInput],
    opts: &SimOptions,
) -> Result<RunTrace<P::State, P::Input>> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let c = &h.controller;
    let mut cs = ControllerState::new(q0);
    let mut x = x0;
    let mut next_preview = 0;
    let mut steps = Vec::with_capacity(opts.horizon);
    let mut failure = None;
    for t in 0..opts.horizon {
        if let Some(p) = cs.pending.filter(|p| p.switch_time == t) {
            cs = c.on_switch(&cs, p.dest)?;
        }
        let mut preview = None;
        if let Some(&p) = seq.get(next_preview).filter(|p| p.t == t) {
            next_preview += 1;
            preview = Some(p);
            cs = c.receive_preview(&cs, p)?;
            if p.tau == 0 {
                cs = c.on_switch(&cs, p.dest)?;
            }
        }
        let safe_set = &h.safe[cs.mode];
        let mut record = TraceStep {
            time: t,
            mode: cs.mode,
            state: x.clone(),
            input: None,
            preview,
            pending: cs.countdown(),
            target: None,
            safe: h.plant.contains(safe_set, &x),
            margin: h.plant.margin(safe_set, &x),
            fallback: false,
        };
        let (u, next_cs) = match c.step(&cs, &x) {
            Ok(step) => {
                record.target = Some(step.target);
                (step.input, step.next)
            }
            Err(Error::InfeasibleState { target }) if opts.fallback => {
                record.fallback = true;
                let mut next = cs.clone();
                next.time += 1;
                next.steps_in_mode += 1;
                let _ = target;
                (h.plant.fallback_input(), next)
            }
            Err(e) => {
                failure = Some(e.to_string());
                steps.push(record);
                break;
            }
        };
        record.input = Some(u.clone());
        x = h.plant.successor(cs.mode, &x, &u, &mut rng)?;
        cs = next_cs;
        steps.push(record);
    }
    Ok(RunTrace {
        steps,
        inputs: seq.to_vec(),
        failure,
    })
}

/// [`simulate`] against a random preview sequence drawn from `opts.seed`.
pub fn simulate_random<P: Plant>(
    h: &Harness<'_, P>,
    x0: P::State,
    q0: usize,
    opts: &SimOptions,
) -> Result<RunTrace<P::State, P::Input>> {
    let seq = random_input_sequence(h.controller.automaton(), q0, opts.horizon, opts.seed);
    simulate(h, x0, q0, &seq, opts)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Summary {
    pub runs: usize,
    /// Runs that left the safe set or in which the controller had no input.
    pub violations: usize,
    /// Smallest safety margin over all visited states; `null` for no runs.
    pub min_margin: Option<f64>,
}

/// Where batch runs start.
#[derive(Clone, Debug)]
pub enum Start<S> {
    /// A random node with a nonempty winning set and a random state in it.
    Sampled,
    Fixed { node: usize, state: S },
}

/// `runs` seeded runs of `steps` steps; run `r` uses seed `seed + r`.
pub fn run_batch<P: Plant>(
    h: &Harness<'_, P>,
    runs: usize,
    steps: usize,
    seed: u64,
    start: &Start<P::State>,
    fallback: bool,
    mut on_trace: impl FnMut(usize, &RunTrace<P::State, P::Input>) -> Result<()>,
) -> Result<Summary> {
    let cert = h.controller.certificate();
    let candidates: Vec<usize> = (0..cert.nodes.len())
        .filter(|&q| h.plant.is_empty(cert.winning(q)).map(|e| !e).unwrap_or(false))
        .collect();
    let mut violations = 0;
    let mut min_margin: Option<f64> = None;
    for r in 0..runs {
        let run_seed = seed.wrapping_add(r as u64);
        let mut rng = ChaCha8Rng::seed_from_u64(run_seed ^ 0x5eed);
        let (q0, x0) = match start {
            Start::Fixed { node, state } => (*node, state.clone()),
            Start::Sampled => {
                let &q0 = candidates
                    .choose(&mut rng)
                    .ok_or_else(|| Error::Precondition("every winning set is empty".into()))?;
                let x0 = h
                    .plant
                    .sample(cert.winning(q0), &mut rng)?
                    .ok_or_else(|| Error::Precondition("could not sample a start state".into()))?;
                (q0, x0)
            }
        };
        let opts = SimOptions {
            horizon: steps,
            seed: rng.random(),
            fallback,
        };
        let seq = random_input_sequence(h.controller.automaton(), q0, steps, run_seed);
        let trace = simulate(h, x0, q0, &seq, &opts)?;
        if trace.violated() {
            violations += 1;
        }
        if !trace.steps.is_empty() {
            let m = trace.min_margin();
            min_margin = Some(min_margin.map_or(m, |v| v.min(m)));
        }
        on_trace(r, &trace)?;
    }
    Ok(Summary {
        runs,
        violations,
        min_margin,
    })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Verdict {
    pub safe: bool,
    /// Environment decision points visited.
    pub explored: usize,
    /// Events leading to the first violation found.
    pub counterexample: Option<Vec<String>>,
}

/// Explores every environment behaviour (preview times, destinations,
/// timing) and every successor choice for `depth` steps from every state of
/// every winning set. Fails with [`Error::BudgetExceeded`] after `budget`
/// decision points.
pub fn exhaustive_check(
    plant: &FiniteSystem,
    automaton: &PreviewAutomaton,
    cert: &Certificate<FiniteSet>,
    safe: &[FiniteSet],
    depth: usize,
    budget: usize,
) -> Result<Verdict> {
    let h = Harness::new(plant, automaton, cert, safe)?;
    let mut search = Search {
        h: &h,
        plant,
        budget,
        explored: 0,
        trail: Vec::new(),
        counterexample: None,
    };
    for q0 in 0..cert.nodes.len() {
        for x0 in cert.winning(q0).iter() {
            search.trail.push(format!("start mode {} at {}", q0 + 1, plant.state_names()[x0]));
            let ok = search.env(ControllerState::new(q0), x0, depth)?;
            search.trail.pop();
            if !ok {
                return Ok(Verdict {
                    safe: false,
                    explored: search.explored,
                    counterexample: search.counterexample,
                });
            }
        }
    }
    Ok(Verdict {
        safe: true,
        explored: search.explored,
        counterexample: None,
    })
}

struct Search<'h, 'a> {
    h: &'h Harness<'a, FiniteSystem>,
    plant: &'a FiniteSystem,
    budget: usize,
    explored: usize,
    trail: Vec<String>,
    counterexample: Option<Vec<String>>,
}

impl Search<'_, '_> {
    fn fail(&mut self, why: String) -> bool {
        self.trail.push(why);
        self.counterexample = Some(self.trail.clone());
        self.trail.pop();
        false
    }

    /// Environment's choice at the current time: no preview, or any
    /// admissible preview.
    fn env(&mut self, cs: ControllerState, x: usize, depth: usize) -> Result<bool> {
        self.explored += 1;
        if self.explored > self.budget {
            return Err(Error::BudgetExceeded(self.budget));
        }
        if !self.act(&cs, x, depth)? {
            return Ok(false);
        }
        if cs.pending.is_some() {
            return Ok(true);
        }
        let g = self.h.controller.automaton();
        let options: Vec<(usize, usize)> = g
            .successors(cs.mode)
            .flat_map(|(dest, t)| {
                let top = t.hi.unwrap_or(t.lo + UNBOUNDED_SPAN);
                (t.lo..=top).map(move |tau| (dest, tau))
            })
            .collect();
        for (dest, tau) in options {
            let p = PreviewInput::new(cs.time, tau, dest);
            let with_preview = match self.h.controller.receive_preview(&cs, p) {
                Ok(next) => next,
                Err(Error::PreviewRejected(_)) => continue,
                Err(e) => return Err(e),
            };
            self.trail.push(format!("t={} preview ({}, {}, {})", p.t, p.t, p.tau, p.dest + 1));
            let ok = if tau == 0 {
                let switched = self.h.controller.on_switch(&with_preview, dest)?;
                self.env(switched, x, depth)?
            } else {
                self.act(&with_preview, x, depth)?
            };
            self.trail.pop();
            if !ok {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Safety check, controller step and every successor.
    fn act(&mut self, cs: &ControllerState, x: usize, depth: usize) -> Result<bool> {
        let name = &self.plant.state_names()[x];
        if !self.h.safe[cs.mode].contains(x) {
            return Ok(self.fail(format!("t={} mode {} state {name} is unsafe", cs.time, cs.mode + 1)));
        }
        if depth == 0 {
            return Ok(true);
        }
        let step = match self.h.controller.step(cs, &x) {
            Ok(step) => step,
            Err(Error::InfeasibleState { target }) => {
                return Ok(self.fail(format!(
                    "t={} mode {} state {name}: no input reaches {target}",
                    cs.time,
                    cs.mode + 1
                )))
            }
            Err(e) => return Err(e),
        };
        let u = step.input;
        for &y in self.plant.successors(cs.mode, x, u) {
            let mut next = step.next.clone();
            if let Some(p) = next.pending.filter(|p| p.switch_time == next.time) {
                next = self.h.controller.on_switch(&next, p.dest)?;
            }
            self.trail.push(format!(
                "t={} {name} --{}--> {}",
                cs.time,
                self.plant.input_names()[u],
                self.plant.state_names()[y]
            ));
            let ok = self.env(next, y, depth - 1)?;
            self.trail.pop();
            if !ok {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

/// Uniform random start in a nonempty winning set, for callers that drive
/// [`simulate`] themselves.
pub fn sample_start<P: Plant, R: Rng + ?Sized>(
    plant: &P,
    cert: &Certificate<P::Set>,
    rng: &mut R,
) -> Result<Option<(usize, P::State)>> {
    let mut nodes: Vec<usize> = (0..cert.nodes.len()).collect();
    while !nodes.is_empty() {
        let k = rng.random_range(0..nodes.len());
        let q = nodes.swap_remove(k);
        if let Some(x) = plant.sample(cert.winning(q), rng)? {
            return Ok(Some((q, x)));
        }
    }
    Ok(None)
}
