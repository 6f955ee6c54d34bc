//! Random instances and brute-force helpers shared by the integration tests.
#![allow(dead_code)]

pub mod poly;

use preview_synth::preview::{Edge, Interval, PreviewAutomaton};
use preview_synth::systems::{FiniteSet, FiniteSystem};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct FiniteInstance {
    pub plant: FiniteSystem,
    pub automaton: PreviewAutomaton,
    pub safe: Vec<FiniteSet>,
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn subset<R: Rng>(rng: &mut R, n: usize, min: usize, max: usize) -> Vec<usize> {
    let k = rng.random_range(min..=max.min(n));
    let mut v = sample(rng, n, k).into_vec();
    v.sort_unstable();
    v
}

/// Random plant with up to `max_states` states, `max_modes` modes and
/// `max_inputs` inputs, each transition having one or two successors.
pub fn random_plant<R: Rng>(rng: &mut R, max_states: usize, max_modes: usize, max_inputs: usize) -> FiniteSystem {
    let n = rng.random_range(2..=max_states);
    let k = rng.random_range(1..=max_inputs);
    let m = rng.random_range(1..=max_modes);
    let tables: Vec<Vec<Vec<Vec<usize>>>> = (0..m)
        .map(|_| {
            (0..n)
                .map(|_| (0..k).map(|_| subset(rng, n, 1, 2)).collect())
                .collect()
        })
        .collect();
    FiniteSystem::from_fn(n, k, m, |mode, x, u| tables[mode][x][u].clone()).unwrap()
}

/// Random valid automaton on `nodes` nodes. Preview intervals start at most
/// at `max_tau`; with `widths` set they get a width up to three and the
/// first non-sink edge becomes unbounded.
pub fn random_automaton<R: Rng>(rng: &mut R, nodes: usize, max_tau: usize, max_holding: usize, widths: bool) -> PreviewAutomaton {
    let mut edges = Vec::new();
    for from in 0..nodes {
        for to in (0..nodes).filter(|&to| to != from) {
            if rng.random_bool(0.6) {
                let lo = rng.random_range(0..=max_tau);
                let hi = if widths { Some(lo + rng.random_range(0..=3)) } else { Some(lo) };
                edges.push(Edge {
                    from,
                    to,
                    preview: Interval::new(lo, hi),
                });
            }
        }
    }
    if widths {
        if let Some(e) = edges.first_mut() {
            e.preview.hi = None;
        }
    }
    let holding = (0..nodes)
        .map(|q| {
            let t_min = edges.iter().filter(|e| e.from == q).map(|e| e.preview.lo).min()?;
            Some(rng.random_range(t_min.max(1)..=max_holding.max(t_min.max(1))))
        })
        .collect();
    PreviewAutomaton::checked(nodes, edges, holding).unwrap()
}

/// Instance within the bounds of the oracle comparison: at most 8 states,
/// 3 modes, 2 inputs, holding time 4 and preview time 3.
pub fn random_instance(seed: u64, widths: bool) -> FiniteInstance {
    let mut rng = rng(seed);
    let plant = random_plant(&mut rng, 8, 3, 2);
    let nodes = plant.mode_names().len();
    let automaton = random_automaton(&mut rng, nodes, 3, 4, widths);
    let n = plant.n_states();
    let safe = (0..nodes)
        .map(|_| subset(&mut rng, n, n / 2, n).into_iter().collect())
        .collect();
    FiniteInstance { plant, automaton, safe }
}

/// The three-state, two-mode example system with two inputs.
pub fn toy() -> FiniteSystem {
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
