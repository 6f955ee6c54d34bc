mod common;

use common::random_instance;
use preview_synth::oracle::{expand_automaton, expand_general, phase_bound, solve_product_game, winning_sets};
use preview_synth::synthesis::con_inv;
use preview_synth::systems::FixpointOptions;

#[test]
fn oracle_agrees_with_synthesis() {
    for seed in 0..300 {
        let inst = random_instance(seed, false);
        let fast = con_inv(&inst.plant, &inst.automaton, &inst.safe, &FixpointOptions::default()).unwrap();
        let slow = winning_sets(&inst.plant, &inst.automaton, &inst.safe).unwrap();
        assert_eq!(fast.winning.sets, slow, "seed {seed}: {:?}", inst.automaton);
    }
}

#[test]
fn interval_preview_changes_nothing() {
    for seed in 1000..1100 {
        let inst = random_instance(seed, true);
        let reduced = inst.automaton.reduce_to_lower_bounds();
        let on_g = winning_sets(&inst.plant, &inst.automaton, &inst.safe).unwrap();
        let on_hat = solve_product_game(&inst.plant, &expand_automaton(&reduced).unwrap(), &inst.safe).unwrap();
        assert_eq!(on_g, on_hat, "seed {seed}");
        let wider = solve_product_game(&inst.plant, &expand_general(&inst.automaton, 8).unwrap(), &inst.safe).unwrap();
        assert_eq!(wider, on_hat, "seed {seed}");
    }
}

#[test]
fn phase_count_matches_bound() {
    for seed in 0..200 {
        let g = random_instance(seed, false).automaton;
        let graph = expand_automaton(&g).unwrap();
        for q in 0..g.nodes() {
            let extra = match (g.holding(q), g.t_min(q)) {
                (Some(h), Some(t)) if h == t => 1,
                _ => 0,
            };
            assert_eq!(graph.phases_of(q), phase_bound(&g, q) + extra, "seed {seed} node {q}");
        }
    }
}

#[test]
fn instances_are_not_degenerate() {
    let (mut empty, mut full, mut mixed) = (0, 0, 0);
    for seed in 0..300 {
        let inst = random_instance(seed, false);
        let w = winning_sets(&inst.plant, &inst.automaton, &inst.safe).unwrap();
        if w.iter().all(|s| s.is_empty()) {
            empty += 1;
        } else if w == inst.safe {
            full += 1;
        } else {
            mixed += 1;
        }
    }
    println!("empty {empty} full {full} mixed {mixed}");
    assert!(mixed >= 30, "empty {empty} full {full} mixed {mixed}");
}
