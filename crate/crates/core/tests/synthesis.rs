mod common;

use common::random_instance;
use preview_synth::preview::Interval;
use preview_synth::synthesis::{con_inv, inv_pre, max_controlled_invariant, verify_fixed_point};
use preview_synth::systems::{FiniteSet, FixpointOptions};
use proptest::prelude::*;

fn opts() -> FixpointOptions {
    FixpointOptions::default()
}

fn thinned(sets: &[FiniteSet], bits: &[bool]) -> Vec<FiniteSet> {
    let mut k = 0;
    sets.iter()
        .map(|s| {
            s.iter()
                .filter(|_| {
                    k += 1;
                    bits[k % bits.len()]
                })
                .collect()
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn winning_sets_are_safe_fixed_points(seed in any::<u64>(), widths in any::<bool>()) {
        let inst = random_instance(seed, widths);
        let out = con_inv(&inst.plant, &inst.automaton, &inst.safe, &opts()).unwrap();
        prop_assert!(out.is_certified());
        for (w, s) in out.winning.sets.iter().zip(&inst.safe) {
            prop_assert!(w.is_subset(s));
        }
        prop_assert!(verify_fixed_point(&inst.plant, &inst.automaton, &inst.safe, &out.winning.sets, &opts()).unwrap());
        prop_assert!(out.winning.changed.last().unwrap().is_empty());
        for (q, w) in out.winning.sets.iter().enumerate() {
            prop_assert_eq!(out.certificate.winning(q), w);
        }
        let blind = max_controlled_invariant(&inst.plant, &inst.safe.iter().fold(inst.safe[0].clone(), |a, s| a.intersect(s)), &opts()).unwrap();
        for w in &out.winning.sets {
            prop_assert!(blind.set.is_subset(w) || g_has_sink(&inst));
        }
    }

    #[test]
    fn update_is_monotone(seed in any::<u64>(), bits in prop::collection::vec(any::<bool>(), 1..9)) {
        let inst = random_instance(seed, false);
        let g_hat = inst.automaton.reduce_to_lower_bounds();
        let small = thinned(&inst.safe, &bits);
        for i in (0..g_hat.nodes()).filter(|&q| !g_hat.is_sink(q)) {
            let (big, _) = inv_pre(&inst.plant, &g_hat, i, &inst.safe, &inst.safe, &opts()).unwrap();
            let (little, _) = inv_pre(&inst.plant, &g_hat, i, &small, &inst.safe, &opts()).unwrap();
            prop_assert!(little.winning().is_subset(big.winning()));
            prop_assert!(big.winning().is_subset(&inst.safe[i]));
        }
    }

    #[test]
    fn larger_safe_sets_win_more(seed in any::<u64>(), bits in prop::collection::vec(any::<bool>(), 1..9)) {
        let inst = random_instance(seed, false);
        let small = thinned(&inst.safe, &bits);
        let big = con_inv(&inst.plant, &inst.automaton, &inst.safe, &opts()).unwrap().winning.sets;
        let little = con_inv(&inst.plant, &inst.automaton, &small, &opts()).unwrap().winning.sets;
        for (l, b) in little.iter().zip(&big) {
            prop_assert!(l.is_subset(b));
        }
    }

    #[test]
    fn more_preview_or_holding_never_hurts(seed in any::<u64>(), tau in 0usize..3, h in 1usize..4) {
        let inst = random_instance(seed, false);
        let h = h.max(tau);
        let at = |tau: usize, h: usize| {
            let g = inst.automaton.with_timing(Interval::singleton(tau), h).unwrap();
            con_inv(&inst.plant, &g, &inst.safe, &opts()).unwrap().winning.sets
        };
        let base = at(tau, h);
        let more_preview = at(tau + 1, h + 1);
        let more_holding = at(tau, h + 1);
        for q in 0..base.len() {
            prop_assert!(base[q].is_subset(&more_holding[q]));
            prop_assert!(more_holding[q].is_subset(&more_preview[q]));
        }
    }
}

fn g_has_sink(inst: &common::FiniteInstance) -> bool {
    (0..inst.automaton.nodes()).any(|q| inst.automaton.is_sink(q))
}
