mod common;

use nalgebra::{DMatrix, DVector};
use preview_synth::geometry::{Polytope, Tolerance};
use preview_synth::systems::{
    inv, inv_modes, pre, pre_int, AffineMode, AffineSystem, FiniteSet, FixpointOptions, Plant, Status,
};
use proptest::prelude::*;

fn finite_case() -> impl Strategy<Value = (u64, Vec<bool>, Vec<bool>)> {
    (any::<u64>(), prop::collection::vec(any::<bool>(), 8), prop::collection::vec(any::<bool>(), 8))
}

fn mask(bits: &[bool], n: usize) -> FiniteSet {
    (0..n).filter(|&x| bits[x]).collect()
}

/// `x⁺ = a x + u + d` on `[-10, 10]` with `|u| ≤ 1` and `|d| ≤ w`.
fn line(a: f64, w: f64) -> AffineSystem {
    let s = |v| DMatrix::from_element(1, 1, v);
    let mode = AffineMode::new("f1", s(a), s(1.0), s(1.0), DVector::zeros(1), Polytope::interval(-w, w)).unwrap();
    AffineSystem::new(
        Polytope::interval(-10.0, 10.0),
        Polytope::interval(-1.0, 1.0),
        vec![mode],
        Tolerance::default(),
    )
    .unwrap()
}

fn bounds(p: &Polytope) -> Option<(f64, f64)> {
    p.bounding_box(&Tolerance::default()).unwrap().map(|b| b[0])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn finite_pre_is_monotone((seed, a, b) in finite_case()) {
        let plant = common::random_plant(&mut common::rng(seed), 8, 3, 2);
        let n = plant.n_states();
        let small = mask(&a, n);
        let large: FiniteSet = small.iter().chain(mask(&b, n).iter()).collect();
        for m in 0..plant.num_modes() {
            prop_assert!(pre(&plant, m, &small).unwrap().is_subset(&pre(&plant, m, &large).unwrap()));
        }
        let all: Vec<usize> = (0..plant.num_modes()).collect();
        let common_pre = plant.pre_common(&all, &large).unwrap();
        prop_assert!(common_pre.is_subset(&pre(&plant, 0, &large).unwrap()));
    }

    #[test]
    fn finite_invariant_is_a_fixed_point((seed, a, b) in finite_case()) {
        let plant = common::random_plant(&mut common::rng(seed), 8, 3, 2);
        let n = plant.n_states();
        let safe = mask(&a, n);
        let larger: FiniteSet = safe.iter().chain(mask(&b, n).iter()).collect();
        let opts = FixpointOptions::default();
        for m in 0..plant.num_modes() {
            let out = inv(&plant, m, &safe, &opts).unwrap();
            prop_assert_eq!(out.status, Status::Converged);
            prop_assert!(out.set.is_subset(&safe));
            prop_assert_eq!(pre_int(&plant, m, &out.set, &safe).unwrap(), out.set.clone());
            prop_assert!(pre_int(&plant, m, &safe, &safe).unwrap().is_subset(&safe));
            prop_assert!(out.set.is_subset(&inv(&plant, m, &larger, &opts).unwrap().set));
        }
        let all: Vec<usize> = (0..plant.num_modes()).collect();
        let blind = inv_modes(&plant, &all, &safe, &opts).unwrap().set;
        prop_assert!(blind.is_subset(&inv(&plant, 0, &safe, &opts).unwrap().set));
    }

    #[test]
    fn line_pre_matches_interval_arithmetic(a in 0.3..2.5f64, w in 0.0..1.5f64, lo in -6.0..0.0f64, len in 0.0..6.0f64) {
        let sys = line(a, w);
        let hi = lo + len;
        let got = pre(&sys, 0, &Polytope::interval(lo, hi)).unwrap();
        // a x + u ∈ [lo + w, hi - w] for some |u| ≤ 1, clipped to the domain
        let (l, h) = (lo + w, hi - w);
        let expect = (l <= h).then(|| (((l - 1.0) / a).max(-10.0), ((h + 1.0) / a).min(10.0)));
        match (bounds(&got), expect) {
            (None, None) => {}
            (Some((gl, gh)), Some((el, eh))) => prop_assert!((gl - el).abs() < 1e-6 && (gh - eh).abs() < 1e-6, "{gl} {gh} vs {el} {eh}"),
            (g, e) => prop_assert!(false, "got {:?}, expected {:?}", g, e),
        }
    }

    #[test]
    fn line_invariant_is_a_fixed_point(a in 0.3..2.5f64, w in 0.0..1.0f64, r in 0.5..8.0f64, grow in 0.0..2.0f64) {
        let sys = line(a, w);
        let safe = Polytope::interval(-r, r);
        let opts = FixpointOptions::default();
        let out = inv(&sys, 0, &safe, &opts).unwrap();
        prop_assert!(sys.is_subset(&out.set, &safe).unwrap());
        if out.status == Status::Converged {
            let again = pre_int(&sys, 0, &out.set, &safe).unwrap();
            prop_assert!(sys.set_eq(&again, &out.set).unwrap());
        }
        let bigger = inv(&sys, 0, &Polytope::interval(-r - grow, r + grow), &opts).unwrap();
        prop_assert!(sys.is_subset(&out.set, &bigger.set).unwrap());
        // Every point of a converged invariant set has an input that keeps
        // it there. A capped iterate is still slightly too large.
        if let (Status::Converged, Some((l, h))) = (out.status, bounds(&out.set)) {
            for k in 0..=10 {
                let x = vec![l + (h - l) * k as f64 / 10.0];
                let u = sys.select_input(0, &x, &out.set).unwrap();
                prop_assert!(u.is_some(), "no input at {:?}", x);
                let u = u.unwrap()[0];
                for d in [-w, w] {
                    let next = a * x[0] + u + d;
                    prop_assert!(next >= l - 1e-6 && next <= h + 1e-6);
                }
            }
        }
    }
}
