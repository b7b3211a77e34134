use bgt_core::setcover::{
    corner_bounds, count_flat, flat_radius, is_flat, phi_k_exact, phi_k_greedy, random_guess_mean, sample_cover,
    subset_props, CORNER_DELTA,
};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn exact_dominates_greedy_and_random(p in 6usize..16, m in 5usize..60, k in 1usize..4, seed in any::<u64>()) {
        prop_assume!(k < p);
        let inst = sample_cover(p, m, k, seed).unwrap();
        let ex = phi_k_exact(&inst).unwrap();
        prop_assert!(ex.phi <= 1.0);
        prop_assert!(phi_k_greedy(&inst).phi <= ex.phi);
        prop_assert!(random_guess_mean(&inst, 200, seed) <= ex.phi);
    }

    #[test]
    fn subset_props_decrease(k in 1usize..40, y in 0.001f64..0.499) {
        let mut prev = (f64::INFINITY, f64::INFINITY);
        for l in 0..=k {
            let v = subset_props(k, l, y).unwrap();
            prop_assert!(v.0 < prev.0 && v.1 < prev.1);
            prev = v;
        }
    }

    #[test]
    fn radius_vanishes_at_both_ends(k in 1usize..60, y in 0.001f64..0.499, m in 1.0f64..1e6, c in 0.0f64..2.0) {
        prop_assert_eq!(flat_radius(k, 0, y, m, c).unwrap(), 0.0);
        prop_assert_eq!(flat_radius(k, k, y, m, c).unwrap(), 0.0);
    }

    #[test]
    fn flat_subsets_are_counted_among_plain_ones(seed in any::<u64>(), t_off in 0usize..4) {
        let inst = sample_cover(12, 48, 3, seed).unwrap();
        let best = phi_k_exact(&inst).unwrap();
        let t = (48 - best.covered + t_off).clamp(1, 23);
        let fc = count_flat(&inst, t as f64 / 48.0, 0.5).unwrap();
        prop_assert!(fc.flat <= fc.exact && fc.exact <= fc.at_most);
        // a huge radius makes every subset flat
        if fc.exact > 0 {
            let any = bgt_core::combin::combinations(12, 3).into_iter().find(|s| inst.uncovered_by(s) == t).unwrap();
            prop_assert!(is_flat(&inst, &any, t as f64 / 48.0, 1e6).unwrap());
        }
    }
}

#[test]
fn corner_bounds_on_surrogate_scales() {
    for &(n, alpha, c) in &[
        (1_000_000_000_000u64, 0.1, 1.3),
        (1_000_000_000_000_000_000, 0.02, 1.3),
        (1_000_000_000_000_000_000, 0.1, 1.2),
        (1_000_000_000, 0.2, 1.5),
    ] {
        let r = corner_bounds(n, alpha, c, 0.1, 0.01, CORNER_DELTA).unwrap();
        assert!(r.low_ok && r.high_ok && r.mid_ok, "n={n} alpha={alpha} C={c}: {r:?}");
    }
}
