use bgt_core::combin::binom_u128;
use bgt_core::landscape::{count_z, detect_bogp, phi, phi_by_threshold, search_bogp, PhiCurve};
use bgt_core::model::{comp_prune, sample_instance_k};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn z_counts_are_monotone_and_partition(seed in 0u64..10_000, k in 1u64..4) {
        let pr = comp_prune(&sample_instance_k(30, k, 1.5, seed).unwrap());
        prop_assume!(pr.p > pr.k && pr.p <= 14 && pr.m > 0);
        let mut total = 0u128;
        for l in 0..=pr.k {
            let mut prev = 0;
            for t in 0..=pr.m {
                let z = count_z(&pr, t, l).unwrap();
                prop_assert!(z >= prev);
                prev = z;
            }
            total += prev as u128;
            prop_assert_eq!(phi(&pr, l).unwrap(), phi_by_threshold(&pr, l).unwrap());
        }
        prop_assert_eq!(total, binom_u128(pr.p as u64, pr.k as u64));
        prop_assert_eq!(phi(&pr, pr.k).unwrap(), Some(0.0));
    }

    #[test]
    fn searched_parameters_certify(body in prop::collection::vec(0u32..20, 1..12)) {
        let m = 20;
        let mut vals: Vec<f64> = body.iter().map(|&v| v as f64 / m as f64).collect();
        vals.push(0.0);
        let curve = PhiCurve::from_values(vals, m).unwrap();
        if let Some((z1, z2, r, delta)) = search_bogp(&curve) {
            prop_assert!(detect_bogp(&curve, z1, z2, r, delta).unwrap().holds);
        }
    }
}
