use bgt_core::model::{comp_prune, hamiltonian, sample_instance, sample_instance_k, GTInstance};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sampled_instances_are_consistent(n in 10u64..300, k in 1u64..5, c in 1.05f64..1.95, seed in any::<u64>()) {
        prop_assume!(k < n);
        let inst = sample_instance_k(n, k, c, seed).unwrap();
        inst.validate().unwrap();
        for (test, &pos) in inst.tests.iter().zip(&inst.outcomes) {
            prop_assert_eq!(pos, test.iter().any(|i| inst.sigma_star.contains(i)));
        }
        let pr = comp_prune(&inst);
        for s in &inst.sigma_star {
            prop_assert!(pr.candidates.contains(s));
        }
        prop_assert_eq!(pr.m, inst.positive_count());
        if pr.m > 0 {
            prop_assert_eq!(hamiltonian(&pr, &pr.planted()).unwrap(), 0.0);
        }
    }

    #[test]
    fn sampling_is_deterministic(n in 10u64..200, alpha in 0.1f64..0.5, seed in any::<u64>()) {
        let a = sample_instance(n, alpha, 1.5, seed).unwrap();
        let b = sample_instance(n, alpha, 1.5, seed).unwrap();
        prop_assert_eq!(a.to_binary(), b.to_binary());
        prop_assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
    }

    #[test]
    fn binary_and_json_round_trip(seed in any::<u64>()) {
        let a = sample_instance_k(120, 3, 1.4, seed).unwrap();
        prop_assert_eq!(&GTInstance::from_binary(&a.to_binary()).unwrap(), &a);
        prop_assert_eq!(&GTInstance::from_json(&a.to_json().unwrap()).unwrap(), &a);
    }

    #[test]
    fn adding_a_member_never_uncovers(seed in any::<u64>()) {
        let pr = comp_prune(&sample_instance_k(40, 3, 1.5, seed).unwrap());
        prop_assume!(pr.p > pr.k);
        for base in bgt_core::combin::combinations(pr.p, pr.k) {
            let u = pr.uncovered_by(&base);
            for j in (0..pr.p).filter(|j| !base.contains(j)) {
                let mut ext = base.clone();
                ext.push(j);
                prop_assert!(pr.uncovered_by(&ext) <= u);
            }
        }
    }
}
