use bgt_core::combin::combinations;
use bgt_core::mcmc::{kernel_row, run_chain, ChainConfig, Init, Rule, StateSpace};
use bgt_core::model::{comp_prune, sample_instance_k};
use bgt_core::{KSubset, PrunedInstance};
use proptest::prelude::*;

fn tiny(seed: u64, k: u64) -> Option<PrunedInstance> {
    let pr = comp_prune(&sample_instance_k(20, k, 1.5, seed).unwrap());
    (pr.p > pr.k && pr.p <= 10 && pr.m > 0).then_some(pr)
}

fn rule() -> impl Strategy<Value = Rule> {
    prop_oneof![Just(Rule::Glauber), Just(Rule::Metropolis)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn detailed_balance_and_row_sums(seed in 0u64..5000, k in 2u64..4, beta in 0.0f64..10.0, rule in rule()) {
        let Some(pr) = tiny(seed, k) else { return Ok(()) };
        let space = StateSpace::enumerate(&pr).unwrap();
        let pi = space.gibbs(beta);
        let states = combinations(pr.p, pr.k);
        for (i, s) in states.iter().enumerate() {
            let sigma = KSubset::new(s.clone(), pr.k, pr.p).unwrap();
            let row = kernel_row(&pr, &sigma, beta, rule).unwrap();
            prop_assert!((row.sum() - 1.0).abs() <= 1e-12);
            for (tau, fwd) in &row.moves {
                let j = bgt_core::combin::rank_combination(pr.p, tau.members());
                let back = kernel_row(&pr, tau, beta, rule).unwrap();
                let bwd = back.moves.iter().find(|m| m.0 == sigma).unwrap().1;
                prop_assert!((pi[i] * fwd - pi[j] * bwd).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn traces_stay_in_range_and_replay(seed in any::<u64>(), beta in 0.0f64..50.0, rule in rule()) {
        let pr = comp_prune(&sample_instance_k(200, 4, 1.3, seed % 1000).unwrap());
        prop_assume!(pr.p > pr.k && pr.m > 0);
        let mut cfg = ChainConfig::new(beta, 2000, seed);
        cfg.rule = rule;
        cfg.record_every = 7;
        let a = run_chain(&pr, &cfg).unwrap();
        prop_assert!(a.energies.iter().all(|&e| (0.0..=1.0).contains(&e)));
        prop_assert!(a.overlaps.iter().all(|&o| o <= pr.k));
        prop_assert_eq!(a, run_chain(&pr, &cfg).unwrap());
    }

    #[test]
    fn disjoint_start_has_zero_overlap(seed in 0u64..500) {
        let pr = comp_prune(&sample_instance_k(200, 3, 1.3, seed).unwrap());
        prop_assume!(pr.p >= 2 * pr.k && pr.m > 0);
        let mut cfg = ChainConfig::new(1.0, 1, seed);
        cfg.init = Init::DisjointFromPlanted;
        prop_assert_eq!(run_chain(&pr, &cfg).unwrap().overlaps[0], 0);
    }
}
