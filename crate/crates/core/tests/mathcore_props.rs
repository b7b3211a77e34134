use bgt_core::mathcore::{binary_entropy, entropy_inv_left, h_c, kl_div, log_binom};
use proptest::prelude::*;

proptest! {
    #[test]
    fn entropy_inverse_round_trip(v in 0.0f64..=1.0) {
        let x = entropy_inv_left(v).unwrap();
        prop_assert!((0.0..=0.5).contains(&x));
        prop_assert!((binary_entropy(x).unwrap() - v).abs() <= 1e-9);
    }

    #[test]
    fn entropy_inverse_is_monotone(a in 0.0f64..=1.0, b in 0.0f64..=1.0) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(entropy_inv_left(lo).unwrap() <= entropy_inv_left(hi).unwrap());
    }

    #[test]
    fn kl_is_nonnegative_and_zero_on_diagonal(a in 0.0f64..=1.0, b in 0.001f64..0.999) {
        let d = kl_div(a, b).unwrap();
        prop_assert!(d >= 0.0);
        prop_assert!(kl_div(b, b).unwrap() == 0.0);
        if (a - b).abs() > 1e-3 {
            prop_assert!(d > 0.0);
        }
    }

    #[test]
    fn kl_is_midpoint_convex_in_first_argument(a in 0.0f64..=1.0, c in 0.0f64..=1.0, b in 0.001f64..0.999) {
        let mid = kl_div((a + c) / 2.0, b).unwrap();
        let avg = (kl_div(a, b).unwrap() + kl_div(c, b).unwrap()) / 2.0;
        prop_assert!(mid <= avg + 1e-12);
    }

    #[test]
    fn log_binom_is_symmetric(n in 0u64..2_000_000_000_000, frac in 0.0f64..=1.0) {
        let k = ((n as f64) * frac) as u64;
        prop_assert_eq!(log_binom(n, k).unwrap(), log_binom(n, n - k).unwrap());
    }

    #[test]
    fn h_c_is_strictly_increasing(a in 1.0001f64..2.0, gap in 1e-4f64..0.5) {
        let b = (a + gap).min(2.0);
        prop_assume!(b > a);
        prop_assert!(h_c(a).unwrap() < h_c(b).unwrap());
    }
}

#[test]
fn h_c_top_endpoint() {
    assert!((h_c(2.0).unwrap() - 0.5).abs() <= 1e-12);
}

#[test]
fn kl_dense_grid() {
    for i in 0..=200 {
        for j in 1..200 {
            let (a, b) = (i as f64 / 200.0, j as f64 / 200.0);
            let d = kl_div(a, b).unwrap();
            assert!(if i == j { d == 0.0 } else { d > 0.0 }, "D({a}||{b}) = {d}");
        }
    }
}
