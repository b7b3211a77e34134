//! Scalar information-theoretic primitives.
//!
//! Everything internal is in nats. Bits appear only through
//! [`binary_entropy`], which is the `h_2` used in thresholds such as
//! `H_C = h_2^{-1}(2 - 2/C)`.

use serde::{Deserialize, Serialize};
use std::f64::consts::{LN_2, PI};

use crate::error::{domain, Result};

/// Absolute tolerance of the inverse-entropy bisection.
pub const ENTROPY_INV_TOL: f64 = 1e-12;
/// Iteration cap of the inverse-entropy bisection.
pub const ENTROPY_INV_MAX_ITER: usize = 200;

fn check_unit(name: &str, x: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&x) {
        return domain(format!("{name} = {x} is outside [0, 1]"));
    }
    Ok(())
}

/// `x ln x` with the convention `0 ln 0 = 0`.
#[inline]
fn xlnx(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * x.ln()
    }
}

/// Natural-log binary entropy, `h(x) = -x ln x - (1-x) ln(1-x)`.
pub fn entropy_nats(x: f64) -> Result<f64> {
    check_unit("x", x)?;
    Ok(-xlnx(x) - xlnx(1.0 - x))
}

/// Binary entropy in bits, `h_2(x)`.
pub fn binary_entropy(x: f64) -> Result<f64> {
    Ok(entropy_nats(x)? / LN_2)
}

fn h2_unchecked(x: f64) -> f64 {
    (-xlnx(x) - xlnx(1.0 - x)) / LN_2
}

/// Left-branch inverse of `h_2`: the unique `x` in `[0, 1/2]` with
/// `h_2(x) = v`.
pub fn entropy_inv_left(v: f64) -> Result<f64> {
    check_unit("v", v)?;
    if v == 0.0 {
        return Ok(0.0);
    }
    if v == 1.0 {
        return Ok(0.5);
    }
    let (mut lo, mut hi) = (0.0_f64, 0.5_f64);
    for _ in 0..ENTROPY_INV_MAX_ITER {
        let mid = 0.5 * (lo + hi);
        if h2_unchecked(mid) < v {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < ENTROPY_INV_TOL {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Left-branch inverse of the natural-log entropy `h`.
pub fn entropy_nats_inv_left(v: f64) -> Result<f64> {
    if !(0.0..=LN_2 * (1.0 + 1e-15)).contains(&v) {
        return domain(format!("v = {v} is outside [0, ln 2]"));
    }
    entropy_inv_left((v / LN_2).min(1.0))
}

/// Two-point KL divergence `D(q1 || q2)` in nats.
///
/// `0 ln(0/.) = 0`; the result is `+inf` when `q2` puts zero mass where `q1`
/// does not.
pub fn kl_div(q1: f64, q2: f64) -> Result<f64> {
    check_unit("q1", q1)?;
    check_unit("q2", q2)?;
    Ok(kl_div_c(q1, 1.0 - q1, q2, 1.0 - q2))
}

/// KL divergence with the complements supplied by the caller.
///
/// Near the corners `1 - q` computed by subtraction loses all its digits;
/// callers that know `1 - q1` and `1 - q2` in closed form pass them here.
pub fn kl_div_c(q1: f64, q1c: f64, q2: f64, q2c: f64) -> f64 {
    fn term(a: f64, b: f64) -> f64 {
        if a == 0.0 {
            0.0
        } else if b == 0.0 {
            f64::INFINITY
        } else {
            a * (a / b).ln()
        }
    }
    let d = term(q1, q2) + term(q1c, q2c);
    // rounding can leave a tiny negative value when q1 ~ q2
    d.max(0.0)
}

/// `H_C = h_2^{-1}(2 - 2/C)` on the left branch, for `1 < C <= 2`.
pub fn h_c(c: f64) -> Result<f64> {
    if !(c > 1.0 && c <= 2.0) {
        return domain(format!("C = {c} is outside (1, 2]"));
    }
    entropy_inv_left((2.0 - 2.0 / c).clamp(0.0, 1.0))
}

/// Which tail of a binomial distribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TailSide {
    /// `P(X <= k)`
    LowerTail,
    /// `P(X >= k)`
    UpperTail,
}

/// Chernoff-KL sandwich for a binomial tail probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailBounds {
    pub lower: f64,
    pub upper: f64,
}

/// Bounds `e^{-n D(k/n || pr)} / (3 sqrt n) <= P(tail) <= e^{-n D(k/n || pr)}`
/// for `X ~ Binomial(n, pr)`.
///
/// The exponential upper bound only holds when `k` lies on the tail side of
/// the mean (`k <= n pr` for the lower tail, `k >= n pr` for the upper
/// tail). On the other side the tail holds most of the mass and the returned
/// upper bound is the trivial 1.
pub fn binom_tail_bounds(n: u64, pr: f64, k: u64, side: TailSide) -> Result<TailBounds> {
    if n == 0 {
        return domain("n must be positive");
    }
    if !(pr > 0.0 && pr < 1.0) {
        return domain(format!("pr = {pr} is outside (0, 1)"));
    }
    if k > n {
        return domain(format!("k = {k} exceeds n = {n}"));
    }
    let nf = n as f64;
    let frac = k as f64 / nf;
    let exponent = (-nf * kl_div_c(frac, (n - k) as f64 / nf, pr, 1.0 - pr)).exp();
    let on_tail = match side {
        TailSide::LowerTail => frac <= pr,
        TailSide::UpperTail => frac >= pr,
    };
    Ok(TailBounds {
        lower: exponent / (3.0 * nf.sqrt()),
        upper: if on_tail { exponent } else { 1.0 },
    })
}

/// Largest `n` accepted by the exact binomial evaluators.
pub const EXACT_BINOM_MAX_N: u64 = 10_000;

/// Exact binomial tail by summing pmf terms in log space.
pub fn binom_tail_exact(n: u64, pr: f64, k: u64, side: TailSide) -> Result<f64> {
    if n == 0 || n > EXACT_BINOM_MAX_N {
        return domain(format!("n = {n} is outside [1, {EXACT_BINOM_MAX_N}]"));
    }
    if !(pr > 0.0 && pr < 1.0) {
        return domain(format!("pr = {pr} is outside (0, 1)"));
    }
    if k > n {
        return domain(format!("k = {k} exceeds n = {n}"));
    }
    let (lp, lq) = (pr.ln(), (-pr).ln_1p());
    let pmf = |j: u64| (log_binom(n, j).unwrap() + j as f64 * lp + (n - j) as f64 * lq).exp();
    let sum: f64 = match side {
        TailSide::LowerTail => (0..=k).map(pmf).sum(),
        TailSide::UpperTail => (k..=n).map(pmf).sum(),
    };
    Ok(sum.min(1.0))
}

/// Exact binomial CDF `P(X <= k)`.
pub fn binom_cdf_exact(n: u64, pr: f64, k: u64) -> Result<f64> {
    binom_tail_exact(n, pr, k, TailSide::LowerTail)
}

// Tail of the Stirling series for ln Gamma(x + 1), accurate to ~1e-14 for x >= 10.
fn stirling_tail(x: f64) -> f64 {
    let r = 1.0 / x;
    let r2 = r * r;
    r * (1.0 / 12.0 - r2 * (1.0 / 360.0 - r2 * (1.0 / 1260.0 - r2 * (1.0 / 1680.0 - r2 / 1188.0))))
}

/// `ln Gamma(x + 1)`.
pub fn ln_factorial(x: f64) -> f64 {
    libm::lgamma(x + 1.0)
}

const DIRECT_LGAMMA_LIMIT: f64 = 1e4;
const STIRLING_MIN: f64 = 10.0;

/// `ln C(n, k)` for real arguments `0 <= k <= n`, via log-gamma.
///
/// Plain log-gamma differences cancel catastrophically once `n` is large, so
/// large arguments go through the Stirling series with the leading terms
/// rearranged around `ln_1p`.
pub fn log_binom_real(n: f64, k: f64) -> Result<f64> {
    if !(k >= 0.0 && k <= n && n.is_finite()) {
        return domain(format!("log_binom needs 0 <= k <= n, got n = {n}, k = {k}"));
    }
    let m = n - k;
    let (small, big) = if k <= m { (k, m) } else { (m, k) };
    if small == 0.0 {
        return Ok(0.0);
    }
    if big < DIRECT_LGAMMA_LIMIT {
        return Ok(ln_factorial(n) - ln_factorial(k) - ln_factorial(m));
    }
    let head = if small >= STIRLING_MIN {
        small * (n / small).ln() - big * (-small / n).ln_1p() + 0.5 * (n / (small * big)).ln()
            - 0.5 * (2.0 * PI).ln()
            - stirling_tail(small)
    } else {
        // ln Gamma(n+1) - ln Gamma(big+1), minus ln Gamma(small+1)
        small * n.ln() - (big + 0.5) * (-small / n).ln_1p() - small - ln_factorial(small)
    };
    Ok(head + stirling_tail(n) - stirling_tail(big))
}

/// `ln C(n, k)` for integers.
pub fn log_binom(n: u64, k: u64) -> Result<f64> {
    if k > n {
        return domain(format!("log_binom needs k <= n, got n = {n}, k = {k}"));
    }
    log_binom_real(n as f64, k as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn entropy_values() {
        assert_abs_diff_eq!(binary_entropy(0.5).unwrap(), 1.0, epsilon = 1e-15);
        assert_eq!(binary_entropy(0.0).unwrap(), 0.0);
        assert_eq!(binary_entropy(1.0).unwrap(), 0.0);
        let direct = -0.25 * 0.25f64.log2() - 0.75 * 0.75f64.log2();
        assert_abs_diff_eq!(binary_entropy(0.25).unwrap(), direct, epsilon = 1e-15);
        assert_abs_diff_eq!(binary_entropy(0.25).unwrap(), 0.811_278_124_459_132_8, epsilon = 1e-12);
        assert_abs_diff_eq!(entropy_nats(0.25).unwrap(), LN_2 * 0.811_278_124_459_132_8, epsilon = 1e-12);
        assert!(binary_entropy(-0.1).is_err());
        assert!(binary_entropy(1.1).is_err());
        assert!(binary_entropy(f64::NAN).is_err());
    }

    #[test]
    fn inverse_entropy() {
        assert_eq!(entropy_inv_left(1.0).unwrap(), 0.5);
        assert_eq!(entropy_inv_left(0.0).unwrap(), 0.0);
        // scipy brentq on h2 over (0, 1/2]
        assert_abs_diff_eq!(entropy_inv_left(0.644).unwrap(), 0.164_087_887_702_08, epsilon = 1e-10);
        assert!(entropy_inv_left(1.5).is_err());
    }

    #[test]
    fn kl_values() {
        assert_eq!(kl_div(0.3, 0.3).unwrap(), 0.0);
        assert_abs_diff_eq!(kl_div(0.0, 0.5).unwrap(), LN_2, epsilon = 1e-15);
        let direct = 0.25 * (0.25f64 / 0.5).ln() + 0.75 * (0.75f64 / 0.5).ln();
        assert_abs_diff_eq!(kl_div(0.25, 0.5).unwrap(), direct, epsilon = 1e-15);
        assert_abs_diff_eq!(kl_div(0.25, 0.5).unwrap(), 0.130_812_035_941_137_5, epsilon = 1e-12);
        assert_eq!(kl_div(0.5, 0.0).unwrap(), f64::INFINITY);
        assert_eq!(kl_div(0.0, 0.0).unwrap(), 0.0);
        assert_eq!(kl_div(1.0, 1.0).unwrap(), 0.0);
        assert_eq!(kl_div(0.2, 1.0).unwrap(), f64::INFINITY);
        assert!(kl_div(-0.1, 0.5).is_err());
        assert!(kl_div(0.1, 1.5).is_err());
    }

    #[test]
    fn h_c_values() {
        assert_abs_diff_eq!(h_c(2.0).unwrap(), 0.5, epsilon = 1e-12);
        assert!(h_c(1.0 + 1e-9).unwrap() < 1e-4);
        assert_abs_diff_eq!(h_c(1.47491).unwrap(), 0.164_082_4, epsilon = 1e-6);
        assert!(h_c(1.0).is_err());
        assert!(h_c(2.1).is_err());
    }

    #[test]
    fn tail_bound_examples() {
        let b = binom_tail_bounds(10, 0.5, 5, TailSide::LowerTail).unwrap();
        assert_abs_diff_eq!(b.upper, 1.0, epsilon = 1e-15);
        let exact = binom_cdf_exact(20, 0.5, 4).unwrap();
        // 6196 / 2^20
        assert_abs_diff_eq!(exact, 6196.0 / 1_048_576.0, epsilon = 1e-15);
        let lo = binom_tail_bounds(20, 0.5, 4, TailSide::LowerTail).unwrap();
        assert!(lo.lower <= exact && exact <= lo.upper);
        let hi = binom_tail_bounds(20, 0.5, 16, TailSide::UpperTail).unwrap();
        assert_abs_diff_eq!(hi.lower, lo.lower, epsilon = 1e-15);
        assert_abs_diff_eq!(hi.upper, lo.upper, epsilon = 1e-15);
        assert!(binom_tail_bounds(0, 0.5, 0, TailSide::LowerTail).is_err());
        assert!(binom_tail_bounds(5, 1.0, 2, TailSide::LowerTail).is_err());
        assert!(binom_tail_bounds(5, 0.5, 6, TailSide::LowerTail).is_err());
    }

    #[test]
    fn log_binom_exact_integers() {
        assert_eq!(log_binom(17, 0).unwrap(), 0.0);
        assert_abs_diff_eq!(log_binom(100, 2).unwrap(), 4950f64.ln(), epsilon = 1e-12);
        assert_abs_diff_eq!(log_binom(52, 5).unwrap(), 2_598_960f64.ln(), epsilon = 1e-12);
        assert!(log_binom(3, 4).is_err());
    }

    #[test]
    fn log_binom_large_arguments() {
        // mpmath loggamma at 50 digits
        let cases: [(f64, f64, f64); 7] = [
            (1e12, 5.0, 133.367_613_836_850_695),
            (1e12, 5e11, 693_147_180_545.904_007_5),
            (1e6, 3e5, 610_857.255_684_641_916_5),
            (1e4, 17.0, 123.057_105_387_286_781_4),
            (1e12, 123_456.0, 2_087_310.842_783_646_614),
            (1e8, 1.0, 18.420_680_743_952_365_47),
            (7.5, 2.25, 3.393_861_339_202_043),
        ];
        for (n, k, want) in cases {
            let got = log_binom_real(n, k).unwrap();
            // 1e-9 absolute until the value itself outgrows f64 resolution
            let tol = 1e-9_f64.max(1e-15 * want.abs());
            assert!((got - want).abs() <= tol, "n={n} k={k}: {got} vs {want}");
        }
    }
}
