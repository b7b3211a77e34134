//! Exact binomials and in-place k-combination enumeration.

/// `C(n, k)` exactly, saturating at `u128::MAX`.
pub fn binom_u128(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc = C(n, i); dividing by gcd first keeps every step integral
        let g = gcd(acc, (i + 1) as u128);
        let d = (i + 1) as u128 / g;
        match (acc / g).checked_mul((n - i) as u128 / d) {
            Some(v) => acc = v,
            None => return u128::MAX,
        }
    }
    acc
}

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Calls `f` on every `k`-combination of `0..n` in lexicographic order.
/// The slice handed to `f` is sorted.
pub fn for_each_combination(n: usize, k: usize, mut f: impl FnMut(&[usize])) {
    if k > n {
        return;
    }
    let mut c: Vec<usize> = (0..k).collect();
    loop {
        f(&c);
        // rightmost position that can still advance
        let mut i = k;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            if c[i] < n - k + i {
                break;
            }
            if i == 0 {
                return;
            }
        }
        c[i] += 1;
        for j in i + 1..k {
            c[j] = c[j - 1] + 1;
        }
    }
}

/// All `k`-combinations of `0..n` in lexicographic order.
pub fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    for_each_combination(n, k, |c| out.push(c.to_vec()));
    out
}

/// Lexicographic rank of a sorted combination among all `k`-subsets of `0..n`.
pub fn rank_combination(n: usize, comb: &[usize]) -> usize {
    let k = comb.len();
    let mut rank = 0usize;
    let mut prev = 0usize;
    for (i, &c) in comb.iter().enumerate() {
        for v in prev..c {
            rank += binom_u128((n - v - 1) as u64, (k - i - 1) as u64) as usize;
        }
        prev = c + 1;
    }
    rank
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binomials() {
        assert_eq!(binom_u128(100, 2), 4950);
        assert_eq!(binom_u128(52, 5), 2_598_960);
        assert_eq!(binom_u128(5, 7), 0);
        assert_eq!(binom_u128(0, 0), 1);
        assert_eq!(binom_u128(1000, 10), 263_409_560_461_970_212_832_400);
        assert_eq!(binom_u128(100, 50), 100_891_344_545_564_193_334_812_497_256);
    }

    #[test]
    fn enumeration_and_rank() {
        let all = combinations(6, 3);
        assert_eq!(all.len(), 20);
        for (r, c) in all.iter().enumerate() {
            assert_eq!(rank_combination(6, c), r);
        }
        assert_eq!(combinations(4, 0), vec![Vec::<usize>::new()]);
        assert!(combinations(2, 3).is_empty());
        assert_eq!(combinations(3, 3), vec![vec![0, 1, 2]]);
    }
}
