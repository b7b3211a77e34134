//! Bernoulli group testing instances, COMP pruning and the Hamiltonian.

use rand::distributions::{Bernoulli, Distribution};
use serde::{Deserialize, Serialize};
use std::f64::consts::LN_2;

use crate::bitset::{uncovered_count, BitSet};
use crate::error::{domain, Error, Result};
use crate::mathcore::log_binom;
use crate::rng::{stream_rng, Stream};

/// Largest membership matrix (in bytes, bit-packed) `sample_instance` will build.
pub const MEMORY_BUDGET_BYTES: u128 = 1 << 32;

/// Assignment probability `q = 1 - 2^{-1/k}`, so that `(1 - q)^k = 1/2`.
pub fn assignment_prob(k: u64) -> Result<f64> {
    if k < 1 {
        return domain("k must be at least 1");
    }
    Ok(-(-LN_2 / k as f64).exp_m1())
}

fn check_c(c: f64) -> Result<()> {
    if c >= 2.0 {
        return domain(format!(
            "C = {c} >= 2: COMP alone already returns exactly the infected set there; use 1 < C < 2"
        ));
    }
    if !(c > 1.0) {
        return domain(format!("C = {c} must satisfy 1 < C < 2"));
    }
    Ok(())
}

/// `N = floor(C log2 C(n, k))`.
pub fn num_tests(n: u64, k: u64, c: f64) -> Result<u64> {
    if k < 1 || k > n {
        return domain(format!("need 1 <= k <= n, got n = {n}, k = {k}"));
    }
    if !(c > 1.0) || !c.is_finite() {
        return domain(format!("C = {c} must exceed 1"));
    }
    Ok((c * log_binom(n, k)? / LN_2).floor() as u64)
}

/// `k = floor(n^alpha)`.
pub fn infected_count(n: u64, alpha: f64) -> Result<u64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return domain(format!("alpha = {alpha} is outside (0, 1)"));
    }
    Ok((n as f64).powf(alpha).floor() as u64)
}

/// Deterministic stand-ins for the random scales: `M_det = N / 2` and
/// `p_det = n (k/n)^{C/2} + k`.
pub fn deterministic_scales(n: u64, k: u64, c: f64) -> Result<(f64, f64)> {
    if k >= n {
        return domain(format!("need k < n, got n = {n}, k = {k}"));
    }
    let big_n = num_tests(n, k, c)?;
    let (nf, kf) = (n as f64, k as f64);
    Ok((big_n as f64 / 2.0, nf * (kf / nf).powf(c / 2.0) + kf))
}

/// Concentration window `(1 -+ N^{-eta}) N / 2` for the positive-test count.
pub fn m_window(big_n: u64, eta: f64) -> (f64, f64) {
    let nf = big_n as f64;
    let w = nf.powf(-eta);
    ((1.0 - w) * nf / 2.0, (1.0 + w) * nf / 2.0)
}

/// Concentration window for the candidate count `p`:
/// `(1 - k^{-eta}) n (k/n)^{C/2 (1 + k^{-eta})} <= p <= (1 + k^{-eta}) n (k/n)^{C/2 (1 - k^{-eta})}`.
pub fn p_window(n: u64, k: u64, c: f64, eta: f64) -> (f64, f64) {
    let (nf, kf) = (n as f64, k as f64);
    let w = kf.powf(-eta);
    let ratio = kf / nf;
    (
        (1.0 - w) * nf * ratio.powf(c / 2.0 * (1.0 + w)),
        (1.0 + w) * nf * ratio.powf(c / 2.0 * (1.0 - w)),
    )
}

/// A sampled Bernoulli group testing instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GTInstance {
    pub n: u64,
    pub k: u64,
    pub alpha: f64,
    #[serde(rename = "C")]
    pub c: f64,
    pub q: f64,
    #[serde(rename = "N")]
    pub num_tests: u64,
    pub sigma_star: Vec<u64>,
    pub tests: Vec<Vec<u64>>,
    pub outcomes: Vec<bool>,
    pub seed: u64,
}

/// `(alpha, C)`-instance with `k = floor(n^alpha)`.
pub fn sample_instance(n: u64, alpha: f64, c: f64, seed: u64) -> Result<GTInstance> {
    let k = infected_count(n, alpha)?;
    if k == 0 {
        return domain(format!("floor(n^alpha) = 0 for n = {n}, alpha = {alpha}"));
    }
    sample_with(n, k, alpha, c, seed)
}

/// Same law with `k` given directly; `alpha` is recorded as `ln k / ln n`.
pub fn sample_instance_k(n: u64, k: u64, c: f64, seed: u64) -> Result<GTInstance> {
    if k == 0 || k > n || n < 2 {
        return domain(format!("need 1 <= k <= n and n >= 2, got n = {n}, k = {k}"));
    }
    sample_with(n, k, (k as f64).ln() / (n as f64).ln(), c, seed)
}

fn sample_with(n: u64, k: u64, alpha: f64, c: f64, seed: u64) -> Result<GTInstance> {
    check_c(c)?;
    let big_n = num_tests(n, k, c)?;
    let required = (n as u128 * big_n as u128).div_ceil(8);
    if required > MEMORY_BUDGET_BYTES {
        return Err(Error::Memory {
            required_bytes: required,
            budget_bytes: MEMORY_BUDGET_BYTES,
        });
    }
    let q = assignment_prob(k)?;
    let mut rng = stream_rng(seed, Stream::Instance);
    let mut sigma_star: Vec<u64> = rand::seq::index::sample(&mut rng, n as usize, k as usize)
        .into_iter()
        .map(|i| i as u64)
        .collect();
    sigma_star.sort_unstable();

    let mut infected = vec![false; n as usize];
    for &i in &sigma_star {
        infected[i as usize] = true;
    }
    let coin = Bernoulli::new(q).map_err(|e| Error::Domain(e.to_string()))?;
    let mut tests = Vec::with_capacity(big_n as usize);
    let mut outcomes = Vec::with_capacity(big_n as usize);
    for _ in 0..big_n {
        let members: Vec<u64> = (0..n).filter(|_| coin.sample(&mut rng)).collect();
        outcomes.push(members.iter().any(|&i| infected[i as usize]));
        tests.push(members);
    }
    Ok(GTInstance {
        n,
        k,
        alpha,
        c,
        q,
        num_tests: big_n,
        sigma_star,
        tests,
        outcomes,
        seed,
    })
}

impl GTInstance {
    /// Checks every structural invariant, including outcome consistency.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Format(m));
        if self.sigma_star.len() as u64 != self.k {
            return bad(format!("|sigma_star| = {} but k = {}", self.sigma_star.len(), self.k));
        }
        if self.sigma_star.windows(2).any(|w| w[0] >= w[1]) {
            return bad("sigma_star must be strictly increasing".into());
        }
        if self.sigma_star.iter().any(|&i| i >= self.n) {
            return bad("sigma_star index out of range".into());
        }
        if self.tests.len() as u64 != self.num_tests || self.outcomes.len() as u64 != self.num_tests {
            return bad("tests/outcomes length differs from N".into());
        }
        for (j, t) in self.tests.iter().enumerate() {
            if t.windows(2).any(|w| w[0] >= w[1]) || t.iter().any(|&i| i >= self.n) {
                return bad(format!("test {j} is not a sorted index set below n"));
            }
            let hit = t.iter().any(|i| self.sigma_star.binary_search(i).is_ok());
            if hit != self.outcomes[j] {
                return bad(format!("outcome of test {j} is inconsistent with sigma_star"));
            }
        }
        Ok(())
    }

    pub fn positive_count(&self) -> usize {
        self.outcomes.iter().filter(|&&o| o).count()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let inst: Self = serde_json::from_str(s)?;
        inst.validate()?;
        Ok(inst)
    }

    /// Compact binary form.
    ///
    /// Layout, all little-endian: magic `BGT1`; `u64` n, k, N, seed; then N
    /// membership rows of `ceil(n/64)` `u64` words each (bit `i` of a row set
    /// when individual `i` is in the test); then a trailer of the k
    /// `sigma_star` indices as `u64` followed by `alpha` and `C` as `f64`.
    /// `q` and the outcomes are recomputed when reading.
    pub fn to_binary(&self) -> Vec<u8> {
        let words = (self.n as usize).div_ceil(64);
        let mut out = Vec::with_capacity(36 + self.tests.len() * words * 8 + self.sigma_star.len() * 8 + 16);
        out.extend_from_slice(b"BGT1");
        for v in [self.n, self.k, self.num_tests, self.seed] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        let mut row = vec![0u64; words];
        for t in &self.tests {
            row.iter_mut().for_each(|w| *w = 0);
            for &i in t {
                row[i as usize / 64] |= 1 << (i % 64);
            }
            for w in &row {
                out.extend_from_slice(&w.to_le_bytes());
            }
        }
        for &i in &self.sigma_star {
            out.extend_from_slice(&i.to_le_bytes());
        }
        out.extend_from_slice(&self.alpha.to_le_bytes());
        out.extend_from_slice(&self.c.to_le_bytes());
        out
    }

    pub fn from_binary(bytes: &[u8]) -> Result<Self> {
        let mut cur = bytes;
        let mut take = |len: usize| -> Result<&[u8]> {
            if cur.len() < len {
                return Err(Error::Format("truncated BGT1 stream".into()));
            }
            let (head, tail) = cur.split_at(len);
            cur = tail;
            Ok(head)
        };
        if take(4)? != b"BGT1" {
            return Err(Error::Format("bad magic, expected BGT1".into()));
        }
        let mut rd = || -> Result<u64> { Ok(u64::from_le_bytes(take(8)?.try_into().unwrap())) };
        let (n, k, big_n, seed) = (rd()?, rd()?, rd()?, rd()?);
        let words = (n as usize).div_ceil(64);
        let mut tests = Vec::with_capacity(big_n as usize);
        for _ in 0..big_n {
            let mut members = Vec::new();
            for w in 0..words {
                let mut word = rd()?;
                while word != 0 {
                    members.push((w * 64) as u64 + word.trailing_zeros() as u64);
                    word &= word - 1;
                }
            }
            tests.push(members);
        }
        let sigma_star = (0..k).map(|_| rd()).collect::<Result<Vec<_>>>()?;
        let alpha = f64::from_bits(rd()?);
        let c = f64::from_bits(rd()?);
        let outcomes = tests
            .iter()
            .map(|t| t.iter().any(|i| sigma_star.binary_search(i).is_ok()))
            .collect();
        let inst = GTInstance {
            n,
            k,
            alpha,
            c,
            q: assignment_prob(k)?,
            num_tests: big_n,
            sigma_star,
            tests,
            outcomes,
            seed,
        };
        inst.validate()?;
        Ok(inst)
    }
}

/// The COMP-reduced view: `M` positive tests over `p` candidates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrunedInstance {
    pub m: usize,
    pub p: usize,
    pub k: usize,
    /// Original individual index of each candidate, increasing.
    pub candidates: Vec<u64>,
    /// Positive tests each candidate participates in, as a bitset over `0..m`.
    pub coverage: Vec<BitSet>,
    /// Candidate-local indices of the infected individuals, increasing.
    pub sigma_star_local: Vec<usize>,
}

/// Drops every individual that appears in a negative test.
pub fn comp_prune(inst: &GTInstance) -> PrunedInstance {
    let n = inst.n as usize;
    let mut cleared = vec![false; n];
    let mut positives = Vec::new();
    for (t, &pos) in inst.tests.iter().zip(&inst.outcomes) {
        if pos {
            positives.push(t);
        } else {
            for &i in t {
                cleared[i as usize] = true;
            }
        }
    }
    let m = positives.len();
    let candidates: Vec<u64> = (0..inst.n).filter(|&i| !cleared[i as usize]).collect();
    let mut local = vec![usize::MAX; n];
    for (li, &i) in candidates.iter().enumerate() {
        local[i as usize] = li;
    }
    let mut coverage = vec![BitSet::new(m); candidates.len()];
    for (tj, t) in positives.iter().enumerate() {
        for &i in t.iter() {
            let li = local[i as usize];
            if li != usize::MAX {
                coverage[li].insert(tj);
            }
        }
    }
    let sigma_star_local = inst.sigma_star.iter().map(|&i| local[i as usize]).collect();
    PrunedInstance {
        m,
        p: candidates.len(),
        k: inst.k as usize,
        candidates,
        coverage,
        sigma_star_local,
    }
}

impl PrunedInstance {
    /// Builds a pruned view directly from per-candidate positive-test lists.
    pub fn from_coverage(m: usize, coverage: &[Vec<usize>], sigma_star_local: Vec<usize>) -> Result<Self> {
        let p = coverage.len();
        let k = sigma_star_local.len();
        if sigma_star_local.windows(2).any(|w| w[0] >= w[1]) || sigma_star_local.iter().any(|&i| i >= p) {
            return domain("sigma_star_local must be increasing indices below p");
        }
        if coverage.iter().flatten().any(|&t| t >= m) {
            return domain("coverage references a test index >= m");
        }
        Ok(Self {
            m,
            p,
            k,
            candidates: (0..p as u64).collect(),
            coverage: coverage.iter().map(|c| BitSet::from_indices(m, c.iter().copied())).collect(),
            sigma_star_local,
        })
    }

    pub fn planted(&self) -> KSubset {
        KSubset(self.sigma_star_local.clone())
    }

    /// Whether candidate `i` is one of the infected.
    pub fn is_planted(&self, i: usize) -> bool {
        self.sigma_star_local.binary_search(&i).is_ok()
    }

    /// Candidate-local indices outside the planted set.
    pub fn non_planted(&self) -> Vec<usize> {
        (0..self.p).filter(|&i| !self.is_planted(i)).collect()
    }

    /// Positive tests left uncovered by the members `idx`.
    pub fn uncovered_by(&self, idx: &[usize]) -> usize {
        uncovered_count(self.m, idx.iter().map(|&i| &self.coverage[i]))
    }
}

/// A `k`-subset of candidate-local indices, kept sorted.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct KSubset(Vec<usize>);

impl KSubset {
    /// Validates size, bounds and uniqueness; sorts the members.
    pub fn new(mut members: Vec<usize>, k: usize, p: usize) -> Result<Self> {
        members.sort_unstable();
        if members.len() != k {
            return domain(format!("subset has {} members, expected {k}", members.len()));
        }
        if members.windows(2).any(|w| w[0] == w[1]) {
            return domain("subset has duplicate members");
        }
        if members.last().is_some_and(|&i| i >= p) {
            return domain(format!("subset member out of range 0..{p}"));
        }
        Ok(Self(members))
    }

    pub(crate) fn from_sorted(members: Vec<usize>) -> Self {
        debug_assert!(members.windows(2).all(|w| w[0] < w[1]));
        Self(members)
    }

    pub fn members(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.0.binary_search(&i).is_ok()
    }
}

/// Fraction of positive tests not covered by `sigma`.
pub fn hamiltonian(pr: &PrunedInstance, sigma: &KSubset) -> Result<f64> {
    if pr.m == 0 {
        return Err(Error::UndefinedEnergy);
    }
    Ok(pr.uncovered_by(sigma.members()) as f64 / pr.m as f64)
}

/// `|sigma ∩ sigma*|`.
pub fn overlap(sigma: &KSubset, pr: &PrunedInstance) -> usize {
    sigma.members().iter().filter(|&&i| pr.is_planted(i)).count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn assignment_probability() {
        assert_abs_diff_eq!(assignment_prob(1).unwrap(), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(assignment_prob(2).unwrap(), 0.292_893_218_813_452_5, epsilon = 1e-12);
        assert_abs_diff_eq!(assignment_prob(10).unwrap(), 0.066_967_008_463_193_2, epsilon = 1e-12);
        for k in [1u64, 3, 10, 1000] {
            let q = assignment_prob(k).unwrap();
            assert_abs_diff_eq!((1.0 - q).powi(k as i32), 0.5, epsilon = 1e-12);
        }
        assert!(assignment_prob(0).is_err());
    }

    #[test]
    fn test_counts() {
        assert_eq!(num_tests(100, 2, 1.5).unwrap(), 18);
        assert_eq!(num_tests(2, 1, 1.0 + 1e-9).unwrap(), 1);
        // floor(1.2 * log2(263409560461970212832400)) = floor(1.2 * 77.8...)
        assert_eq!(num_tests(1000, 10, 1.2).unwrap(), 93);
        assert!(num_tests(10, 11, 1.5).is_err());
        assert!(num_tests(10, 2, 1.0).is_err());
    }

    #[test]
    fn scales() {
        let (m, p) = deterministic_scales(100, 2, 1.5).unwrap();
        assert_eq!(m, 9.0);
        assert_abs_diff_eq!(p, 100.0 * 0.02f64.powf(0.75) + 2.0, epsilon = 1e-12);
        let n = 1_000_000u64;
        let k = infected_count(n, 0.01).unwrap();
        let (_, p) = deterministic_scales(n, k, 1.2).unwrap();
        assert!(p.is_finite() && p > k as f64);
        assert!(deterministic_scales(5, 5, 1.5).is_err());
    }

    #[test]
    fn sampling_invariants() {
        let inst = sample_instance(10, 0.35, 1.5, 7).unwrap();
        assert_eq!(inst.k, 2);
        assert_eq!(inst.num_tests, num_tests(10, 2, 1.5).unwrap());
        inst.validate().unwrap();
        let again = sample_instance(10, 0.35, 1.5, 7).unwrap();
        assert_eq!(inst, again);
        assert_eq!(inst.to_binary(), again.to_binary());
        assert!(sample_instance(10, 0.35, 2.0, 7).is_err());
        assert!(sample_instance(10, 0.35, 2.5, 7).is_err());
        assert!(sample_instance(10, 0.001, 1.5, 7).is_ok());
    }

    #[test]
    fn memory_budget_is_reported() {
        match sample_instance_k(1 << 40, 2, 1.5, 0) {
            Err(Error::Memory { required_bytes, .. }) => assert!(required_bytes > MEMORY_BUDGET_BYTES),
            other => panic!("expected memory error, got {other:?}"),
        }
    }

    fn handmade() -> GTInstance {
        // individuals 0..6, infected {0, 5}
        let tests = vec![vec![3, 4], vec![0, 1], vec![2, 5], vec![1, 2, 6], vec![], vec![0, 3, 5]];
        let sigma_star = vec![0, 5];
        let outcomes = tests.iter().map(|t: &Vec<u64>| t.iter().any(|i| sigma_star.contains(i))).collect();
        GTInstance {
            n: 7,
            k: 2,
            alpha: 0.35,
            c: 1.5,
            q: assignment_prob(2).unwrap(),
            num_tests: 6,
            sigma_star,
            tests,
            outcomes,
            seed: 0,
        }
    }

    #[test]
    fn comp_removes_negative_participants() {
        let inst = handmade();
        inst.validate().unwrap();
        let pr = comp_prune(&inst);
        // tests 0 and 3 and 4 are negative: 1, 2, 3, 4, 6 are cleared
        assert_eq!(pr.candidates, vec![0, 5]);
        assert_eq!(pr.m, 3);
        assert_eq!(pr.sigma_star_local, vec![0, 1]);
        assert_eq!(hamiltonian(&pr, &pr.planted()).unwrap(), 0.0);
        assert_eq!(overlap(&pr.planted(), &pr), 2);
    }

    #[test]
    fn energy_edge_cases() {
        let pr = PrunedInstance::from_coverage(3, &[vec![0, 1], vec![2], vec![], vec![]], vec![0, 1]).unwrap();
        let empty_cover = KSubset::new(vec![2, 3], 2, 4).unwrap();
        assert_eq!(hamiltonian(&pr, &empty_cover).unwrap(), 1.0);
        assert_eq!(overlap(&empty_cover, &pr), 0);
        let none = PrunedInstance::from_coverage(0, &[vec![], vec![]], vec![0]).unwrap();
        let s = KSubset::new(vec![1], 1, 2).unwrap();
        assert!(matches!(hamiltonian(&none, &s), Err(Error::UndefinedEnergy)));
    }

    #[test]
    fn ksubset_validation() {
        assert!(KSubset::new(vec![3, 1], 2, 4).is_ok());
        assert!(KSubset::new(vec![1, 1], 2, 4).is_err());
        assert!(KSubset::new(vec![1, 4], 2, 4).is_err());
        assert!(KSubset::new(vec![1], 2, 4).is_err());
    }

    #[test]
    fn formats_roundtrip_and_reject_garbage() {
        let inst = sample_instance(70, 0.4, 1.3, 11).unwrap();
        let back = GTInstance::from_binary(&inst.to_binary()).unwrap();
        assert_eq!(back, inst);
        let back = GTInstance::from_json(&inst.to_json().unwrap()).unwrap();
        assert_eq!(back, inst);
        assert!(GTInstance::from_binary(b"BGT0xxxxxxxx").is_err());
        let bin = inst.to_binary();
        assert!(GTInstance::from_binary(&bin[..bin.len() - 3]).is_err());
        let mut bad = inst.clone();
        bad.outcomes[0] = !bad.outcomes[0];
        assert!(GTInstance::from_json(&bad.to_json().unwrap()).is_err());
    }

    #[test]
    fn json_field_names() {
        let v: serde_json::Value = serde_json::from_str(&handmade().to_json().unwrap()).unwrap();
        for key in ["n", "k", "alpha", "C", "q", "N", "sigma_star", "tests", "outcomes", "seed"] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
    }
}
