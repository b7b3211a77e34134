//! Random MAX k-set cover: sampling, exact and greedy `Phi_k`, the limit
//! formula and the flatness machinery used by the second moment argument.

use rand::distributions::{Bernoulli, Distribution};
use serde::{Deserialize, Serialize};
use std::f64::consts::LN_2;

use crate::bitset::BitSet;
use crate::combin::binom_u128;
use crate::error::{domain, Error, Result};
use crate::mathcore::{h_c, log_binom};
use crate::model::{assignment_prob, deterministic_scales, infected_count, num_tests};
use crate::rng::{stream_rng, Stream};

/// Largest number of `k`-subsets enumerated by the exact routines.
pub const COVER_ENUMERATION_CAP: u128 = 20_000_000;
/// Largest `k` for which every sub-subset is checked by `is_flat`.
pub const FLAT_MAX_K: usize = 20;
/// Corner width used by `corner_bounds`.
pub const CORNER_DELTA: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverInstance {
    /// `P`, number of elements.
    pub universe_size: usize,
    /// `M`, number of random sets.
    pub num_sets: usize,
    pub k: usize,
    pub q: f64,
    /// Each set as a bitset over the universe.
    pub sets: Vec<BitSet>,
    /// For each element, the sets containing it, as a bitset over `0..M`.
    pub element_sets: Vec<BitSet>,
    pub seed: u64,
}

impl CoverInstance {
    /// Builds an instance from explicit sets (element lists).
    pub fn from_sets(universe_size: usize, k: usize, sets: &[Vec<usize>]) -> Result<Self> {
        if k == 0 || k > universe_size {
            return domain(format!("need 1 <= k <= P, got k = {k}, P = {universe_size}"));
        }
        if sets.iter().flatten().any(|&e| e >= universe_size) {
            return domain("set element out of range");
        }
        let m = sets.len();
        let bits: Vec<BitSet> = sets
            .iter()
            .map(|s| BitSet::from_indices(universe_size, s.iter().copied()))
            .collect();
        let mut element_sets = vec![BitSet::new(m); universe_size];
        for (j, s) in sets.iter().enumerate() {
            for &e in s {
                element_sets[e].insert(j);
            }
        }
        Ok(Self {
            universe_size,
            num_sets: m,
            k,
            q: assignment_prob(k as u64)?,
            sets: bits,
            element_sets,
            seed: 0,
        })
    }

    /// Sets left uncovered by the elements `sigma`.
    pub fn uncovered_by(&self, sigma: &[usize]) -> usize {
        let mut acc = BitSet::new(self.num_sets);
        for &e in sigma {
            acc.union_with(&self.element_sets[e]);
        }
        self.num_sets - acc.count_ones()
    }

    pub fn covered_fraction(&self, sigma: &[usize]) -> f64 {
        (self.num_sets - self.uncovered_by(sigma)) as f64 / self.num_sets as f64
    }
}

/// `M` sets over `P` elements, each element in each set with `q = 1 - 2^{-1/k}`.
pub fn sample_cover(universe_size: usize, num_sets: usize, k: usize, seed: u64) -> Result<CoverInstance> {
    if universe_size == 0 || num_sets == 0 || k == 0 || k > universe_size {
        return domain("need P, M, k >= 1 and k <= P");
    }
    let q = assignment_prob(k as u64)?;
    let coin = Bernoulli::new(q).map_err(|e| Error::Domain(e.to_string()))?;
    let mut rng = stream_rng(seed, Stream::Cover);
    let sets: Vec<Vec<usize>> = (0..num_sets)
        .map(|_| (0..universe_size).filter(|_| coin.sample(&mut rng)).collect())
        .collect();
    let mut inst = CoverInstance::from_sets(universe_size, k, &sets)?;
    inst.seed = seed;
    Ok(inst)
}

/// `(P, M, k)` for a standalone cover run matched to `(n, alpha, C)`:
/// `k = floor(n^alpha)`, `M = round(N/2)`, `P = round(p_det) - k`.
pub fn cover_dims(n: u64, alpha: f64, c: f64) -> Result<(usize, usize, usize)> {
    let k = infected_count(n, alpha)?;
    if k == 0 {
        return domain(format!("floor(n^alpha) = 0 for n = {n}, alpha = {alpha}"));
    }
    let (m, p) = deterministic_scales(n, k, c)?;
    Ok(((p.round() as u64 - k) as usize, m.round() as usize, k as usize))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverOpt {
    pub phi: f64,
    pub covered: usize,
    pub witness: Vec<usize>,
}

/// Exact `Phi_k`: the best covered fraction over all `k`-subsets.
pub fn phi_k_exact(inst: &CoverInstance) -> Result<CoverOpt> {
    let count = binom_u128(inst.universe_size as u64, inst.k as u64);
    if count > COVER_ENUMERATION_CAP {
        return Err(Error::CapExceeded {
            what: "cover k-subsets",
            required: count,
            cap: COVER_ENUMERATION_CAP,
        });
    }
    let (k, m) = (inst.k, inst.num_sets);
    // depth-first over increasing element choices with a stack of partial unions
    let mut stack = vec![BitSet::new(m); k + 1];
    let mut chosen = vec![0usize; k];
    let mut best = (0usize, (0..k).collect::<Vec<_>>());
    fn dfs(
        inst: &CoverInstance,
        depth: usize,
        start: usize,
        stack: &mut [BitSet],
        chosen: &mut [usize],
        best: &mut (usize, Vec<usize>),
    ) {
        let (p, k) = (inst.universe_size, inst.k);
        if depth == k {
            let c = stack[k].count_ones();
            if c > best.0 {
                *best = (c, chosen.to_vec());
            }
            return;
        }
        for e in start..=(p - (k - depth)) {
            let (lo, hi) = stack.split_at_mut(depth + 1);
            hi[0].clone_from(&lo[depth]);
            hi[0].union_with(&inst.element_sets[e]);
            chosen[depth] = e;
            dfs(inst, depth + 1, e + 1, stack, chosen, best);
            if best.0 == inst.num_sets {
                return;
            }
        }
    }
    dfs(inst, 0, 0, &mut stack, &mut chosen, &mut best);
    Ok(CoverOpt {
        phi: best.0 as f64 / m as f64,
        covered: best.0,
        witness: best.1,
    })
}

/// Greedy max coverage: `k` picks, each maximising newly covered sets (lowest index on ties).
pub fn phi_k_greedy(inst: &CoverInstance) -> CoverOpt {
    let m = inst.num_sets;
    let mut acc = BitSet::new(m);
    let mut picked = Vec::with_capacity(inst.k);
    for _ in 0..inst.k {
        let mut best: Option<(usize, usize)> = None;
        for e in (0..inst.universe_size).filter(|e| !picked.contains(e)) {
            let mut u = acc.clone();
            u.union_with(&inst.element_sets[e]);
            let c = u.count_ones();
            if best.is_none_or(|(bc, _)| c > bc) {
                best = Some((c, e));
            }
        }
        let (_, e) = best.expect("k <= P leaves a candidate");
        acc.union_with(&inst.element_sets[e]);
        picked.push(e);
    }
    picked.sort_unstable();
    let covered = acc.count_ones();
    CoverOpt {
        phi: covered as f64 / m as f64,
        covered,
        witness: picked,
    }
}

/// Mean covered fraction of `trials` uniform random `k`-subsets.
pub fn random_guess_mean(inst: &CoverInstance, trials: usize, seed: u64) -> f64 {
    let mut rng = stream_rng(seed, Stream::Baseline);
    let total: f64 = (0..trials)
        .map(|_| {
            let s = rand::seq::index::sample(&mut rng, inst.universe_size, inst.k).into_vec();
            inst.covered_fraction(&s)
        })
        .sum();
    total / trials.max(1) as f64
}

/// Limit of `Phi_k`: `1 - H_C`.
pub fn phi_k_limit(c: f64) -> Result<f64> {
    Ok(1.0 - h_c(c)?)
}

/// `p_l = 2^{1 - l/k} - 1` and `y_(l) = y + p_l (1 - y)`.
pub fn subset_props(k: usize, l: usize, y: f64) -> Result<(f64, f64)> {
    if k == 0 || l > k {
        return domain(format!("need 0 <= l <= k, k >= 1, got l = {l}, k = {k}"));
    }
    if !(y > 0.0 && y < 0.5) {
        return domain(format!("y = {y} is outside (0, 1/2)"));
    }
    let p_l = ((1.0 - l as f64 / k as f64) * LN_2).exp_m1();
    Ok((p_l, y + p_l * (1.0 - y)))
}

/// `D_l = sqrt(6 p_l (1-p_l) (1-y) M [ln C(k,l) + (1 + c_dl) ln k])`.
pub fn flat_radius(k: usize, l: usize, y: f64, m: f64, c_dl: f64) -> Result<f64> {
    if !(c_dl >= 0.0) || !(m >= 0.0) {
        return domain("need c_dl >= 0 and M >= 0");
    }
    let (p_l, _) = subset_props(k, l, y)?;
    let bracket = log_binom(k as u64, l as u64)? + (1.0 + c_dl) * (k as f64).ln();
    Ok((6.0 * p_l * (1.0 - p_l) * (1.0 - y) * m * bracket).max(0.0).sqrt())
}

const FLAT_SLACK: f64 = 1e-9;

/// Whether every sub-subset `sigma_l` of `sigma` leaves an uncovered count
/// within `M y_(l) +- D_l`.
pub fn is_flat(inst: &CoverInstance, sigma: &[usize], y: f64, c_dl: f64) -> Result<bool> {
    let k = sigma.len();
    if k != inst.k {
        return domain(format!("sigma has {k} elements, expected k = {}", inst.k));
    }
    if k > FLAT_MAX_K {
        return Err(Error::CapExceeded {
            what: "flatness sub-subsets (2^k)",
            required: 1u128 << k,
            cap: 1u128 << FLAT_MAX_K,
        });
    }
    let m = inst.num_sets as f64;
    let windows: Vec<(f64, f64)> = (0..=k)
        .map(|l| {
            let (_, y_l) = subset_props(k, l, y)?;
            let d = flat_radius(k, l, y, m, c_dl)?;
            Ok((m * y_l - d - FLAT_SLACK, m * y_l + d + FLAT_SLACK))
        })
        .collect::<Result<_>>()?;
    let mut stack = vec![BitSet::new(inst.num_sets); k + 1];
    fn walk(inst: &CoverInstance, sigma: &[usize], i: usize, l: usize, stack: &mut [BitSet], win: &[(f64, f64)]) -> bool {
        if i == sigma.len() {
            let u = (inst.num_sets - stack[l].count_ones()) as f64;
            return u >= win[l].0 && u <= win[l].1;
        }
        // without sigma[i]
        if !walk(inst, sigma, i + 1, l, stack, win) {
            return false;
        }
        let (lo, hi) = stack.split_at_mut(l + 1);
        hi[0].clone_from(&lo[l]);
        hi[0].union_with(&inst.element_sets[sigma[i]]);
        walk(inst, sigma, i + 1, l + 1, stack, win)
    }
    Ok(walk(inst, sigma, 0, 0, &mut stack, &windows))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlatCount {
    /// `round(y M)`, the exact uncovered count the count conditions on.
    pub t: usize,
    /// The `y` actually used, `t / M`.
    pub y_used: f64,
    /// Flat `k`-subsets with exactly `t` uncovered (`Y_y`).
    pub flat: u64,
    /// All `k`-subsets with exactly `t` uncovered.
    pub exact: u64,
    /// All `k`-subsets with at most `t` uncovered.
    pub at_most: u64,
}

/// Counts `Y_y` alongside the unconditioned counts; `yM` is rounded to the nearest integer.
pub fn count_flat(inst: &CoverInstance, y: f64, c_dl: f64) -> Result<FlatCount> {
    let count = binom_u128(inst.universe_size as u64, inst.k as u64);
    if count > COVER_ENUMERATION_CAP {
        return Err(Error::CapExceeded {
            what: "cover k-subsets",
            required: count,
            cap: COVER_ENUMERATION_CAP,
        });
    }
    let t = (y * inst.num_sets as f64).round() as usize;
    let y_used = t as f64 / inst.num_sets as f64;
    if !(y_used > 0.0 && y_used < 0.5) {
        return domain(format!("rounded y = {t}/{} is outside (0, 1/2)", inst.num_sets));
    }
    let mut out = FlatCount {
        t,
        y_used,
        flat: 0,
        exact: 0,
        at_most: 0,
    };
    let mut err = None;
    crate::combin::for_each_combination(inst.universe_size, inst.k, |s| {
        let u = inst.uncovered_by(s);
        if u <= t {
            out.at_most += 1;
        }
        if u == t {
            out.exact += 1;
            match is_flat(inst, s, y_used, c_dl) {
                Ok(true) => out.flat += 1,
                Ok(false) => {}
                Err(e) => err = Some(e),
            }
        }
    });
    match err {
        Some(e) => Err(e),
        None => Ok(out),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CornerRow {
    pub l: usize,
    pub x: f64,
    pub d_over_m: f64,
    /// `7 ln2 sqrt(alpha/(1-alpha)) l/k`.
    pub low_bound: f64,
    /// `5 ln2 sqrt(alpha/(1-alpha)) (1 - l/k)`.
    pub high_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CornerReport {
    pub n: u64,
    pub k: usize,
    #[serde(rename = "M")]
    pub m: f64,
    pub delta: f64,
    pub rows: Vec<CornerRow>,
    pub max_d_over_m: f64,
    /// `10 / sqrt(ln n)`.
    pub mid_bound: f64,
    pub low_ok: bool,
    pub high_ok: bool,
    pub mid_ok: bool,
}

/// Radii `D_l / M` on the surrogate `M = N/2` against the corner and uniform bounds.
pub fn corner_bounds(n: u64, alpha: f64, c: f64, y: f64, c_dl: f64, delta: f64) -> Result<CornerReport> {
    let k = infected_count(n, alpha)? as usize;
    if k < 2 {
        return domain(format!("floor(n^alpha) = {k}; need k >= 2"));
    }
    let m = num_tests(n, k as u64, c)? as f64 / 2.0;
    let sq = (alpha / (1.0 - alpha)).sqrt();
    let rows: Vec<CornerRow> = (0..=k)
        .map(|l| {
            let x = l as f64 / k as f64;
            Ok(CornerRow {
                l,
                x,
                d_over_m: flat_radius(k, l, y, m, c_dl)? / m,
                low_bound: 7.0 * LN_2 * sq * x,
                high_bound: 5.0 * LN_2 * sq * (1.0 - x),
            })
        })
        .collect::<Result<_>>()?;
    let max_d_over_m = rows.iter().skip(1).map(|r| r.d_over_m).fold(0.0, f64::max);
    let mid_bound = 10.0 / (n as f64).ln().sqrt();
    Ok(CornerReport {
        n,
        k,
        m,
        delta,
        low_ok: rows.iter().filter(|r| r.x <= delta).all(|r| r.d_over_m <= r.low_bound),
        high_ok: rows.iter().filter(|r| r.x >= 1.0 - delta).all(|r| r.d_over_m <= r.high_bound),
        mid_ok: max_d_over_m <= mid_bound,
        rows,
        max_d_over_m,
        mid_bound,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverReport {
    #[serde(rename = "P")]
    pub universe_size: usize,
    #[serde(rename = "M")]
    pub num_sets: usize,
    pub k: usize,
    pub q: f64,
    pub seed: u64,
    pub phi_exact: Option<f64>,
    pub phi_greedy: f64,
    pub phi_random_mean: f64,
    #[serde(rename = "phi_limit")]
    pub phi_limit: Option<f64>,
    pub witness: Option<Vec<usize>>,
}

/// Exact (when under the cap), greedy and random-guess values for one instance.
pub fn cover_report(inst: &CoverInstance, c: Option<f64>, random_trials: usize) -> Result<CoverReport> {
    let exact = match phi_k_exact(inst) {
        Ok(v) => Some(v),
        Err(Error::CapExceeded { .. }) => None,
        Err(e) => return Err(e),
    };
    Ok(CoverReport {
        universe_size: inst.universe_size,
        num_sets: inst.num_sets,
        k: inst.k,
        q: inst.q,
        seed: inst.seed,
        phi_greedy: phi_k_greedy(inst).phi,
        phi_random_mean: random_guess_mean(inst, random_trials, inst.seed),
        phi_limit: c.map(phi_k_limit).transpose()?,
        phi_exact: exact.as_ref().map(|e| e.phi),
        witness: exact.map(|e| e.witness),
    })
}
