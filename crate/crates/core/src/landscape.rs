//! Exact landscape at desk scale: `Z_{t,l}` counts, `phi(l)` curves and
//! bottleneck overlap-gap detection.

use serde::{Deserialize, Serialize};
use std::io::Write;

use crate::bitset::BitSet;
use crate::combin::{binom_u128, for_each_combination};
use crate::error::{domain, Error, Result};
use crate::model::{KSubset, PrunedInstance};
use crate::report::fmt12;

/// Largest overlap stratum `C(k,l) C(p-k,k-l)` enumerated by default.
pub const STRATUM_CAP: u128 = 20_000_000;

/// Integer overlap for a fraction: `floor(zeta k)`, guarded against `l/k * k` rounding below `l`.
pub fn overlap_index(zeta: f64, k: usize) -> usize {
    (zeta * k as f64 + 1e-9).floor() as usize
}

/// Histogram of uncovered counts over one overlap stratum.
#[derive(Debug, Clone, PartialEq)]
pub struct Stratum {
    pub l: usize,
    /// `hist[u]` = number of subsets in the stratum leaving `u` tests uncovered.
    pub hist: Vec<u64>,
    /// One subset attaining the minimum, if the stratum is non-empty.
    pub argmin: Option<KSubset>,
}

impl Stratum {
    pub fn size(&self) -> u64 {
        self.hist.iter().sum()
    }

    /// `Z_{t,l}`.
    pub fn count_at_most(&self, t: usize) -> u64 {
        self.hist.iter().take(t + 1).sum()
    }

    pub fn min_uncovered(&self) -> Option<usize> {
        self.hist.iter().position(|&c| c > 0)
    }
}

fn stratum_size(pr: &PrunedInstance, l: usize) -> u128 {
    let k = pr.k as u64;
    binom_u128(k, l as u64).saturating_mul(binom_u128((pr.p - pr.k) as u64, k - l as u64))
}

/// Enumerates the overlap-`l` stratum: `l` planted members, `k - l` others.
pub fn stratum(pr: &PrunedInstance, l: usize, cap: u128) -> Result<Stratum> {
    if l > pr.k {
        return domain(format!("overlap {l} exceeds k = {}", pr.k));
    }
    let size = stratum_size(pr, l);
    if size > cap {
        return Err(Error::CapExceeded {
            what: "overlap stratum",
            required: size,
            cap,
        });
    }
    let planted = &pr.sigma_star_local;
    let others = pr.non_planted();
    let mut hist = vec![0u64; pr.m + 1];
    let mut best: Option<(usize, Vec<usize>)> = None;
    let mut acc = BitSet::new(pr.m);
    for_each_combination(planted.len(), l, |a| {
        let mut base = BitSet::new(pr.m);
        for &i in a {
            base.union_with(&pr.coverage[planted[i]]);
        }
        for_each_combination(others.len(), pr.k - l, |b| {
            acc.clone_from(&base);
            for &j in b {
                acc.union_with(&pr.coverage[others[j]]);
            }
            let u = pr.m - acc.count_ones();
            hist[u] += 1;
            if best.as_ref().is_none_or(|(bu, _)| u < *bu) {
                let mut s: Vec<usize> = a.iter().map(|&i| planted[i]).chain(b.iter().map(|&j| others[j])).collect();
                s.sort_unstable();
                best = Some((u, s));
            }
        });
    });
    Ok(Stratum {
        l,
        hist,
        argmin: best.map(|(_, s)| KSubset::new(s, pr.k, pr.p).expect("stratum member is a k-subset")),
    })
}

/// All strata `l = 0..=k`, possibly in parallel; ordered by `l`.
pub fn all_strata(pr: &PrunedInstance, cap: u128) -> Result<Vec<Stratum>> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..=pr.k).into_par_iter().map(|l| stratum(pr, l, cap)).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..=pr.k).map(|l| stratum(pr, l, cap)).collect()
    }
}

/// Number of `k`-subsets with overlap `l` leaving at most `t` positive tests uncovered.
pub fn count_z(pr: &PrunedInstance, t: usize, l: usize) -> Result<u64> {
    if t > pr.m {
        return domain(format!("t = {t} exceeds M = {}", pr.m));
    }
    Ok(stratum(pr, l, STRATUM_CAP)?.count_at_most(t))
}

/// `phi(l)`, the least energy in the overlap-`l` stratum, by direct minimisation.
/// `None` when the stratum is empty (fewer than `k - l` non-planted candidates).
pub fn phi(pr: &PrunedInstance, l: usize) -> Result<Option<f64>> {
    if pr.m == 0 {
        return Err(Error::UndefinedEnergy);
    }
    let s = stratum(pr, l, STRATUM_CAP)?;
    Ok(s.min_uncovered().map(|u| u as f64 / pr.m as f64))
}

/// `phi(l)` as `min { t / M : Z_{t,l} >= 1 }`, by bisection on `t`.
pub fn phi_by_threshold(pr: &PrunedInstance, l: usize) -> Result<Option<f64>> {
    if pr.m == 0 {
        return Err(Error::UndefinedEnergy);
    }
    let s = stratum(pr, l, STRATUM_CAP)?;
    if s.count_at_most(pr.m) == 0 {
        return Ok(None);
    }
    let (mut lo, mut hi) = (0usize, pr.m);
    while lo < hi {
        let mid = (lo + hi) / 2;
        if s.count_at_most(mid) >= 1 {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    Ok(Some(lo as f64 / pr.m as f64))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhiCurve {
    pub k: usize,
    pub m: usize,
    pub l_values: Vec<usize>,
    /// `NaN` (serialised as `null`) for empty strata.
    pub phi: Vec<f64>,
    pub argmin_witness: Vec<Option<KSubset>>,
}

impl PhiCurve {
    /// Curve from explicit values, without witnesses.
    pub fn from_values(phi: Vec<f64>, m: usize) -> Result<Self> {
        if phi.is_empty() {
            return domain("phi curve needs at least one point");
        }
        if phi.iter().any(|v| !v.is_nan() && !(0.0..=1.0).contains(v)) {
            return domain("phi values must lie in [0, 1]");
        }
        let k = phi.len() - 1;
        Ok(Self {
            k,
            m,
            l_values: (0..=k).collect(),
            argmin_witness: vec![None; k + 1],
            phi,
        })
    }

    /// Writes `l,x,phi,phiM_int` rows.
    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "l,x,phi,phiM_int")?;
        for (&l, &v) in self.l_values.iter().zip(&self.phi) {
            let x = l as f64 / self.k.max(1) as f64;
            if v.is_nan() {
                writeln!(w, "{l},{},,", fmt12(x))?;
            } else {
                writeln!(w, "{l},{},{},{}", fmt12(x), fmt12(v), (v * self.m as f64).round() as u64)?;
            }
        }
        Ok(())
    }
}

/// The whole curve `phi(0..=k)` with a minimising witness per overlap.
pub fn phi_curve(pr: &PrunedInstance) -> Result<PhiCurve> {
    phi_curve_with_cap(pr, STRATUM_CAP)
}

pub fn phi_curve_with_cap(pr: &PrunedInstance, cap: u128) -> Result<PhiCurve> {
    if pr.m == 0 {
        return Err(Error::UndefinedEnergy);
    }
    let strata = all_strata(pr, cap)?;
    Ok(PhiCurve {
        k: pr.k,
        m: pr.m,
        l_values: (0..=pr.k).collect(),
        phi: strata
            .iter()
            .map(|s| s.min_uncovered().map_or(f64::NAN, |u| u as f64 / pr.m as f64))
            .collect(),
        argmin_witness: strata.into_iter().map(|s| s.argmin).collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BOGPReport {
    pub holds: bool,
    pub zeta1: f64,
    pub zeta2: f64,
    pub r: f64,
    pub delta: f64,
    /// Least energy at overlap `<= floor(zeta1 k)`.
    pub low_side: f64,
    /// Least energy at overlap `>= floor(zeta2 k)`.
    pub high_side: f64,
    /// Least energy strictly between the two overlaps (`NaN` if that window is empty).
    pub barrier: f64,
    pub witnesses: Option<(KSubset, KSubset)>,
}

fn min_over(curve: &PhiCurve, ls: impl Iterator<Item = usize>) -> (f64, Option<usize>) {
    ls.filter(|&l| !curve.phi[l].is_nan())
        .fold((f64::INFINITY, None), |(m, arg), l| {
            if curve.phi[l] < m {
                (curve.phi[l], Some(l))
            } else {
                (m, arg)
            }
        })
}

/// Checks the bottleneck overlap-gap conditions for `(zeta1, zeta2, r, delta)`.
///
/// With `l1 = floor(zeta1 k)` and `l2 = floor(zeta2 k)`: some overlap `<= l1`
/// and some overlap `>= l2` reach energy below `r`, and every overlap strictly
/// between them has energy at least `r + delta`. The open window keeps the
/// endpoint overlaps, which carry the low-energy witnesses, out of the barrier;
/// an empty window never counts as a gap.
pub fn detect_bogp(curve: &PhiCurve, zeta1: f64, zeta2: f64, r: f64, delta: f64) -> Result<BOGPReport> {
    if !(zeta1 < zeta2) || zeta1 < 0.0 || zeta2 > 1.0 {
        return domain(format!("need 0 <= zeta1 < zeta2 <= 1, got {zeta1}, {zeta2}"));
    }
    let k = curve.k;
    let (l1, l2) = (overlap_index(zeta1, k), overlap_index(zeta2, k));
    let (low, arg_low) = min_over(curve, 0..=l1);
    let (high, arg_high) = min_over(curve, l2..=k);
    let (barrier, _) = min_over(curve, (l1 + 1)..l2);
    let window = l2 > l1 + 1 && barrier.is_finite();
    let holds = low < r && high < r && window && barrier >= r + delta && delta > 0.0;
    let witnesses = match (holds, arg_low, arg_high) {
        (true, Some(a), Some(b)) => curve.argmin_witness[a].clone().zip(curve.argmin_witness[b].clone()),
        _ => None,
    };
    Ok(BOGPReport {
        holds,
        zeta1,
        zeta2,
        r,
        delta,
        low_side: low,
        high_side: high,
        barrier: if window { barrier } else { f64::NAN },
        witnesses,
    })
}

/// Searches overlap pairs `l1 < l2 - 1` for the widest gap
/// `min_{l1<l<l2} phi - max(min_{l<=l1} phi, min_{l>=l2} phi)`.
/// Returns `(zeta1, zeta2, r, delta)` with `r` and `r + delta` strictly inside
/// the best gap, or `None` when no positive gap exists.
pub fn search_bogp(curve: &PhiCurve) -> Option<(f64, f64, f64, f64)> {
    let k = curve.k;
    let mut best: Option<(f64, usize, usize, f64)> = None;
    for l1 in 0..=k {
        let (low, _) = min_over(curve, 0..=l1);
        for l2 in (l1 + 2)..=k {
            let (high, _) = min_over(curve, l2..=k);
            let (barrier, _) = min_over(curve, (l1 + 1)..l2);
            let base = low.max(high);
            let gap = barrier - base;
            if base.is_finite() && barrier.is_finite() && gap > 0.0 && best.is_none_or(|b| gap > b.0) {
                best = Some((gap, l1, l2, base));
            }
        }
    }
    best.map(|(gap, l1, l2, base)| {
        let kf = k as f64;
        (l1 as f64 / kf, l2 as f64 / kf, base + gap / 4.0, gap / 2.0)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::combin::combinations;
    use crate::model::{comp_prune, sample_instance_k};

    fn inst(seed: u64) -> PrunedInstance {
        comp_prune(&sample_instance_k(40, 3, 1.3, seed).unwrap())
    }

    #[test]
    fn strata_match_brute_force() {
        for seed in 0..5 {
            let pr = inst(seed);
            if pr.m == 0 || pr.p > 14 {
                continue;
            }
            let all = combinations(pr.p, pr.k);
            for l in 0..=pr.k {
                let s = stratum(&pr, l, STRATUM_CAP).unwrap();
                for t in 0..=pr.m {
                    let naive = all
                        .iter()
                        .filter(|c| c.iter().filter(|&&i| pr.is_planted(i)).count() == l && pr.uncovered_by(c) <= t)
                        .count() as u64;
                    assert_eq!(s.count_at_most(t), naive);
                }
            }
        }
    }

    #[test]
    fn counting_identities() {
        let pr = inst(3);
        let total: u64 = (0..=pr.k).map(|l| count_z(&pr, pr.m, l).unwrap()).sum();
        assert_eq!(total as u128, binom_u128(pr.p as u64, pr.k as u64));
        assert_eq!(count_z(&pr, 0, pr.k).unwrap(), 1);
        assert_eq!(phi(&pr, pr.k).unwrap(), Some(0.0));
        for l in 0..=pr.k {
            assert_eq!(phi(&pr, l).unwrap(), phi_by_threshold(&pr, l).unwrap());
        }
    }

    #[test]
    fn cap_is_reported() {
        let pr = inst(1);
        match stratum(&pr, 0, 1) {
            Err(Error::CapExceeded { required, .. }) => assert!(required > 1),
            other => panic!("expected cap error, got {other:?}"),
        }
    }

    #[test]
    fn synthetic_gap() {
        let c = PhiCurve::from_values(vec![0.1, 0.4, 0.4, 0.0], 10).unwrap();
        let rep = detect_bogp(&c, 0.0, 1.0, 0.15, 0.2).unwrap();
        assert!(rep.holds);
        let (z1, z2, r, d) = search_bogp(&c).unwrap();
        assert!(detect_bogp(&c, z1, z2, r, d).unwrap().holds);
        assert!(detect_bogp(&c, 0.5, 0.2, 0.1, 0.1).is_err());
    }

    #[test]
    fn monotone_curve_has_no_gap() {
        let c = PhiCurve::from_values(vec![0.5, 0.4, 0.3, 0.1, 0.0], 10).unwrap();
        assert_eq!(search_bogp(&c), None);
    }

    #[test]
    fn csv_columns() {
        let c = PhiCurve::from_values(vec![0.25, 0.5, 0.0], 4).unwrap();
        let mut buf = Vec::new();
        c.write_csv(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert_eq!(s.lines().next(), Some("l,x,phi,phiM_int"));
        assert_eq!(s.lines().nth(2), Some("1,0.5,0.5,2"));
    }
}
