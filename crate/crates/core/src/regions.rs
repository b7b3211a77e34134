//! The `(alpha, C)` parameter region: the conditioning constant `a_inf`,
//! the three assumption checks, and the critical constant `C*`.

use serde::{Deserialize, Serialize};
use std::f64::consts::LN_2;
use std::io::Write;

use crate::error::{domain, Error, Result};
use crate::mathcore::{binary_entropy, h_c, kl_div};
use crate::report::fmt12;

pub const A_INF_TOL: f64 = 1e-12;
pub const CRITICAL_C_TOL: f64 = 1e-8;
/// Offset added to `a_inf` so that the strict inequality defining the set holds.
pub const A_OFFSET: f64 = 1e-9;

fn ratio(alpha: f64) -> f64 {
    alpha / (1.0 - alpha)
}

/// Infimum of `{a : ln2 C (a ln a - a + 1) > alpha/(1-alpha)}`.
pub fn a_inf(alpha: f64, c: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&alpha) {
        return domain(format!("alpha = {alpha} is outside [0, 1)"));
    }
    if !(c > 1.0) || !c.is_finite() {
        return domain(format!("C = {c} must exceed 1"));
    }
    let target = ratio(alpha);
    if target == 0.0 {
        return Ok(1.0);
    }
    // zero at a = 1 and increasing beyond
    let f = |a: f64| LN_2 * c * (a * a.ln() - a + 1.0) - target;
    let (mut lo, mut hi) = (1.0, 2.0);
    while f(hi) < 0.0 {
        lo = hi;
        hi *= 2.0;
    }
    while hi - lo > A_INF_TOL {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// `D(1 - a/(2(1-c_r)) || 1/2) <= (1-c_i)(2-C)/C ln2` and `a/(2(1-c_r)) < 1`.
pub fn check_fmf_exists(c: f64, a: f64, c_r: f64, c_i: f64) -> bool {
    let w = a / (2.0 * (1.0 - c_r));
    if !(w < 1.0) {
        return false;
    }
    match kl_div(1.0 - w, 0.5) {
        Ok(d) => d <= (1.0 - c_i) * (2.0 - c) / c * LN_2,
        Err(_) => false,
    }
}

/// `a (1 - ln(a / (2(1-H_C)))) + H_C - 1`.
fn der0_denominator(c: f64, a: f64) -> Result<f64> {
    let h = h_c(c)?;
    Ok(a * (1.0 - (a / (2.0 * (1.0 - h))).ln()) + h - 1.0)
}

/// `C < (1 - alpha/(1-alpha)) / (a(1 - ln(a/(2(1-H_C)))) + H_C - 1)`; false when the denominator is not positive.
pub fn check_der0(alpha: f64, c: f64, a: f64) -> Result<bool> {
    let den = der0_denominator(c, a)?;
    Ok(den > 0.0 && c < (1.0 - ratio(alpha)) / den)
}

/// The four conditions on `(alpha, C)` alone.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlphaCFlags {
    pub alpha_small: bool,
    pub c_bound: bool,
    pub cond1: bool,
    pub cond2: bool,
}

impl AlphaCFlags {
    pub fn all(&self) -> bool {
        self.alpha_small && self.c_bound && self.cond1 && self.cond2
    }
}

pub fn alpha_c_flags(alpha: f64, c: f64) -> Result<AlphaCFlags> {
    if !(0.0..1.0).contains(&alpha) {
        return domain(format!("alpha = {alpha} is outside [0, 1)"));
    }
    let h = h_c(c)?;
    let h2 = binary_entropy(h)?;
    let sq = ratio(alpha).sqrt();
    let t = 2.0 * (1.0 - h);
    let cond1 = c * ((1.0 - h) * (1.0 - t.ln()) - h2 / 2.0 - 7.0 * sq * (0.5 * t.ln())) > 4.0 * ratio(alpha);
    let cond2 = c * (h2 / 2.0 + 0.5 * ((1.0 - h) / h).ln() * (1.0 - h - 5.0 * sq) + h - 1.0) > 3.0 * ratio(alpha);
    Ok(AlphaCFlags {
        alpha_small: alpha < 0.028,
        c_bound: c < 2.0 * (1.0 - 2.0 * alpha) / (1.0 - alpha),
        cond1,
        cond2,
    })
}

pub fn check_alpha_c(alpha: f64, c: f64) -> Result<bool> {
    Ok(alpha_c_flags(alpha, c)?.all())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalC {
    pub alpha: f64,
    #[serde(rename = "C")]
    pub c: f64,
    /// `a_inf(alpha, C*)`.
    pub a: f64,
    /// Boundary equation residual at the root.
    pub residual: f64,
}

/// `C (a(1 - ln(a/(2(1-H_C)))) + H_C - 1) - (1 - alpha/(1-alpha))`, `a = a_inf(alpha, C)`.
fn boundary(alpha: f64, c: f64) -> Result<f64> {
    let a = a_inf(alpha, c)?;
    Ok(c * der0_denominator(c, a)? - (1.0 - ratio(alpha)))
}

/// Smallest `C` in `(1, 2)` where the derivative condition at `x = 0` stops holding.
///
/// The boundary function is negative near `C = 1`, crosses zero once, and
/// returns towards zero only as `C -> 2`; the first sign change on a coarse
/// scan is bisected.
pub fn critical_c(alpha: f64) -> Result<CriticalC> {
    if !(0.0..0.028).contains(&alpha) {
        return domain(format!("alpha = {alpha} is outside [0, 0.028)"));
    }
    const SCAN: usize = 200;
    let mut lo = 1.0 + 1e-6;
    if boundary(alpha, lo)? >= 0.0 {
        return Err(Error::NoRoot(format!("boundary already nonnegative at C = {lo}")));
    }
    let mut hi = None;
    for i in 1..SCAN {
        let c = 1.0 + i as f64 / SCAN as f64;
        if boundary(alpha, c)? >= 0.0 {
            hi = Some(c);
            break;
        }
        lo = c;
    }
    let mut hi = hi.ok_or_else(|| Error::NoRoot(format!("no sign change in (1, 2) for alpha = {alpha}")))?;
    while hi - lo > CRITICAL_C_TOL {
        let mid = 0.5 * (lo + hi);
        if boundary(alpha, mid)? < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let c = 0.5 * (lo + hi);
    Ok(CriticalC {
        alpha,
        c,
        a: a_inf(alpha, c)?,
        residual: boundary(alpha, c)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionPoint {
    pub alpha: f64,
    #[serde(rename = "C")]
    pub c: f64,
    pub a: f64,
    pub fmf_exists: bool,
    pub der0: bool,
    #[serde(rename = "alphaC")]
    pub alpha_c: bool,
    pub all_ok: bool,
}

pub fn region_point(alpha: f64, c: f64) -> Result<RegionPoint> {
    let a = a_inf(alpha, c)? + A_OFFSET;
    let fmf_exists = check_fmf_exists(c, a, 0.0, 0.0);
    let der0 = check_der0(alpha, c, a)?;
    let alpha_c = check_alpha_c(alpha, c)?;
    Ok(RegionPoint {
        alpha,
        c,
        a,
        fmf_exists,
        der0,
        alpha_c,
        all_ok: fmf_exists && der0 && alpha_c,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionReport {
    pub points: Vec<RegionPoint>,
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![lo],
        _ => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
    }
}

/// Evaluates every point of the `n_alpha x n_c` grid (inclusive endpoints), alpha-major.
pub fn region_scan(alpha_range: (f64, f64), c_range: (f64, f64), n_alpha: usize, n_c: usize) -> Result<RegionReport> {
    let (a0, a1) = alpha_range;
    let (c0, c1) = c_range;
    if !(0.0 < a0 && a0 <= a1 && a1 < 1.0) || !(1.0 < c0 && c0 <= c1 && c1 < 2.0) {
        return domain("ranges must lie within (0, 1) x (1, 2) with lo <= hi");
    }
    let grid: Vec<(f64, f64)> = linspace(a0, a1, n_alpha)
        .into_iter()
        .flat_map(|a| linspace(c0, c1, n_c).into_iter().map(move |c| (a, c)))
        .collect();
    #[cfg(feature = "parallel")]
    let points = {
        use rayon::prelude::*;
        grid.par_iter().map(|&(a, c)| region_point(a, c)).collect::<Result<_>>()?
    };
    #[cfg(not(feature = "parallel"))]
    let points = grid.iter().map(|&(a, c)| region_point(a, c)).collect::<Result<_>>()?;
    Ok(RegionReport { points })
}

impl RegionReport {
    /// Writes `alpha,C,a,fmf_exists,der0,alphaC,all_ok` rows.
    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "alpha,C,a,fmf_exists,der0,alphaC,all_ok")?;
        for p in &self.points {
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                fmt12(p.alpha),
                fmt12(p.c),
                fmt12(p.a),
                p.fmf_exists,
                p.der0,
                p.alpha_c,
                p.all_ok
            )?;
        }
        Ok(())
    }
}
