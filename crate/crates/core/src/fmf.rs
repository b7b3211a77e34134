//! The conditional first moment function `y(x)`: residual, constraints,
//! bracketed solving, the unconditional variant and the `x = 0` closed form.

use serde::{Deserialize, Serialize};
use std::f64::consts::LN_2;
use std::io::Write;

use crate::error::{domain, Error, Result};
use crate::mathcore::{entropy_nats_inv_left, kl_div_c, log_binom, log_binom_real};
use crate::model::{assignment_prob, deterministic_scales, infected_count};
use crate::report::{fmt12, fmt_opt};

pub const SOLVE_TOL: f64 = 1e-14;
const SOLVE_MAX_ITER: usize = 200;
/// Smallest slope accepted as an increase by `nonmonotonicity`.
pub const MIN_DELTA1: f64 = 1e-6;

/// How the log-binomial left-hand side is evaluated off the integers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum BinomialMode {
    /// `ln C(k, floor(xk)) + ln C(round(p) - k, floor((1-x)k))`.
    #[default]
    Floored,
    /// Log-gamma at the real arguments `xk`, `(1-x)k` and real `p`. Needed
    /// when `k` is tiny (e.g. `k = 1`), where floors make every `0 < x < 1`
    /// collapse onto a single integer point.
    Continuous,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FMFParams {
    pub alpha: f64,
    #[serde(rename = "C")]
    pub c: f64,
    pub a: f64,
    pub c_r: f64,
    pub c_s: f64,
    pub c_i: f64,
    pub k: u64,
    #[serde(rename = "M")]
    pub m: f64,
    pub p: f64,
    pub mode: BinomialMode,
}

/// `(r(x), s(x)) = (4 2^{-x}(1 - 2^{-x}), 1 - 2^{x-1})`.
pub fn profile_fns(x: f64) -> Result<(f64, f64)> {
    check_x(x)?;
    let u = (-x * LN_2).exp();
    Ok((4.0 * u * (1.0 - u), 1.0 - 2f64.powf(x - 1.0)))
}

fn check_x(x: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&x) {
        return domain(format!("x = {x} is outside [0, 1]"));
    }
    Ok(())
}

/// `r(x)` and `1 - r(x) = (1 - 2^{1-x})^2`, with `1 - 2^{-x}` taken from `expm1`.
fn r_pair(x: f64) -> (f64, f64) {
    let u = (-x * LN_2).exp();
    let one_minus_u = -(-x * LN_2).exp_m1();
    let v = 1.0 - 2.0 * u;
    (4.0 * u * one_minus_u, v * v)
}

/// `s(x)` and `1 - s(x) = 2^{x-1}`.
fn s_pair(x: f64) -> (f64, f64) {
    let sc = ((x - 1.0) * LN_2).exp();
    (-((x - 1.0) * LN_2).exp_m1(), sc)
}

/// `floor(v)` with a guard so that `(l/k) * k` maps back to `l`.
fn floor_guard(v: f64) -> f64 {
    (v + 1e-9).floor()
}

/// The four constraint flags.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Constraints {
    /// `2a ln2 x / (1-y) <= (1-c_r) r(x)`.
    pub r: bool,
    /// `y <= (1-c_s) s(x)`.
    pub s: bool,
    /// `2a ln2 x <= (1-c_r) r(x)`.
    pub exist: bool,
    /// The uniqueness inequality on `w = 2a ln2 x / ((1-c_r) r(x))`.
    pub uni: bool,
}

impl Constraints {
    pub fn all(&self) -> bool {
        self.r && self.s && self.exist && self.uni
    }
}

impl FMFParams {
    /// Deterministic surrogates for `(M, p)` at population `n`, zero slacks.
    pub fn surrogate(n: u64, alpha: f64, c: f64, a: f64) -> Result<Self> {
        let k = infected_count(n, alpha)?;
        if k == 0 {
            return domain(format!("floor(n^alpha) = 0 for n = {n}, alpha = {alpha}"));
        }
        let (m, p) = deterministic_scales(n, k, c)?;
        let params = Self {
            alpha,
            c,
            a,
            c_r: 0.0,
            c_s: 0.0,
            c_i: 0.0,
            k,
            m,
            p,
            mode: BinomialMode::Floored,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn with_mode(mut self, mode: BinomialMode) -> Self {
        self.mode = mode;
        self
    }

    /// Checks ranges, and that `a` lies in `{a : ln2 C (a ln a - a + 1) > alpha/(1-alpha)}`.
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return domain(format!("alpha = {} is outside (0, 1)", self.alpha));
        }
        if !(self.c > 1.0 && self.c < 2.0) {
            return domain(format!("C = {} is outside (1, 2)", self.c));
        }
        for (name, v) in [("c_r", self.c_r), ("c_s", self.c_s), ("c_i", self.c_i)] {
            if !(0.0..1.0).contains(&v) {
                return domain(format!("slack {name} = {v} is outside [0, 1)"));
            }
        }
        if !(self.m > 0.0) {
            return domain("M must be positive");
        }
        if !(self.p > self.k as f64) || self.k == 0 {
            return domain(format!("need p > k >= 1, got p = {}, k = {}", self.p, self.k));
        }
        let lhs = LN_2 * self.c * (self.a * self.a.ln() - self.a + 1.0);
        if !(self.a > 1.0) || !(lhs > self.alpha / (1.0 - self.alpha)) {
            return domain(format!(
                "a = {} is not in the admissible set for alpha = {}, C = {}",
                self.a, self.alpha, self.c
            ));
        }
        Ok(())
    }

    /// Conditioning degree `d = 2 a q M`.
    pub fn degree_cap(&self) -> Result<f64> {
        Ok(2.0 * self.a * assignment_prob(self.k)? * self.m)
    }

    /// `(1/M) ln[C(k, xk) C(p-k, (1-x)k)]` under the configured binomial mode.
    pub fn lhs(&self, x: f64) -> Result<f64> {
        check_x(x)?;
        let kf = self.k as f64;
        let v = match self.mode {
            BinomialMode::Floored => {
                let p = self.p.round() as u64;
                let l = floor_guard(x * kf) as u64;
                let rest = floor_guard((1.0 - x) * kf) as u64;
                log_binom(self.k, l)? + log_binom(p - self.k, rest)?
            }
            BinomialMode::Continuous => log_binom_real(kf, x * kf)? + log_binom_real(self.p - kf, (1.0 - x) * kf)?,
        };
        Ok(v / self.m)
    }

    /// `w(x) = 2a ln2 x / ((1-c_r) r(x))`, with its `x -> 0` limit `a / (2(1-c_r))`.
    fn w(&self, x: f64) -> f64 {
        if x == 0.0 {
            return self.a / (2.0 * (1.0 - self.c_r));
        }
        let (r, _) = r_pair(x);
        2.0 * self.a * LN_2 * x / ((1.0 - self.c_r) * r)
    }

    /// Conditional right-hand side `(1-y) D(2a ln2 x/(1-y) || r) + D(y || s)`.
    pub fn rhs(&self, x: f64, y: f64) -> Result<f64> {
        check_x(x)?;
        if !(0.0..1.0).contains(&y) {
            return domain(format!("y = {y} is outside [0, 1)"));
        }
        let z_num = 2.0 * self.a * LN_2 * x;
        let z = z_num / (1.0 - y);
        if z > 1.0 {
            return Err(Error::Infeasible(format!(
                "KL argument 2a ln2 x/(1-y) = {z} exceeds 1 at x = {x}, y = {y}"
            )));
        }
        let (r, rc) = r_pair(x);
        let (s, sc) = s_pair(x);
        let zc = (1.0 - y - z_num) / (1.0 - y);
        Ok((1.0 - y) * kl_div_c(z, zc, r, rc) + kl_div_c(y, 1.0 - y, s, sc))
    }

    /// Unconditional right-hand side `D(y || s(x))`.
    pub fn rhs_unconditional(&self, x: f64, y: f64) -> Result<f64> {
        check_x(x)?;
        if !(0.0..=1.0).contains(&y) {
            return domain(format!("y = {y} is outside [0, 1]"));
        }
        let (s, sc) = s_pair(x);
        Ok(kl_div_c(y, 1.0 - y, s, sc))
    }
}

/// `LHS - RHS` of the first moment equation; increasing in `y`.
pub fn fmf_residual(params: &FMFParams, x: f64, y: f64) -> Result<f64> {
    Ok(params.lhs(x)? - params.rhs(x, y)?)
}

pub fn check_constraints(params: &FMFParams, x: f64, y: f64) -> Result<Constraints> {
    check_x(x)?;
    let (r, _) = r_pair(x);
    let (s, sc) = s_pair(x);
    let z = 2.0 * params.a * LN_2 * x;
    let room_r = (1.0 - params.c_r) * r;
    let w = params.w(x);
    let uni = if w > 1.0 {
        false
    } else {
        // D((1-c_r) r || r) -> 0 as x -> 0 while w stays bounded
        let second = if x == 0.0 {
            0.0
        } else {
            w * kl_div_c(room_r, 1.0 - room_r, r, 1.0 - r)
        };
        let lhs = kl_div_c(1.0 - w, w, s, sc) + second;
        lhs <= (1.0 - params.c_i) * (1.0 - x) * (2.0 - params.c) * LN_2 / params.c
    };
    Ok(Constraints {
        r: y < 1.0 && z / (1.0 - y) <= room_r,
        s: y <= (1.0 - params.c_s) * s,
        exist: z <= room_r,
        uni,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FMFPoint {
    pub x: f64,
    pub y: f64,
    pub flags: Constraints,
    pub residual: f64,
}

/// Bisection for an increasing function with `f(lo) <= 0 <= f(hi)`.
fn bisect_increasing(mut f: impl FnMut(f64) -> Result<f64>, mut lo: f64, mut hi: f64) -> Result<f64> {
    for _ in 0..SOLVE_MAX_ITER {
        if hi - lo <= SOLVE_TOL {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if f(mid)? <= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Solves the conditional equation at `x`; `None` when the existence and
/// uniqueness constraints fail or the bracket has no sign change.
pub fn solve_fmf(params: &FMFParams, x: f64) -> Result<Option<FMFPoint>> {
    let gate = check_constraints(params, x, 0.0)?;
    if !(gate.exist && gate.uni) {
        return Ok(None);
    }
    let (s, _) = s_pair(x);
    let hi = (1.0 - params.w(x)).min((1.0 - params.c_s) * s);
    if !(hi >= 0.0) {
        return Ok(None);
    }
    let f = |y: f64| fmf_residual(params, x, y);
    if f(0.0)? > 0.0 || f(hi)? < 0.0 {
        return Ok(None);
    }
    let y = bisect_increasing(f, 0.0, hi)?;
    Ok(Some(FMFPoint {
        x,
        y,
        flags: check_constraints(params, x, y)?,
        residual: fmf_residual(params, x, y)?,
    }))
}

/// Solves `LHS = D(y || s(x))` for `y` in `[0, (1-c_s) s(x)]`.
pub fn solve_fmf_unconditional(params: &FMFParams, x: f64) -> Result<Option<f64>> {
    let (s, _) = s_pair(x);
    let lhs = params.lhs(x)?;
    let hi = (1.0 - params.c_s) * s;
    // D(y || s) decreases on [0, s]
    let f = |y: f64| -> Result<f64> { Ok(lhs - params.rhs_unconditional(x, y)?) };
    if f(0.0)? > 0.0 || f(hi)? < 0.0 {
        return Ok(None);
    }
    Ok(Some(bisect_increasing(f, 0.0, hi)?))
}

/// Closed form at `x = 0`: `h^{-1}(ln 2 - LHS(0))` on the `[0, 1/2]` branch.
pub fn y_zero(params: &FMFParams) -> Result<f64> {
    let v = LN_2 - params.lhs(0.0)?;
    if !(0.0..=LN_2).contains(&v) {
        return domain(format!("ln2 - LHS(0) = {v} is outside [0, ln 2]"));
    }
    entropy_nats_inv_left(v)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FMFCurve {
    pub x_grid: Vec<f64>,
    pub y: Vec<Option<f64>>,
    pub feasible: Vec<Constraints>,
    pub residuals: Vec<Option<f64>>,
    pub y_unconditional: Option<Vec<Option<f64>>>,
}

/// `{0, 1/k, ..., 1}`.
pub fn default_grid(k: u64) -> Vec<f64> {
    (0..=k).map(|l| l as f64 / k as f64).collect()
}

/// Solves every grid point; points are independent and may run in parallel.
pub fn solve_curve(params: &FMFParams, grid: &[f64], with_unconditional: bool) -> Result<FMFCurve> {
    let one = |&x: &f64| -> Result<(Option<FMFPoint>, Constraints, Option<f64>)> {
        let pt = solve_fmf(params, x)?;
        let flags = match pt {
            Some(p) => p.flags,
            None => check_constraints(params, x, 0.0)?,
        };
        let u = if with_unconditional {
            solve_fmf_unconditional(params, x)?
        } else {
            None
        };
        Ok((pt, flags, u))
    };
    #[cfg(feature = "parallel")]
    let pts: Vec<_> = {
        use rayon::prelude::*;
        grid.par_iter().map(one).collect::<Result<_>>()?
    };
    #[cfg(not(feature = "parallel"))]
    let pts: Vec<_> = grid.iter().map(one).collect::<Result<_>>()?;
    Ok(FMFCurve {
        x_grid: grid.to_vec(),
        y: pts.iter().map(|p| p.0.map(|q| q.y)).collect(),
        feasible: pts.iter().map(|p| p.1).collect(),
        residuals: pts.iter().map(|p| p.0.map(|q| q.residual)).collect(),
        y_unconditional: with_unconditional.then(|| pts.iter().map(|p| p.2).collect()),
    })
}

impl FMFCurve {
    /// Writes `x,y,feasible_r,feasible_s,feasible_exist,feasible_uni,residual[,y_unconditional]`.
    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        write!(w, "x,y,feasible_r,feasible_s,feasible_exist,feasible_uni,residual")?;
        if self.y_unconditional.is_some() {
            write!(w, ",y_unconditional")?;
        }
        writeln!(w)?;
        for i in 0..self.x_grid.len() {
            let f = self.feasible[i];
            write!(
                w,
                "{},{},{},{},{},{},{}",
                fmt12(self.x_grid[i]),
                fmt_opt(self.y[i]),
                f.r,
                f.s,
                f.exist,
                f.uni,
                fmt_opt(self.residuals[i])
            )?;
            if let Some(u) = &self.y_unconditional {
                write!(w, ",{}", fmt_opt(u[i]))?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// Direction of a curve over its solved initial segment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Trend {
    Nondecreasing,
    Nonincreasing,
    Constant,
    Mixed,
}

/// Classifies `ys` (stopping at the first missing value).
pub fn trend(ys: &[Option<f64>]) -> Trend {
    let v: Vec<f64> = ys.iter().map_while(|y| *y).collect();
    let up = v.windows(2).any(|w| w[1] > w[0]);
    let down = v.windows(2).any(|w| w[1] < w[0]);
    match (up, down) {
        (false, false) => Trend::Constant,
        (true, false) => Trend::Nondecreasing,
        (false, true) => Trend::Nonincreasing,
        (true, true) => Trend::Mixed,
    }
}

/// Largest `eps1` and the best `delta1 >= MIN_DELTA1` with
/// `y(x) - y(0) >= delta1 x` for every grid `0 < x <= eps1`.
pub fn nonmonotonicity(curve: &FMFCurve) -> Option<(f64, f64)> {
    let y0 = *curve.y.first()?.as_ref()?;
    if curve.x_grid[0] != 0.0 {
        return None;
    }
    let mut best = None;
    let mut slope = f64::INFINITY;
    for (&x, y) in curve.x_grid.iter().zip(&curve.y).skip(1) {
        let Some(y) = *y else { break };
        slope = slope.min((y - y0) / x);
        if slope < MIN_DELTA1 {
            break;
        }
        best = Some((x, slope));
    }
    best
}

/// Logarithm of the conditional first-moment bound
/// `C(k,l) C(p-k,k-l) P(Bin(M-t, r) <= ld) P(Bin(M, s) <= t)`, each binomial
/// tail replaced by its Chernoff bound `e^{-n D}` when the threshold sits
/// below the mean and by 1 otherwise. `r, s` are evaluated at `l/k`.
pub fn log_conditional_first_moment_bound(k: u64, p: u64, m: u64, l: u64, t: u64, d: f64) -> Result<f64> {
    if l > k || k > p || t > m || m == 0 {
        return domain("need l <= k <= p and t <= M, M >= 1");
    }
    let x = l as f64 / k as f64;
    let (r, rc) = r_pair(x);
    let (s, sc) = s_pair(x);
    let mut v = log_binom(k, l)? + log_binom(p - k, k - l)?;
    let rest = (m - t) as f64;
    if rest > 0.0 {
        let u = (l as f64 * d / rest).min(1.0);
        if u < r {
            v -= rest * kl_div_c(u, 1.0 - u, r, rc);
        }
    } else if l as f64 * d < 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    let ty = t as f64 / m as f64;
    if ty < s {
        v -= m as f64 * kl_div_c(ty, 1.0 - ty, s, sc);
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn params(n: u64, alpha: f64, c: f64, a: f64) -> FMFParams {
        FMFParams::surrogate(n, alpha, c, a).unwrap()
    }

    #[test]
    fn profiles() {
        assert_eq!(profile_fns(0.0).unwrap(), (0.0, 0.5));
        let (r, s) = profile_fns(1.0).unwrap();
        assert_abs_diff_eq!(r, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(s, 0.0, epsilon = 1e-15);
        let (r, s) = profile_fns(0.5).unwrap();
        assert_abs_diff_eq!(r, 0.828_427_124_746_190_1, epsilon = 1e-12);
        assert_abs_diff_eq!(s, 0.292_893_218_813_452_5, epsilon = 1e-12);
        assert!(profile_fns(1.5).is_err());
        for x in [1e-9, 0.01, 0.3, 0.99] {
            let (r, rc) = r_pair(x);
            let (s, sc) = s_pair(x);
            assert_abs_diff_eq!(r + rc, 1.0, epsilon = 1e-15);
            assert_abs_diff_eq!(s + sc, 1.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn boundary_reduction_at_origin() {
        let p = params(100_000_000, 0.1, 1.3, 1.6);
        let lhs0 = log_binom(p.p.round() as u64 - p.k, p.k).unwrap() / p.m;
        assert_abs_diff_eq!(fmf_residual(&p, 0.0, 0.0).unwrap(), lhs0 - LN_2, epsilon = 1e-14);
    }

    #[test]
    fn residual_increases_in_y() {
        let p = params(100_000_000, 0.1, 1.3, 1.6);
        for x in [0.0, 1.0 / 6.0, 1.0 / 3.0] {
            let mut prev = f64::NEG_INFINITY;
            for i in 0..200 {
                let y = i as f64 * 0.002;
                let f = check_constraints(&p, x, y + 1e-6).unwrap();
                if !(f.r && f.s) {
                    break;
                }
                let v = fmf_residual(&p, x, y).unwrap();
                assert!(v > prev);
                assert!(fmf_residual(&p, x, y + 1e-6).unwrap() > v);
                prev = v;
            }
        }
    }

    #[test]
    fn constraint_flags() {
        let p = params(100_000_000, 0.1, 1.3, 1.6);
        let f = check_constraints(&p, 0.0, 0.2).unwrap();
        let reduced = kl_div_c(1.0 - p.a / 2.0, p.a / 2.0, 0.5, 0.5) <= (2.0 - p.c) * LN_2 / p.c;
        assert!(f.r && f.s && f.exist);
        assert_eq!(f.uni, reduced);
        assert!(!check_constraints(&p, 1.0, 0.0).unwrap().exist);
        assert!(!check_constraints(&p, 0.3, 0.5).unwrap().s);
    }

    #[test]
    fn origin_methods_agree() {
        for (alpha, c, n) in [(0.1, 1.2, 100_000_000u64), (0.1, 1.4, 1_000_000_000_000), (0.05, 1.3, 10_000_000_000)] {
            let a = 1.6;
            let p = params(n, alpha, c, a);
            let s = solve_fmf(&p, 0.0).unwrap().unwrap();
            let u = solve_fmf_unconditional(&p, 0.0).unwrap().unwrap();
            let z = y_zero(&p).unwrap();
            assert!((s.y - z).abs() < 1e-9 && (u - z).abs() < 1e-9);
            assert!(s.residual.abs() <= 1e-10);
            assert!(s.flags.all());
        }
    }

    #[test]
    fn conditioning_raises_the_curve() {
        let p = params(1_000_000_000_000, 0.1, 1.2, 1.6);
        let curve = solve_curve(&p, &default_grid(p.k), true).unwrap();
        let uncond = curve.y_unconditional.as_ref().unwrap();
        for (y, u) in curve.y.iter().zip(uncond) {
            if let (Some(y), Some(u)) = (y, u) {
                assert!(*y >= *u - 1e-12);
            }
        }
        for (y, r) in curve.y.iter().zip(&curve.residuals) {
            if y.is_some() {
                assert!(r.unwrap().abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn nonmonotonicity_examples() {
        let grid: Vec<f64> = (0..=10).map(|i| i as f64 / 10.0).collect();
        let affine = FMFCurve {
            y: grid.iter().map(|x| Some(0.1 + 0.3 * x)).collect(),
            x_grid: grid.clone(),
            feasible: vec![Constraints::default(); 11],
            residuals: vec![None; 11],
            y_unconditional: None,
        };
        let (e, d) = nonmonotonicity(&affine).unwrap();
        assert_eq!(e, 1.0);
        assert_abs_diff_eq!(d, 0.3, epsilon = 1e-12);
        let falling = FMFCurve {
            y: grid.iter().map(|x| Some(0.4 - x / 4.0)).collect(),
            ..affine
        };
        assert_eq!(nonmonotonicity(&falling), None);
        assert_eq!(trend(&falling.y), Trend::Nonincreasing);
    }

    #[test]
    fn continuous_curve_rises_in_the_region() {
        // a = a_inf(0.005, 1.2) + 1e-6
        let a = 1.111_918_0 + 1e-6;
        let p = params(10_000_000_000, 0.005, 1.2, a).with_mode(BinomialMode::Continuous);
        let grid: Vec<f64> = (0..=10).map(|i| i as f64 * 0.005).collect();
        let curve = solve_curve(&p, &grid, false).unwrap();
        let (e, d) = nonmonotonicity(&curve).unwrap();
        assert!(e > 0.0 && d >= MIN_DELTA1);
    }

    #[test]
    fn invalid_a_rejected() {
        assert!(FMFParams::surrogate(100_000_000, 0.1, 1.3, 1.0).is_err());
        assert!(FMFParams::surrogate(100_000_000, 0.1, 1.3, 1.01).is_err());
    }

    #[test]
    fn bound_reduces_to_counting_when_tails_are_trivial() {
        // t = M: the s-tail factor is 1; huge d: the r-tail factor is 1
        let v = log_conditional_first_moment_bound(3, 20, 10, 1, 10, 1e9).unwrap();
        assert_abs_diff_eq!(v, (3.0f64 * 136.0).ln(), epsilon = 1e-12);
    }
}
