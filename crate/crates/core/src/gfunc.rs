//! Second-moment exponent functions `G~`, `G`, `G-breve` and a numerical
//! certificate of their shape on a grid.
//!
//! KL divergences are in nats, `h_2` in bits. Every quantity that tends to 0
//! or 1 at an endpoint of `x` is formed from `expm1` so the endpoint limits
//! stay accurate.

use serde::{Deserialize, Serialize};
use std::f64::consts::LN_2;
use std::io::Write;

use crate::error::{domain, Result};
use crate::mathcore::{binary_entropy, h_c, kl_div, kl_div_c};
use crate::report::fmt12;

pub const DEFAULT_G_POINTS: usize = 2001;
pub const G_GRID_LO: f64 = 1e-3;
pub const G_GRID_HI: f64 = 1.0 - 1e-3;
/// Distance from 0 and 1 at which the endpoint limits are evaluated.
pub const ENDPOINT_X: f64 = 1e-8;
pub const ENDPOINT_TOL: f64 = 1e-6;
/// Abscissa and step of the finite differences compared with the derivative limits.
pub const FD_X: f64 = 1e-6;
pub const FD_STEP: f64 = 5e-7;
pub const FD_TOL: f64 = 1e-4;
pub const CONCAVITY_SLACK: f64 = 1e-12;
const BOUND_SLACK: f64 = 1e-12;

fn check_xy(y: f64, x: f64) -> Result<()> {
    if !(y > 0.0 && y < 0.5) {
        return domain(format!("y = {y} is outside (0, 1/2)"));
    }
    if !(x > 0.0 && x < 1.0) {
        return domain(format!("x = {x} is outside (0, 1)"));
    }
    Ok(())
}

/// `(2^{-(1-x)}, 1 - 2^{-(1-x)}, 2^{-x}, 1 - 2^{-x})`.
fn bases(x: f64) -> (f64, f64, f64, f64) {
    let bc = -(-(1.0 - x) * LN_2).exp_m1();
    let cc = -(-x * LN_2).exp_m1();
    (1.0 - bc, bc, 1.0 - cc, cc)
}

/// `y_(x) = y + (1-y)(2^{1-x} - 1)` and its complement `2(1-y)(1 - 2^{-x})`.
pub fn y_center(y: f64, x: f64) -> (f64, f64) {
    let e = ((1.0 - x) * LN_2).exp_m1();
    let cc = -(-x * LN_2).exp_m1();
    (y + (1.0 - y) * e, 2.0 * (1.0 - y) * cc)
}

/// `G` with `D(y||1/2)` in the first term replaced by `d_first`, `yp` given with its complement.
fn g_core(d_first: f64, y: f64, yp: f64, ypc: f64, x: f64) -> f64 {
    let (b, bc, c, cc) = bases(x);
    let dy = kl_div_c(y, 1.0 - y, 0.5, 0.5);
    x / 2.0 * d_first + yp * kl_div_c(y / yp, (yp - y) / yp, b, bc) - dy + 0.5 * kl_div_c(yp, ypc, c, cc)
}

fn check_yp(y: f64, yp: f64) -> Result<()> {
    if !(yp >= y && yp <= 1.0) {
        return domain(format!("y' = {yp} is outside [y, 1] = [{y}, 1]"));
    }
    Ok(())
}

/// `G(y, y', x) = x/2 D(y||1/2) + y' D(y/y'||2^{-(1-x)}) - D(y||1/2) + 1/2 D(y'||2^{-x})`.
pub fn g_fn(y: f64, yp: f64, x: f64) -> Result<f64> {
    check_xy(y, x)?;
    check_yp(y, yp)?;
    Ok(g_core(kl_div(y, 0.5)?, y, yp, 1.0 - yp, x))
}

/// `G~`: `G` with `D(H_C||1/2)` in the first term.
pub fn g_tilde(c: f64, y: f64, yp: f64, x: f64) -> Result<f64> {
    check_xy(y, x)?;
    check_yp(y, yp)?;
    Ok(g_core(kl_div(h_c(c)?, 0.5)?, y, yp, 1.0 - yp, x))
}

/// `G-breve(y, x) = G(y, y_(x), x)`.
pub fn g_breve(y: f64, x: f64) -> Result<f64> {
    check_xy(y, x)?;
    let (yp, ypc) = y_center(y, x);
    Ok(g_core(kl_div(y, 0.5)?, y, yp, ypc, x))
}

/// Limits of `d/dx G-breve(y, x)` as `x -> 0` and `x -> 1`.
pub fn g_breve_dx_limits(y: f64) -> Result<(f64, f64)> {
    if !(y > 0.0 && y < 0.5) {
        return domain(format!("y = {y} is outside (0, 1/2)"));
    }
    let h = binary_entropy(y)?;
    let d0 = LN_2 * ((1.0 - y) * (1.0 - (2.0 - 2.0 * y).ln()) - h / 2.0);
    let d1 = LN_2 * ((1.0 - y) * (1.0 + 0.5 * (y / (1.0 - y)).ln()) - h / 2.0);
    Ok((d0, d1))
}

/// `d/dy' G(y, y', x)` at `y' = y_(x)`.
///
/// The general form `log((1 - y/y')/(1 - 2^{-(1-x)})) + 1/2 log(y'/(1-y') (1-2^{-x})/2^{-x})`
/// simplifies at the center to `log((1-y) 2^{1-x}/y') + 1/2 log(y' 2^x / (2(1-y)))`.
pub fn g_dyp_at_center(y: f64, x: f64) -> Result<f64> {
    check_xy(y, x)?;
    let (yp, _) = y_center(y, x);
    Ok(((1.0 - y) / yp).ln() + (1.0 - x) * LN_2 + 0.5 * ((yp / (2.0 * (1.0 - y))).ln() + x * LN_2))
}

/// `d/dy' G(y, y', x)` at an arbitrary `y'` in `(y, 1)`.
pub fn g_dyp(y: f64, yp: f64, x: f64) -> Result<f64> {
    check_xy(y, x)?;
    if !(yp > y && yp < 1.0) {
        return domain(format!("y' = {yp} is outside (y, 1)"));
    }
    let (_, bc, c, cc) = bases(x);
    Ok(((yp - y) / yp / bc).ln() + 0.5 * (yp / (1.0 - yp) * cc / c).ln())
}

/// `(inf bound, sup bound)` on `|d/dy' G|` at the center: `1/2 log(2(1-y))`, `1/2 log((1-y)/y)`.
pub fn dyp_sandwich(y: f64) -> (f64, f64) {
    (0.5 * (2.0 * (1.0 - y)).ln(), 0.5 * ((1.0 - y) / y).ln())
}

/// Fixed-`x` bound `1/2 log(2(1-y)) + x log 4 / (2^{2-x} - 2)`.
pub fn dyp_fixed_x_bound(y: f64, x: f64) -> f64 {
    0.5 * (2.0 * (1.0 - y)).ln() + x * 4f64.ln() / (2.0 * ((1.0 - x) * LN_2).exp_m1())
}

/// `points` equally spaced abscissae on `[G_GRID_LO, G_GRID_HI]`.
pub fn g_grid(points: usize) -> Vec<f64> {
    let step = (G_GRID_HI - G_GRID_LO) / (points.max(2) - 1) as f64;
    (0..points.max(2)).map(|i| G_GRID_LO + i as f64 * step).collect()
}

/// Number of grid points giving spacing at most `resolution`.
pub fn points_for_resolution(resolution: f64) -> Result<usize> {
    if !(resolution > 0.0 && resolution < 0.5) {
        return domain(format!("resolution {resolution} is outside (0, 1/2)"));
    }
    Ok(((G_GRID_HI - G_GRID_LO) / resolution).ceil() as usize + 1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GFailure {
    pub check: String,
    pub x: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GReport {
    pub y: f64,
    pub grid: Vec<f64>,
    pub breve_values: Vec<f64>,
    /// Second central differences at interior grid points (first and last are NaN).
    pub second_differences: Vec<f64>,
    pub max_second_difference: f64,
    pub min_interior_value: f64,
    pub endpoint_values: (f64, f64),
    pub d0_limit: f64,
    pub d1_limit: f64,
    pub d0_finite_difference: f64,
    pub d1_finite_difference: f64,
    pub deriv_bound_sup: f64,
    pub deriv_bound_inf: f64,
    pub dyp_range: (f64, f64),
    pub failures: Vec<GFailure>,
    pub passed: bool,
}

#[derive(Serialize)]
struct GSummary<'a> {
    y: f64,
    points: usize,
    min_interior_value: f64,
    max_second_difference: f64,
    endpoint_values: (f64, f64),
    d0_limit: f64,
    d1_limit: f64,
    d0_finite_difference: f64,
    d1_finite_difference: f64,
    deriv_bound_inf: f64,
    deriv_bound_sup: f64,
    dyp_range: (f64, f64),
    failures: &'a [GFailure],
    passed: bool,
}

impl GReport {
    /// Writes `x,g_breve,second_diff`; the second difference is blank at the ends.
    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "x,g_breve,second_diff")?;
        for ((x, g), s) in self.grid.iter().zip(&self.breve_values).zip(&self.second_differences) {
            let s = if s.is_nan() { String::new() } else { fmt12(*s) };
            writeln!(w, "{},{},{}", fmt12(*x), fmt12(*g), s)?;
        }
        Ok(())
    }

    /// Summary JSON without the per-point arrays.
    pub fn summary_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&GSummary {
            y: self.y,
            points: self.grid.len(),
            min_interior_value: self.min_interior_value,
            max_second_difference: self.max_second_difference,
            endpoint_values: self.endpoint_values,
            d0_limit: self.d0_limit,
            d1_limit: self.d1_limit,
            d0_finite_difference: self.d0_finite_difference,
            d1_finite_difference: self.d1_finite_difference,
            deriv_bound_inf: self.deriv_bound_inf,
            deriv_bound_sup: self.deriv_bound_sup,
            dyp_range: self.dyp_range,
            failures: &self.failures,
            passed: self.passed,
        })?)
    }
}

/// Evaluates `G-breve` on a `points`-point grid and checks concavity,
/// positivity, the endpoint limits, the derivative limits and the bounds on
/// `d/dy' G` at the center. Failed checks are listed with their abscissa.
pub fn verify_g_properties(y: f64, points: usize) -> Result<GReport> {
    if !(y > 0.0 && y < 0.5) {
        return domain(format!("y = {y} is outside (0, 1/2)"));
    }
    if points < 3 {
        return domain("need at least 3 grid points");
    }
    let grid = g_grid(points);
    let eval = |&x: &f64| -> Result<(f64, f64)> { Ok((g_breve(y, x)?, g_dyp_at_center(y, x)?)) };
    #[cfg(feature = "parallel")]
    let vals: Vec<(f64, f64)> = {
        use rayon::prelude::*;
        grid.par_iter().map(eval).collect::<Result<_>>()?
    };
    #[cfg(not(feature = "parallel"))]
    let vals: Vec<(f64, f64)> = grid.iter().map(eval).collect::<Result<_>>()?;
    let breve: Vec<f64> = vals.iter().map(|v| v.0).collect();

    let mut failures = Vec::new();
    let mut fail = |check: &str, x: f64, value: f64| {
        failures.push(GFailure {
            check: check.to_string(),
            x,
            value,
        })
    };

    let mut second = vec![f64::NAN; points];
    for i in 1..points - 1 {
        let s = breve[i - 1] + breve[i + 1] - 2.0 * breve[i];
        second[i] = s;
        if !(s < CONCAVITY_SLACK) {
            fail("concavity", grid[i], s);
        }
    }
    for (x, g) in grid.iter().zip(&breve) {
        if !(*g > 0.0) {
            fail("positivity", *x, *g);
        }
    }
    let endpoint_values = (g_breve(y, ENDPOINT_X)?, g_breve(y, 1.0 - ENDPOINT_X)?);
    if !(endpoint_values.0.abs() < ENDPOINT_TOL) {
        fail("limit_at_0", ENDPOINT_X, endpoint_values.0);
    }
    if !(endpoint_values.1.abs() < ENDPOINT_TOL) {
        fail("limit_at_1", 1.0 - ENDPOINT_X, endpoint_values.1);
    }

    let (d0, d1) = g_breve_dx_limits(y)?;
    let fd = |x: f64| -> Result<f64> { Ok((g_breve(y, x + FD_STEP)? - g_breve(y, x - FD_STEP)?) / (2.0 * FD_STEP)) };
    let fd0 = fd(FD_X)?;
    let fd1 = fd(1.0 - FD_X)?;
    if !((fd0 - d0).abs() <= FD_TOL) {
        fail("dx_limit_0", FD_X, fd0 - d0);
    }
    if !((fd1 - d1).abs() <= FD_TOL) {
        fail("dx_limit_1", 1.0 - FD_X, fd1 - d1);
    }
    if !(d0 > 0.0) {
        fail("dx_limit_0_sign", 0.0, d0);
    }
    if !(d1 < 0.0) {
        fail("dx_limit_1_sign", 1.0, d1);
    }

    let (inf_b, sup_b) = dyp_sandwich(y);
    let mut dyp_range = (f64::INFINITY, f64::NEG_INFINITY);
    for (x, v) in grid.iter().zip(vals.iter().map(|v| v.1.abs())) {
        dyp_range = (dyp_range.0.min(v), dyp_range.1.max(v));
        if v < inf_b - BOUND_SLACK {
            fail("dyp_inf", *x, v);
        }
        if v > sup_b + BOUND_SLACK {
            fail("dyp_sup", *x, v);
        }
        if v > dyp_fixed_x_bound(y, *x) + BOUND_SLACK {
            fail("dyp_fixed_x", *x, v);
        }
    }

    let passed = failures.is_empty();
    Ok(GReport {
        y,
        max_second_difference: second.iter().copied().filter(|s| !s.is_nan()).fold(f64::NEG_INFINITY, f64::max),
        min_interior_value: breve.iter().copied().fold(f64::INFINITY, f64::min),
        grid,
        breve_values: breve,
        second_differences: second,
        endpoint_values,
        d0_limit: d0,
        d1_limit: d1,
        d0_finite_difference: fd0,
        d1_finite_difference: fd1,
        deriv_bound_sup: sup_b,
        deriv_bound_inf: inf_b,
        dyp_range,
        failures,
        passed,
    })
}
