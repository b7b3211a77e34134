//! Browser bindings for the demo page in `www/`.
//!
//! Every export takes plain numbers and returns a JSON string. Failures come
//! back as `{"error": "..."}` so the page needs only one parsing path.

use bgt_core::fmf::{self, BinomialMode, FMFParams};
use bgt_core::{gfunc, regions};
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

fn respond(r: Result<Value, String>) -> String {
    match r {
        Ok(v) => v.to_string(),
        Err(e) => json!({ "error": e }).to_string(),
    }
}

fn grid(start: f64, stop: f64, step: f64) -> Result<Vec<f64>, String> {
    if !(step > 0.0 && stop >= start) || (stop - start) / step > 1e5 {
        return Err("grid needs step > 0, stop >= start and at most 1e5 points".into());
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize;
    Ok((0..=count).map(|i| start + i as f64 * step).collect())
}

/// Conditional and unconditional first moment curves on `start:stop:step`.
/// A non-positive `a` selects `a_inf(alpha, C) + 0.01`.
#[wasm_bindgen]
pub fn fmf_curve(n: f64, alpha: f64, c: f64, a: f64, continuous: bool, start: f64, stop: f64, step: f64) -> String {
    respond((|| {
        if !(n >= 2.0 && n < 1.8e19) {
            return Err("n must lie in [2, 1.8e19)".to_string());
        }
        let a = if a > 0.0 { a } else { regions::a_inf(alpha, c).map_err(|e| e.to_string())? + 0.01 };
        let mode = if continuous { BinomialMode::Continuous } else { BinomialMode::Floored };
        let params = FMFParams::surrogate(n as u64, alpha, c, a).map_err(|e| e.to_string())?.with_mode(mode);
        params.validate().map_err(|e| e.to_string())?;
        let xs = grid(start, stop, step)?;
        let curve = fmf::solve_curve(&params, &xs, true).map_err(|e| e.to_string())?;
        Ok(json!({
            "k": params.k,
            "a": a,
            "x": curve.x_grid,
            "y": curve.y,
            "y_unconditional": curve.y_unconditional,
            "trend": fmf::trend(&curve.y),
            "nonmonotonicity": fmf::nonmonotonicity(&curve),
        }))
    })())
}

/// Which assumptions hold across an `n_alpha x n_c` grid of the (alpha, C) plane.
#[wasm_bindgen]
pub fn region_scan(alpha_lo: f64, alpha_hi: f64, c_lo: f64, c_hi: f64, n_alpha: usize, n_c: usize) -> String {
    respond((|| {
        if n_alpha * n_c > 40_000 {
            return Err("at most 40000 grid points".to_string());
        }
        let r = regions::region_scan((alpha_lo, alpha_hi), (c_lo, c_hi), n_alpha, n_c).map_err(|e| e.to_string())?;
        serde_json::to_value(r).map_err(|e| e.to_string())
    })())
}

/// The critical constant C* for one alpha.
#[wasm_bindgen]
pub fn critical_c(alpha: f64) -> String {
    respond(
        regions::critical_c(alpha)
            .map_err(|e| e.to_string())
            .and_then(|r| serde_json::to_value(r).map_err(|e| e.to_string())),
    )
}

/// G-breve on an even grid together with its shape certificate.
#[wasm_bindgen]
pub fn g_curve(y: f64, points: usize) -> String {
    respond((|| {
        if !(3..=20_001).contains(&points) {
            return Err("points must lie in [3, 20001]".to_string());
        }
        let r = gfunc::verify_g_properties(y, points).map_err(|e| e.to_string())?;
        Ok(json!({
            "y": r.y,
            "x": r.grid,
            "g": r.breve_values,
            "passed": r.passed,
            "min_interior_value": r.min_interior_value,
            "max_second_difference": r.max_second_difference,
            "failures": r.failures.len(),
        }))
    })())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> Value {
        serde_json::from_str(s).unwrap()
    }

    #[test]
    fn grid_bounds() {
        assert_eq!(grid(0.0, 0.2, 0.002).unwrap().len(), 101);
        assert!(grid(0.0, 1.0, 0.0).is_err());
        assert!(grid(1.0, 0.0, 0.1).is_err());
    }

    #[test]
    fn errors_are_json() {
        let v = parse(&critical_c(2.0));
        assert!(v["error"].is_string());
        assert!(parse(&g_curve(0.2, 1)).get("error").is_some());
    }
}
