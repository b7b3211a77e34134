//! Shared output formatting.

/// Float rendered with 12 significant digits.
pub fn fmt12(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let s = format!("{:.11e}", x);
    // compact when the value is of moderate size
    let ax = x.abs();
    if (1e-4..1e12).contains(&ax) {
        let digits = 11 - ax.log10().floor() as i32;
        let s2 = format!("{:.*}", digits.max(0) as usize, x);
        if s2.contains('.') {
            return s2.trim_end_matches('0').trim_end_matches('.').to_string();
        }
        return s2;
    }
    s
}

/// Optional float; empty cell when absent.
pub fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt12).unwrap_or_default()
}
