use bgt_web::{critical_c, fmf_curve, g_curve, region_scan};
use serde_json::Value;

fn parse(s: String) -> Value {
    serde_json::from_str(&s).unwrap()
}

#[test]
fn fmf_curve_has_both_columns() {
    let v = parse(fmf_curve(1e10, 0.01, 1.2, 1.17, true, 0.0, 0.2, 0.01));
    assert!(v.get("error").is_none(), "{v}");
    let x = v["x"].as_array().unwrap();
    assert_eq!(x.len(), 21);
    assert_eq!(v["y"].as_array().unwrap().len(), 21);
    assert_eq!(v["y_unconditional"].as_array().unwrap().len(), 21);
    assert!(v["y"][0].as_f64().unwrap() > 0.0);
}

#[test]
fn fmf_default_a() {
    let v = parse(fmf_curve(1e10, 0.01, 1.2, 0.0, true, 0.0, 0.1, 0.05));
    assert!(v["a"].as_f64().unwrap() > 1.0, "{v}");
}

#[test]
fn fmf_rejects_bad_input() {
    assert!(parse(fmf_curve(1.0, 0.01, 1.2, 1.17, true, 0.0, 0.2, 0.01))["error"].is_string());
    assert!(parse(fmf_curve(1e10, 0.01, 1.2, 1.17, true, 0.0, 0.2, -1.0))["error"].is_string());
}

#[test]
fn region_scan_small_grid() {
    let v = parse(region_scan(1e-6, 0.02, 1.1, 1.9, 3, 5));
    assert_eq!(v["points"].as_array().unwrap().len(), 15);
    assert!(parse(region_scan(1e-6, 0.02, 1.1, 1.9, 300, 300))["error"].is_string());
}

#[test]
fn critical_c_matches_cli_value() {
    let v = parse(critical_c(1e-8));
    assert!((v["C"].as_f64().unwrap() - 1.47491).abs() < 5e-4, "{v}");
}

#[test]
fn g_curve_certifies() {
    let v = parse(g_curve(0.2, 401));
    assert_eq!(v["passed"], true);
    assert_eq!(v["g"].as_array().unwrap().len(), 401);
}
