use std::f64::consts::PI;

use chernoff::gaussfact::{factorization_residual_scan, g_normal, g_normal_first_form, g_normal_integral, log_g_normal};
use chernoff::normal;

#[test]
fn value_at_origin() {
    let g0 = g_normal(0.0).unwrap();
    assert!((g0 - (2.0 / PI).powf(0.25)).abs() < 1e-15);
    assert!((0.5 * g0 * g0 - normal::pdf(0.0)).abs() < 1e-15);
}

#[test]
fn both_integral_forms_agree() {
    for z in [-1.0, 0.5, 2.0, -4.0, 6.0] {
        let a = g_normal(z).unwrap();
        let b = g_normal_first_form(z).unwrap();
        assert!((a - b).abs() < 1e-8 * a.max(1.0), "z = {z}: {a} vs {b}");
    }
}

#[test]
fn reproduces_the_normal_density() {
    let g = |z: f64| g_normal(z).unwrap();
    assert!((0.5 * g(1.0) * g(-1.0) - (-0.5f64).exp() / (2.0 * PI).sqrt()).abs() < 1e-8);
    let single = factorization_residual_scan(&[0.0]).unwrap();
    assert!(single.max_residual <= 1e-12);
    let grid: Vec<f64> = (0..=240).map(|i| -6.0 + 0.05 * i as f64).collect();
    let scan = factorization_residual_scan(&grid).unwrap();
    assert!(scan.max_residual <= 1e-8, "{}", scan.max_residual);
    assert!(scan.min_curvature >= -1e-8);
}

#[test]
fn large_arguments() {
    // for large z, log g ≈ log((2/π)^{1/4}) - π²/12 + z - z²/2
    let z = 30.0;
    let want = 0.25 * (2.0 / PI).ln() - PI * PI / 12.0 + z - 0.5 * z * z;
    assert!((log_g_normal(z).unwrap() - want).abs() < 1e-12);
    assert!(g_normal(41.0).is_err());
    assert!(g_normal(-40.0).unwrap() > 0.0);
}

#[test]
fn integrable() {
    let total = g_normal_integral(-30.0, 10.0).unwrap();
    assert!(total.is_finite() && total > 0.0);
    // the left tail decays like e^{z}
    let tail = g_normal_integral(-40.0, -30.0).unwrap();
    assert!(tail < 1e-12);
}
