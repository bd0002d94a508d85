use chernoff::airy::airy_constants;
use chernoff::gfunc::{g, GFunction, GParams, QuadratureConfig};
use chernoff::quad::{integrate, Adaptive};
use num_complex::Complex64;

fn unit() -> GFunction {
    GFunction::new(GParams::new(1.0).unwrap()).unwrap()
}

#[test]
fn matches_multiprecision_quadrature() {
    // mpmath, 25 digits, same inversion integral over [0, 40]
    let gf = unit();
    for (x, want) in [(-2.0, 0.0061886764436720646), (0.0, 1.2315393278768919), (1.0, 2.2180424754769871), (2.0, 0.039168888470809241)] {
        let got = gf.g(x).unwrap();
        assert!((got - want).abs() < 1e-12, "g({x}) = {got}, want {want}");
    }
    assert!((gf.g_deriv(0.0, 1).unwrap() - 2.2934608367681126).abs() < 1e-11);
    assert!((gf.g_deriv(0.0, 2).unwrap() - 2.1742346043463839).abs() < 1e-10);
}

#[test]
fn total_mass_is_transform_at_zero() {
    let gf = unit();
    let want = 2f64.cbrt() / airy_constants().ai0;
    let mass = integrate(|x| gf.g(x).unwrap(), -16.0, 5.0, Adaptive::with_abs_tol(1e-10).panels(21)).unwrap();
    assert!((mass.value - want).abs() < 1e-6, "{} vs {want}", mass.value);
}

#[test]
fn left_tail_decays_monotonically() {
    let gf = unit();
    let mut prev = f64::INFINITY;
    for x in [-2.0, -3.0, -4.0, -5.0, -6.0, -7.0, -8.0] {
        let val = gf.g(x).unwrap();
        assert!(val < prev);
        prev = val;
    }
    // the left tail is exponential with rate 2^{1/3} a_1 ≈ 2.95, not faster
    assert!(gf.g(-6.0).unwrap() < 1e-7);
    assert!(gf.g(-8.0).unwrap() < 1e-8);
}

#[test]
fn scaling_relation_between_drifts() {
    let base = GFunction::new(GParams::new(2f64.powf(-0.5)).unwrap()).unwrap();
    for c in [0.5, 1.0, 2.0] {
        let gf = GFunction::new(GParams::new(c).unwrap()).unwrap();
        let k = (2.0 * c * c).cbrt();
        for x in [-1.0, 0.0, 1.0] {
            let lhs = gf.g(x).unwrap();
            let rhs = 2f64.powf(1.0 / 6.0) * c.cbrt() * base.g(k * x).unwrap();
            assert!((lhs - rhs).abs() < 1e-8, "c = {c}, x = {x}: {lhs} vs {rhs}");
        }
        let lhs = gf.v(0.7).unwrap();
        let rhs = k * k * base.v(k * 0.7).unwrap();
        assert!((lhs - rhs).abs() < 1e-6, "v scaling at c = {c}");
    }
}

#[test]
fn derivatives_match_finite_differences() {
    let gf = unit();
    let h = 1e-4;
    let fd1 = (gf.g(h).unwrap() - gf.g(-h).unwrap()) / (2.0 * h);
    assert!((fd1 - gf.g_deriv(0.0, 1).unwrap()).abs() < 1e-6);
    let fd2 = (gf.g(h).unwrap() - 2.0 * gf.g(0.0).unwrap() + gf.g(-h).unwrap()) / (h * h);
    assert!((fd2 - gf.g_deriv(0.0, 2).unwrap()).abs() < 1e-3);
    // third and fourth orders against differences of the exact second derivative
    let h = 1e-3;
    let d2 = |x: f64| gf.g_deriv(x, 2).unwrap();
    let fd3 = (d2(0.5 + h) - d2(0.5 - h)) / (2.0 * h);
    assert!((fd3 - gf.g_deriv(0.5, 3).unwrap()).abs() < 1e-4);
    let fd4 = (d2(0.5 + h) - 2.0 * d2(0.5) + d2(0.5 - h)) / (h * h);
    assert!((fd4 - gf.g_deriv(0.5, 4).unwrap()).abs() < 1e-3);
}

#[test]
fn v_matches_second_difference_of_minus_log_g() {
    let gf = unit();
    let h = 1e-3;
    for x in [-2.0, 2.0] {
        let nl = |t: f64| -gf.g(t).unwrap().ln();
        let fd = (nl(x + h) - 2.0 * nl(x) + nl(x - h)) / (h * h);
        let v = gf.v(x).unwrap();
        assert!((fd - v).abs() < 1e-4 * v.abs().max(1.0), "x = {x}: {fd} vs {v}");
    }
    assert!(gf.v(0.0).unwrap() > 0.0);
}

#[test]
fn nonnegative_and_log_concave_on_dense_grid() {
    let gf = unit();
    let mut x = -3.0;
    while x <= 3.0 + 1e-12 {
        let d = gf.derivatives(x, 2).unwrap();
        assert!(d.values[0] >= -1e-10);
        let v = (d.values[1].powi(2) - d.values[0] * d.values[2]) / d.values[0].powi(2);
        assert!(v >= -1e-8, "v({x}) = {v}");
        x += 0.01;
    }
}

#[test]
fn forward_transform_round_trip() {
    let gf = unit();
    for lambda in [0.0, 1.0, -1.0, 2.0, -2.0] {
        let re = integrate(|x| (lambda * x).cos() * gf.g(x).unwrap(), -16.0, 5.0, Adaptive::with_abs_tol(1e-9).panels(21)).unwrap();
        let im = integrate(|x| (lambda * x).sin() * gf.g(x).unwrap(), -16.0, 5.0, Adaptive::with_abs_tol(1e-9).panels(21)).unwrap();
        let got = Complex64::new(re.value, im.value);
        let want = gf.transform(lambda);
        assert!((got - want).norm() < 1e-5, "λ = {lambda}: {got} vs {want}");
    }
}

#[test]
fn doubling_truncation_changes_nothing() {
    let q = QuadratureConfig::default();
    let a = g(GParams::with_quadrature(1.0, q).unwrap(), 0.0).unwrap();
    let wide = QuadratureConfig { u_max: 2.0 * q.u_max, ..q };
    let b = g(GParams::with_quadrature(1.0, wide).unwrap(), 0.0).unwrap();
    assert!((a - b).abs() < q.abs_tol);
}
