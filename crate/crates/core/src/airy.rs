//! The Airy function Ai and its derivative for complex arguments.
//!
//! Evaluation strategy:
//!
//! * `|z| <= 8`: Maclaurin series, summed in double-double arithmetic. On the
//!   negative real axis the series cancels by up to seven orders of magnitude
//!   and on the positive axis by up to fourteen, so plain doubles are not
//!   enough for a 1e-12 relative error.
//! * `|z| > 8`, `|arg z| <= 2π/3`: the exponentially decaying expansion in
//!   `ζ = (2/3) z^{3/2}`.
//! * `|z| > 8`, `|arg(-z)| < π/3`: the oscillatory expansion in terms of
//!   `cos(ξ - π/4)` and `sin(ξ - π/4)`.
//!
//! Arguments in the lower half-plane are reflected, so `Ai(conj z) = conj Ai(z)`
//! holds exactly.
//!
//! The Hadamard (zero) product is provided as an independent approximation
//! but is far too slowly convergent to be used as the evaluation engine.

use std::f64::consts::PI;
use std::sync::OnceLock;

use num_complex::Complex64;
use statrs::function::gamma::gamma;

use crate::dd::{Dd, DdComplex};
use crate::error::{ChernoffError, Result};

pub type ComplexValue = Complex64;

/// Radius below which the Maclaurin series is used.
pub const SERIES_RADIUS: f64 = 8.0;

/// Number of zeros held in the shared zero table.
pub const ZERO_TABLE_SIZE: usize = 2000;

// Ai(0) and -Ai'(0) as double-double pairs.
const AI0_DD: Dd = Dd::new(0.355_028_053_887_817_2, 2.052_336_324_362_12e-17);
const MINUS_AIP0_DD: Dd = Dd::new(0.258_819_403_792_806_8, -2.522_243_111_610_832e-17);

/// `Re ζ` above which `e^{-ζ}` is treated as an underflow.
const UNDERFLOW_EXPONENT: f64 = 700.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AiryConstants {
    pub ai0: f64,
    pub ai_prime0: f64,
    pub nu: f64,
}

/// Ai and Ai' at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AiryEval {
    pub ai: Complex64,
    pub ai_prime: Complex64,
    /// Set when `Ai(z)` is below the smallest normal double and was flushed to zero.
    pub underflow: bool,
}

/// Evaluate `Ai(z)` and `Ai'(z)` together.
pub fn airy(z: ComplexValue) -> AiryEval {
    debug_assert!(z.re.is_finite() && z.im.is_finite());
    if z.im < 0.0 {
        let up = airy(z.conj());
        return AiryEval {
            ai: up.ai.conj(),
            ai_prime: up.ai_prime.conj(),
            underflow: up.underflow,
        };
    }
    if z.norm() <= SERIES_RADIUS {
        maclaurin(z)
    } else if z.arg().abs() <= 2.0 * PI / 3.0 {
        asymptotic_decaying(z)
    } else {
        asymptotic_oscillatory(z)
    }
}

pub fn ai(z: ComplexValue) -> ComplexValue {
    airy(z).ai
}

pub fn ai_prime(z: ComplexValue) -> ComplexValue {
    airy(z).ai_prime
}

/// Real-argument convenience wrapper returning `(Ai(x), Ai'(x))`.
pub fn airy_real(x: f64) -> (f64, f64) {
    let e = airy(Complex64::new(x, 0.0));
    (e.ai.re, e.ai_prime.re)
}

/// Ai(0), Ai'(0) and ν = -Ai'(0)/Ai(0) from their Gamma-function closed forms.
pub fn airy_constants() -> AiryConstants {
    let g13 = gamma(1.0 / 3.0);
    let g23 = gamma(2.0 / 3.0);
    let ai0 = 1.0 / (3f64.powf(2.0 / 3.0) * g23);
    let ai_prime0 = -1.0 / (3f64.cbrt() * g13);
    let nu = 3f64.cbrt() * g23 / g13;
    AiryConstants { ai0, ai_prime0, nu }
}

fn maclaurin(z: Complex64) -> AiryEval {
    let zd = DdComplex::from_c64(z);
    let z3 = zd * zd * zd;
    let one = DdComplex::new(Dd::from_f64(1.0), Dd::ZERO);

    // f = Σ z^{3k} 3^k (1/3)_k / (3k)!,  g = Σ z^{3k+1} 3^k (2/3)_k / (3k+1)!
    let mut tf = one;
    let mut tg = zd;
    let mut tfp = (zd * zd).div_f64(2.0);
    let mut tgp = one;
    let mut f = tf;
    let mut g = tg;
    let mut fp = tfp;
    let mut gp = tgp;

    for k in 1..200usize {
        let kf = k as f64;
        tf = (tf * z3).div_f64((3.0 * kf - 1.0) * (3.0 * kf));
        tg = (tg * z3).div_f64((3.0 * kf) * (3.0 * kf + 1.0));
        tgp = (tgp * z3).div_f64((3.0 * kf - 2.0) * (3.0 * kf));
        if k >= 2 {
            tfp = (tfp * z3).div_f64((3.0 * kf - 3.0) * (3.0 * kf - 1.0));
            fp = fp + tfp;
        }
        f = f + tf;
        g = g + tg;
        gp = gp + tgp;

        let term = tf.norm_inf().max(tg.norm_inf()).max(tfp.norm_inf()).max(tgp.norm_inf());
        let scale = f.norm_inf().max(g.norm_inf()).max(fp.norm_inf()).max(gp.norm_inf());
        if k >= 2 && term <= 1e-33 * scale {
            break;
        }
    }

    let ai = (f.scale(AI0_DD) - g.scale(MINUS_AIP0_DD)).to_c64();
    let ai_prime = (fp.scale(AI0_DD) - gp.scale(MINUS_AIP0_DD)).to_c64();
    AiryEval { ai, ai_prime, underflow: false }
}

/// Coefficients `u_k`, `v_k` of the large-argument expansions.
fn expansion_coefficients() -> &'static [(f64, f64)] {
    static COEFFS: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    COEFFS.get_or_init(|| {
        let mut out = Vec::with_capacity(64);
        let mut u = 1.0f64;
        out.push((1.0, 1.0));
        for k in 1..64 {
            let kf = k as f64;
            u *= (6.0 * kf - 5.0) * (6.0 * kf - 3.0) * (6.0 * kf - 1.0) / ((2.0 * kf - 1.0) * 216.0 * kf);
            let v = -(6.0 * kf + 1.0) / (6.0 * kf - 1.0) * u;
            out.push((u, v));
        }
        out
    })
}

fn asymptotic_decaying(z: Complex64) -> AiryEval {
    let zeta = z.powf(1.5) * (2.0 / 3.0);
    if zeta.re > UNDERFLOW_EXPONENT {
        return AiryEval {
            ai: Complex64::new(0.0, 0.0),
            ai_prime: Complex64::new(0.0, 0.0),
            underflow: true,
        };
    }
    let inv = zeta.inv();
    let coeffs = expansion_coefficients();

    let mut sum_u = Complex64::new(1.0, 0.0);
    let mut sum_v = Complex64::new(1.0, 0.0);
    let mut power = Complex64::new(1.0, 0.0);
    let mut last = f64::INFINITY;
    for (k, &(u, v)) in coeffs.iter().enumerate().skip(1) {
        power *= -inv;
        let tu = power * u;
        let tv = power * v;
        let mag = tu.norm().max(tv.norm());
        if mag > last {
            break;
        }
        sum_u += tu;
        sum_v += tv;
        last = mag;
        if mag < 1e-17 || k == coeffs.len() - 1 {
            break;
        }
    }

    let quarter = z.powf(0.25);
    let pref = (-zeta).exp() / (2.0 * PI.sqrt());
    let ai = pref / quarter * sum_u;
    let ai_prime = -pref * quarter * sum_v;
    let underflow = ai.norm() < f64::MIN_POSITIVE;
    if underflow {
        return AiryEval {
            ai: Complex64::new(0.0, 0.0),
            ai_prime: Complex64::new(0.0, 0.0),
            underflow: true,
        };
    }
    AiryEval { ai, ai_prime, underflow: false }
}

fn asymptotic_oscillatory(z: Complex64) -> AiryEval {
    let w = -z;
    let xi = w.powf(1.5) * (2.0 / 3.0);
    let inv = xi.inv();
    let coeffs = expansion_coefficients();

    // Even-index terms feed P and R, odd-index terms feed Q and S.
    let mut p = Complex64::new(1.0, 0.0);
    let mut r = Complex64::new(1.0, 0.0);
    let mut q = Complex64::new(0.0, 0.0);
    let mut s = Complex64::new(0.0, 0.0);
    let mut power = Complex64::new(1.0, 0.0);
    let mut last = f64::INFINITY;
    for (n, &(u, v)) in coeffs.iter().enumerate().skip(1) {
        power *= inv;
        let sign = if (n / 2) % 2 == 0 { 1.0 } else { -1.0 };
        let tu = power * (sign * u);
        let tv = power * (sign * v);
        let mag = tu.norm().max(tv.norm());
        if mag > last {
            break;
        }
        if n % 2 == 0 {
            p += tu;
            r += tv;
        } else {
            q += tu;
            s += tv;
        }
        last = mag;
        if mag < 1e-17 {
            break;
        }
    }

    let phase = xi - PI / 4.0;
    let (c, sn) = (phase.cos(), phase.sin());
    let quarter = w.powf(0.25);
    let ai = (c * p + sn * q) / (PI.sqrt() * quarter);
    let ai_prime = quarter / PI.sqrt() * (sn * r - c * s);
    AiryEval { ai, ai_prime, underflow: false }
}

/// The leading-order location of the k-th zero, `((3/8)π(4k-1))^{2/3}`.
pub fn airy_zero_seed(k: usize) -> f64 {
    (3.0 / 8.0 * PI * (4.0 * k as f64 - 1.0)).powf(2.0 / 3.0)
}

const NEWTON_MAX_ITER: usize = 60;

fn refine_zero(k: usize) -> Result<f64> {
    let mut a = airy_zero_seed(k);
    for _ in 0..NEWTON_MAX_ITER {
        let (value, slope) = airy_real(-a);
        // d/da Ai(-a) = -Ai'(-a)
        let step = value / slope;
        a += step;
        if step.abs() <= 4.0 * f64::EPSILON * a {
            // one more step to settle the last bit
            let (value, slope) = airy_real(-a);
            return Ok(a + value / slope);
        }
    }
    Err(ChernoffError::Convergence {
        context: "Airy zero Newton iteration",
        iterations: NEWTON_MAX_ITER,
    })
}

/// The first `count` zeros `a_1 < a_2 < ...` of `Ai(-x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AiryZeros {
    pub values: Vec<f64>,
    pub count: usize,
}

fn zero_table() -> &'static Result<Vec<f64>> {
    static TABLE: OnceLock<Result<Vec<f64>>> = OnceLock::new();
    TABLE.get_or_init(|| (1..=ZERO_TABLE_SIZE).map(refine_zero).collect())
}

fn table_error(e: &ChernoffError) -> ChernoffError {
    match e {
        ChernoffError::Convergence { context, iterations } => ChernoffError::Convergence {
            context,
            iterations: *iterations,
        },
        other => ChernoffError::Domain(other.to_string()),
    }
}

/// The k-th zero `a_k > 0` of `Ai(-x)`, `k >= 1`.
pub fn airy_zero(k: usize) -> Result<f64> {
    if k == 0 {
        return Err(ChernoffError::Domain("Airy zeros are indexed from 1".into()));
    }
    if k <= ZERO_TABLE_SIZE {
        match zero_table() {
            Ok(t) => Ok(t[k - 1]),
            Err(e) => Err(table_error(e)),
        }
    } else {
        refine_zero(k)
    }
}

pub fn airy_zeros(count: usize) -> Result<AiryZeros> {
    let values = if count <= ZERO_TABLE_SIZE {
        match zero_table() {
            Ok(t) => t[..count].to_vec(),
            Err(e) => return Err(table_error(e)),
        }
    } else {
        (1..=count).map(airy_zero).collect::<Result<Vec<_>>>()?
    };
    Ok(AiryZeros { values, count })
}

/// Truncated Hadamard product `Ai(0) e^{-νz} Π_{k≤m} (1 + z/a_k) e^{-z/a_k}`.
pub fn ai_hadamard(z: ComplexValue, m: usize) -> Result<ComplexValue> {
    let consts = airy_constants();
    let zeros = airy_zeros(m)?;
    let mut prod = Complex64::new(consts.ai0, 0.0) * (-consts.nu * z).exp();
    for &a in &zeros.values {
        let r = z / a;
        prod *= (1.0 + r) * (-r).exp();
    }
    Ok(prod)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn constants_match_closed_forms() {
        let k = airy_constants();
        assert!((k.ai0 - 0.35503).abs() < 1e-5);
        assert!((k.ai_prime0 + 0.25882).abs() < 1e-5);
        assert!((k.nu - 0.729011).abs() < 1e-6);
        assert!((k.nu * k.ai0 + k.ai_prime0).abs() < 1e-14);
        assert!((k.nu + k.ai_prime0 / k.ai0).abs() < 1e-15);
    }

    #[test]
    fn series_at_origin_reproduces_constants() {
        let e = airy(c(0.0, 0.0));
        let k = airy_constants();
        assert!((e.ai.re - k.ai0).abs() < 1e-15);
        assert!((e.ai_prime.re - k.ai_prime0).abs() < 1e-15);
    }

    #[test]
    fn conjugate_symmetry_is_exact() {
        for &(x, y) in &[(1.0, 2.0), (-5.0, 3.0), (12.0, 4.0), (-20.0, 0.5), (0.0, 9.0)] {
            let up = airy(c(x, y));
            let down = airy(c(x, -y));
            assert_eq!(up.ai.conj(), down.ai);
            assert_eq!(up.ai_prime.conj(), down.ai_prime);
        }
    }

    #[test]
    fn underflow_is_flagged_not_subnormal() {
        let e = airy(c(200.0, 0.0));
        assert!(e.underflow);
        assert_eq!(e.ai, c(0.0, 0.0));
        let ok = airy(c(50.0, 0.0));
        assert!(!ok.underflow);
        assert!(ok.ai.re > 0.0);
    }

    #[test]
    fn zero_seed_k1() {
        let s = airy_zero_seed(1);
        assert!((s - (9.0 * PI / 8.0).powf(2.0 / 3.0)).abs() < 1e-15);
    }

    #[test]
    fn zero_index_rejected() {
        assert!(airy_zero(0).is_err());
    }

    #[test]
    fn hadamard_at_origin_and_first_zero() {
        let k = airy_constants();
        for m in [0, 1, 10, 100] {
            assert_eq!(ai_hadamard(c(0.0, 0.0), m).unwrap(), c(k.ai0, 0.0));
        }
        let a1 = airy_zero(1).unwrap();
        assert_eq!(ai_hadamard(c(-a1, 0.0), 1).unwrap().norm(), 0.0);
    }

    #[test]
    fn branches_agree_at_switchover() {
        for angle in [0.0, 0.5, 1.2, 2.0, 2.2, 2.6, PI] {
            let z = Complex64::from_polar(SERIES_RADIUS, angle);
            let series = maclaurin(z);
            let asym = if angle <= 2.0 * PI / 3.0 {
                asymptotic_decaying(z)
            } else {
                asymptotic_oscillatory(z)
            };
            let scale = series.ai.norm();
            assert!((series.ai - asym.ai).norm() <= 1e-12 * scale, "angle {angle}");
            let scale = series.ai_prime.norm();
            assert!((series.ai_prime - asym.ai_prime).norm() <= 1e-12 * scale, "angle {angle}");
        }
    }
}
