//! The standard normal density in Chernoff's product form,
//! `φ(z) = ½ g(z) g(-z)`, with
//!
//! ```text
//! g(z) = (2/π)^{1/4} exp(π²/12 + z - L(e^z)),   L(x) = ∫_0^x log(1+t)/t dt
//!      = (2/π)^{1/4} e^z exp(∫_0^∞ log((e^s+1)/(e^s+e^z)) ds)
//! ```
//!
//! `L(x) = -Li₂(-x)`. For `z > 20` the reflection
//! `L(x) = π²/6 + ½ ln²x - L(1/x)` keeps the quadrature on a bounded range.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{ChernoffError, Result};
use crate::normal;
use crate::quad::{self, Adaptive};

/// Largest `|z|` accepted by [`g_normal`].
pub const Z_LIMIT: f64 = 40.0;
const REFLECT_ABOVE: f64 = 20.0;
const TOL: f64 = 1e-15;

/// `log(1+t)/t`, with the removable singularity at 0 handled by its series.
fn log1p_over_t(t: f64) -> f64 {
    if t.abs() < 1e-4 {
        1.0 - t / 2.0 + t * t / 3.0 - t * t * t / 4.0
    } else {
        t.ln_1p() / t
    }
}

/// `L(e^z) = ∫_0^{e^z} log(1+t)/t dt`.
fn dilog_integral(z: f64) -> Result<f64> {
    if z > REFLECT_ABOVE {
        let x = (-z).exp();
        let inner = quad::integrate(log1p_over_t, 0.0, x, Adaptive::with_abs_tol(TOL))?.value;
        return Ok(PI * PI / 6.0 + 0.5 * z * z - inner);
    }
    let x = z.exp();
    let head = quad::integrate(log1p_over_t, 0.0, x.min(1.0), Adaptive::with_abs_tol(TOL))?.value;
    if z <= 0.0 {
        return Ok(head);
    }
    // ∫_1^{e^z} log(1+t)/t dt = ∫_0^z log(1+e^s) ds
    let body = quad::integrate(|s| s.exp().ln_1p(), 0.0, z, Adaptive::with_abs_tol(TOL).panels(4))?.value;
    Ok(head + body)
}

fn check_z(z: f64) -> Result<()> {
    if z.is_finite() && z.abs() <= Z_LIMIT {
        Ok(())
    } else {
        Err(ChernoffError::Domain(format!("g_normal needs |z| <= {Z_LIMIT}, got {z}")))
    }
}

/// `log g(z)`.
pub fn log_g_normal(z: f64) -> Result<f64> {
    check_z(z)?;
    Ok(0.25 * (2.0 / PI).ln() + PI * PI / 12.0 + z - dilog_integral(z)?)
}

/// The factor `g` with `φ(z) = ½ g(z) g(-z)`.
pub fn g_normal(z: f64) -> Result<f64> {
    Ok(log_g_normal(z)?.exp())
}

/// `g` from the first integral form, with `u = e^{-s}`:
/// `∫_0^∞ log((e^s+1)/(e^s+e^z)) ds = ∫_0^1 (log(1+u) - log(1+u e^z)) / u du`.
pub fn g_normal_first_form(z: f64) -> Result<f64> {
    check_z(z)?;
    let ez = z.exp();
    let inner = quad::integrate(
        |u| log1p_over_t(u) - ez * log1p_over_t(u * ez),
        0.0,
        1.0,
        Adaptive::with_abs_tol(1e-14).panels(4),
    )?
    .value;
    Ok((0.25 * (2.0 / PI).ln() + z + inner).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GaussFactorValue {
    pub z: f64,
    pub g: f64,
    /// `½ g(z) g(-z) - φ(z)`.
    pub residual: f64,
}

pub fn factor_value(z: f64) -> Result<GaussFactorValue> {
    let g = g_normal(z)?;
    let residual = 0.5 * g * g_normal(-z)? - normal::pdf(z);
    Ok(GaussFactorValue { z, g, residual })
}

/// Factorization residuals over `grid`, their maximum modulus, and the
/// smallest second divided difference of `-log g` (non-negative if `g` is
/// log-concave).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FactorizationScan {
    pub values: Vec<GaussFactorValue>,
    pub max_residual: f64,
    pub min_curvature: f64,
}

pub fn factorization_residual_scan(grid: &[f64]) -> Result<FactorizationScan> {
    let values: Vec<GaussFactorValue> = grid.iter().map(|&z| factor_value(z)).collect::<Result<_>>()?;
    let max_residual = values.iter().fold(0.0f64, |m, v| m.max(v.residual.abs()));
    let neg_log: Vec<f64> = grid.iter().map(|&z| Ok(-log_g_normal(z)?)).collect::<Result<_>>()?;
    let min_curvature = crate::chernoff::second_differences(grid, &neg_log)
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    Ok(FactorizationScan { values, max_residual, min_curvature })
}

/// `∫_a^b g(z) dz`.
pub fn g_normal_integral(a: f64, b: f64) -> Result<f64> {
    check_z(a)?;
    check_z(b)?;
    let err = std::cell::Cell::new(None);
    let r = quad::integrate(
        |z| match g_normal(z) {
            Ok(v) => v,
            Err(e) => {
                err.set(Some(e));
                0.0
            }
        },
        a,
        b,
        Adaptive::with_abs_tol(1e-10).panels(16),
    )?;
    match err.into_inner() {
        Some(e) => Err(e),
        None => Ok(r.value),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dilog_at_one_is_pi_squared_over_twelve() {
        assert!((dilog_integral(0.0).unwrap() - PI * PI / 12.0).abs() < 1e-15);
    }

    #[test]
    fn reflection_is_continuous() {
        let below = {
            let x = REFLECT_ABOVE.exp();
            let head = quad::integrate(log1p_over_t, 0.0, 1.0, Adaptive::with_abs_tol(TOL)).unwrap().value;
            let body = quad::integrate(|s| s.exp().ln_1p(), 0.0, x.ln(), Adaptive::with_abs_tol(TOL).panels(4))
                .unwrap()
                .value;
            head + body
        };
        let above = dilog_integral(REFLECT_ABOVE + 1e-12).unwrap();
        assert!((below - above).abs() < 1e-10 * above);
    }

    #[test]
    fn series_branch_meets_library_log() {
        let t = 0.999_999e-4;
        assert!((log1p_over_t(t) - t.ln_1p() / t).abs() < 1e-15);
    }
}
