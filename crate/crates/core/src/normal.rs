//! Standard normal density, distribution function and quantile.
//!
//! `Φ` uses the Maclaurin series `Φ(x) = 1/2 + φ(x) Σ x^{2n+1}/(2n+1)!!` for
//! `|x| < 3` and a continued fraction for the Mills ratio in the tails, so
//! tail probabilities keep full relative accuracy. The quantile starts from
//! the Abramowitz–Stegun 26.2.23 rational approximation and is finished by
//! Halley steps on `Φ`.

use std::f64::consts::PI;

const SERIES_LIMIT: f64 = 3.0;

pub fn pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// Upper tail `1 - Φ(x)` for `x >= SERIES_LIMIT`, via the continued fraction
/// `φ(x) / (x + 1/(x + 2/(x + 3/(x + ...))))` evaluated with modified Lentz.
fn upper_tail_cf(x: f64) -> f64 {
    let tiny = 1e-300;
    let mut f = x;
    let mut c = x;
    let mut d = 0.0;
    for n in 1..500 {
        let a = n as f64;
        d = x + a * d;
        if d.abs() < tiny {
            d = tiny;
        }
        c = x + a / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    pdf(x) / f
}

fn series(x: f64) -> f64 {
    let x2 = x * x;
    let mut term = x;
    let mut sum = x;
    let mut n = 0.0;
    loop {
        n += 1.0;
        term *= x2 / (2.0 * n + 1.0);
        sum += term;
        if term.abs() <= 1e-17 * sum.abs() {
            break;
        }
    }
    0.5 + pdf(x) * sum
}

pub fn cdf(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x.abs() < SERIES_LIMIT {
        series(x)
    } else if x > 0.0 {
        1.0 - upper_tail_cf(x)
    } else {
        upper_tail_cf(-x)
    }
}

/// `1 - Φ(x)` without cancellation for large positive `x`.
pub fn sf(x: f64) -> f64 {
    cdf(-x)
}

/// `Φ^{-1}(p)` for `0 < p < 1`; returns ±∞ at the endpoints and NaN outside.
pub fn quantile(p: f64) -> f64 {
    if !(0.0..=1.0).contains(&p) {
        return f64::NAN;
    }
    if p == 0.0 {
        return f64::NEG_INFINITY;
    }
    if p == 1.0 {
        return f64::INFINITY;
    }
    if p > 0.5 {
        return -quantile_lower(1.0 - p);
    }
    quantile_lower(p)
}

// Solves Φ(x) = p for p <= 1/2.
fn quantile_lower(p: f64) -> f64 {
    let t = (-2.0 * p.ln()).sqrt();
    let num = 2.515517 + 0.802853 * t + 0.010328 * t * t;
    let den = 1.0 + 1.432788 * t + 0.189269 * t * t + 0.001308 * t * t * t;
    let mut x = -(t - num / den);
    for _ in 0..8 {
        let err = cdf(x) - p;
        let dens = pdf(x);
        if dens == 0.0 {
            break;
        }
        let u = err / dens;
        // Halley: φ'/φ = -x
        let step = u / (1.0 + 0.5 * x * u);
        x -= step;
        if step.abs() <= 1e-15 * x.abs().max(1e-300) {
            break;
        }
    }
    x
}
