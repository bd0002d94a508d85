//! Chernoff's distribution `Z_c`, the location of the maximum of
//! `W(t) - c t²`, with density `f(t) = ½ g_c(t) g_c(-t)`.
//!
//! [`ChernoffDist`] evaluates the density directly from [`GFunction`] and
//! caches the CDF on Chebyshev–Lobatto knots over `[-L, L]`, `L = L_1 c^{-2/3}`.
//! Only the left half is integrated; the right half follows from symmetry.
//! Quantiles invert a monotone cubic Hermite interpolant of the cached CDF
//! and are polished by Newton steps on the exact CDF.
//!
//! The log-concavity diagnostics live here too: `w = (-log f)'' = v(t) + v(-t)`,
//! PF₂ determinants, the Airy-kernel correlation inequality, and the
//! Gaussian transport map `T = F⁻¹ ∘ Φ`.

use std::cell::Cell;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ChernoffError, Result};
use crate::gfunc::{log_curvature, GFunction, GParams, QuadratureConfig, MAX_ORDER};
use crate::normal;
use crate::quad::{self, Adaptive};

/// Construction parameters for [`ChernoffDist`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChernoffConfig {
    /// Half-width of the cached interval at `c = 1`; scaled by `c^{-2/3}`.
    pub half_width: f64,
    /// Number of CDF knots on `[-L, L]`.
    pub knots: usize,
    pub quad: QuadratureConfig,
}

impl Default for ChernoffConfig {
    fn default() -> Self {
        ChernoffConfig { half_width: 3.0, knots: 1200, quad: QuadratureConfig::default() }
    }
}

/// Chernoff's distribution for drift coefficient `c`.
#[derive(Debug)]
pub struct ChernoffDist {
    g: GFunction,
    config: ChernoffConfig,
    l: f64,
    /// Knots on `[-L, L]`, increasing; symmetric about 0.
    knots: Vec<f64>,
    cdf: Vec<f64>,
    pdf: Vec<f64>,
    /// Fritsch–Carlson limited Hermite slopes.
    slopes: Vec<f64>,
}

impl ChernoffDist {
    pub fn new(c: f64) -> Result<Self> {
        Self::with_config(c, ChernoffConfig::default())
    }

    pub fn with_config(c: f64, config: ChernoffConfig) -> Result<Self> {
        let params = GParams::with_quadrature(c, config.quad)?;
        if !(config.half_width > 0.0) || config.knots < 4 {
            return Err(ChernoffError::Domain("need half_width > 0 and at least 4 knots".into()));
        }
        let g = GFunction::new(params)?;
        let l = config.half_width * c.powf(-2.0 / 3.0);
        let n = config.knots;

        let knots: Vec<f64> = (0..n)
            .map(|j| -l * (std::f64::consts::PI * j as f64 / (n - 1) as f64).cos())
            .collect();
        // left half including the middle knot(s)
        let half = n.div_ceil(2);

        let pdf_left: Vec<f64> = knots[..half].par_iter().map(|&t| pdf_of(&g, t)).collect::<Result<_>>()?;
        let increments: Vec<f64> = (1..half)
            .into_par_iter()
            .map(|i| integrate_pdf(&g, knots[i - 1], knots[i], 1e-15))
            .collect::<Result<_>>()?;
        let tail = integrate_pdf(&g, -2.0 * l, -l, 1e-15)?;

        let mut cdf = vec![0.0; n];
        let mut pdf = vec![0.0; n];
        cdf[0] = tail;
        pdf[..half].copy_from_slice(&pdf_left);
        for i in 1..half {
            cdf[i] = cdf[i - 1] + increments[i - 1];
        }
        for i in half..n {
            cdf[i] = 1.0 - cdf[n - 1 - i];
            pdf[i] = pdf[n - 1 - i];
        }
        for i in 1..n {
            if cdf[i] <= cdf[i - 1] {
                return Err(ChernoffError::Precision {
                    context: "Chernoff CDF cache not strictly increasing",
                    estimate: cdf[i - 1] - cdf[i],
                    tolerance: 0.0,
                });
            }
        }
        let slopes = limited_slopes(&knots, &cdf, &pdf);
        Ok(ChernoffDist { g, config, l, knots, cdf, pdf, slopes })
    }

    pub fn c(&self) -> f64 {
        self.g.c()
    }

    pub fn config(&self) -> &ChernoffConfig {
        &self.config
    }

    /// Half-width `L` of the cached interval.
    pub fn working_half_width(&self) -> f64 {
        self.l
    }

    pub fn gfunction(&self) -> &GFunction {
        &self.g
    }

    /// Cached `(knot, cdf, pdf)` triples.
    pub fn knots(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.knots.iter().zip(&self.cdf).zip(&self.pdf).map(|((&t, &p), &f)| (t, p, f))
    }

    pub fn pdf(&self, t: f64) -> Result<f64> {
        pdf_of(&self.g, t)
    }

    /// `log f(t)` and `(log f)'(t)`.
    pub fn log_pdf_and_slope(&self, t: f64) -> Result<(f64, f64)> {
        let a = self.g.derivatives(t, 1)?;
        let b = self.g.derivatives(-t, 1)?;
        let floor = self.g.floor();
        if a.values[0] <= floor || b.values[0] <= floor {
            return Err(ChernoffError::Domain(format!("density at {t} is below the numerical floor")));
        }
        let log_f = (0.5 * a.values[0] * b.values[0]).ln();
        let slope = a.values[1] / a.values[0] - b.values[1] / b.values[0];
        Ok((log_f, slope))
    }

    pub fn cdf(&self, t: f64) -> Result<f64> {
        if !t.is_finite() {
            return match t {
                f64::INFINITY => Ok(1.0),
                f64::NEG_INFINITY => Ok(0.0),
                _ => Err(ChernoffError::Domain("cdf of NaN".into())),
            };
        }
        if t > 0.0 {
            return Ok(1.0 - self.cdf(-t)?);
        }
        if t < -self.l {
            let lower = (2.0 * t).min(-2.0 * self.l);
            return Ok(integrate_pdf(&self.g, lower, t, 1e-15)?.max(0.0));
        }
        let i = self.interval(t);
        let (a, b) = (self.knots[i], self.knots[i + 1]);
        // integrate from the nearer knot
        let value = if t - a <= b - t {
            self.cdf[i] + integrate_pdf(&self.g, a, t, 1e-15)?
        } else {
            self.cdf[i + 1] - integrate_pdf(&self.g, t, b, 1e-15)?
        };
        Ok(value.clamp(0.0, 1.0))
    }

    /// CDF from the cached Hermite interpolant on `[-L, L]` (exact outside).
    /// Much cheaper than [`cdf`](Self::cdf); accurate to roughly 1e-10.
    pub fn cdf_cached(&self, t: f64) -> Result<f64> {
        if t.is_nan() || t.abs() > self.l {
            return self.cdf(t);
        }
        Ok(self.interpolate(self.interval(t), t).clamp(0.0, 1.0))
    }

    /// Index `i` with `knots[i] <= t <= knots[i + 1]`, for `t` in `[-L, L]`.
    fn interval(&self, t: f64) -> usize {
        let i = self.knots.partition_point(|&k| k <= t);
        i.saturating_sub(1).min(self.knots.len() - 2)
    }

    fn interpolate(&self, i: usize, t: f64) -> f64 {
        let (a, b) = (self.knots[i], self.knots[i + 1]);
        let h = b - a;
        let s = (t - a) / h;
        let s2 = s * s;
        let s3 = s2 * s;
        (2.0 * s3 - 3.0 * s2 + 1.0) * self.cdf[i]
            + (s3 - 2.0 * s2 + s) * h * self.slopes[i]
            + (-2.0 * s3 + 3.0 * s2) * self.cdf[i + 1]
            + (s3 - s2) * h * self.slopes[i + 1]
    }

    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !(p > 0.0 && p < 1.0) {
            return Err(ChernoffError::Domain(format!("quantile needs 0 < p < 1, got {p}")));
        }
        if p > 0.5 {
            return Ok(-self.quantile(1.0 - p)?);
        }
        if p == 0.5 {
            return Ok(0.0);
        }
        let mut t = if p < self.cdf[0] {
            -self.l
        } else {
            let i = self.cdf.partition_point(|&q| q <= p).saturating_sub(1).min(self.knots.len() - 2);
            let (mut lo, mut hi) = (self.knots[i], self.knots[i + 1]);
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if self.interpolate(i, mid) < p {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            0.5 * (lo + hi)
        };
        for _ in 0..50 {
            let f = self.pdf(t)?;
            if f <= 0.0 {
                return Err(ChernoffError::Domain(format!("quantile {p} lies where the density vanishes")));
            }
            let step = (self.cdf(t)? - p) / f;
            // keep far-tail Newton steps from overshooting
            let step = step.clamp(-0.5, 0.5);
            t -= step;
            if step.abs() <= 1e-14 * t.abs().max(1.0) {
                return Ok(t);
            }
        }
        Err(ChernoffError::Convergence { context: "Chernoff quantile", iterations: 50 })
    }

    /// `E Z_c^k` for `1 <= k <= 8`.
    pub fn moment(&self, k: u32) -> Result<f64> {
        if !(1..=8).contains(&k) {
            return Err(ChernoffError::Domain(format!("moment order must be in 1..=8, got {k}")));
        }
        let span = 2.0 * self.l;
        let err = Cell::new(None);
        let r = quad::integrate(
            |t| guarded(&err, self.pdf(t)) * t.powi(k as i32),
            -span,
            span,
            Adaptive::with_abs_tol(1e-13).panels(48),
        )?;
        if let Some(e) = err.into_inner() {
            return Err(e);
        }
        Ok(r.value)
    }

    /// `w(t) = (-log f)''(t) = v(t) + v(-t)`.
    pub fn w(&self, t: f64) -> Result<f64> {
        Ok(self.g.v(t)? + self.g.v(-t)?)
    }

    /// `σ₀ = w(0)^{-1/2}`, defined for `c = 1`.
    pub fn sigma0(&self) -> Result<f64> {
        if self.c() != 1.0 {
            return Err(ChernoffError::Domain(format!("sigma0 is defined at c = 1, not c = {}", self.c())));
        }
        Ok(self.w(0.0)?.powf(-0.5))
    }

    /// `det [f(x_i - y_j)]` for `x1 <= x2`, `y1 <= y2`; non-negative for a PF₂ density.
    pub fn pf2_check(&self, x: (f64, f64), y: (f64, f64)) -> Result<f64> {
        if x.0 > x.1 || y.0 > y.1 {
            return Err(ChernoffError::Domain(format!("pf2_check needs ordered pairs, got x = {x:?}, y = {y:?}")));
        }
        let f = |t: f64| self.pdf(t);
        Ok(f(x.0 - y.0)? * f(x.1 - y.1)? - f(x.0 - y.1)? * f(x.1 - y.0)?)
    }

    /// `w` over `grid`, its margin over `w(0)`, the local PF₂ determinants of
    /// consecutive grid points and a divided-difference probe of the
    /// convexity of `v`.
    pub fn strong_lc_profile(&self, grid: &[f64]) -> Result<DiagnosticsReport> {
        if grid.iter().any(|t| !t.is_finite()) {
            return Err(ChernoffError::Domain("grid must be finite".into()));
        }
        let floor = self.g.floor();
        let rows: Vec<(f64, f64, f64)> = grid
            .par_iter()
            .map(|&t| {
                let a = self.g.derivatives(t, 2)?;
                let b = self.g.derivatives(-t, 2)?;
                let f = 0.5 * a.values[0].max(0.0) * b.values[0].max(0.0);
                let va = log_curvature(a.values[0], a.values[1], a.values[2], floor, t)?;
                let vb = log_curvature(b.values[0], b.values[1], b.values[2], floor, -t)?;
                Ok((f, va, vb))
            })
            .collect::<Result<_>>()?;
        let f: Vec<f64> = rows.iter().map(|r| r.0).collect();
        let v: Vec<f64> = rows.iter().map(|r| r.1).collect();
        let w: Vec<f64> = rows.iter().map(|r| r.1 + r.2).collect();
        let neg_log_f = f.iter().map(|&x| -x.ln()).collect();

        let w0 = self.w(0.0)?;
        let strong_lc_margin = w.iter().fold(f64::INFINITY, |m, &x| m.min(x - w0));

        // For equally spaced points, x = (t_{i+1}, t_{i+2}), y = (0, h)
        // gives det = f(t_{i+1})² - f(t_i) f(t_{i+2}).
        let mut pf2_min_det = f64::INFINITY;
        let v_second_differences = second_differences(grid, &v);
        for i in 0..grid.len().saturating_sub(2) {
            let h1 = grid[i + 1] - grid[i];
            let h2 = grid[i + 2] - grid[i + 1];
            if (h1 - h2).abs() <= 1e-9 * h1.abs().max(h2.abs()) {
                pf2_min_det = pf2_min_det.min(f[i + 1] * f[i + 1] - f[i] * f[i + 2]);
            }
        }
        let v_convexity_violations = v_second_differences.iter().filter(|&&d| d < -1e-6).count();

        Ok(DiagnosticsReport {
            schema_version: SCHEMA_VERSION,
            c: self.c(),
            grid: grid.to_vec(),
            f,
            neg_log_f,
            w,
            v,
            w0,
            sigma0_est: w0.powf(-0.5),
            strong_lc_margin,
            pf2_min_det,
            corr_residual_min: f64::NAN,
            v_second_differences,
            v_convexity_violations,
        })
    }

    /// [`strong_lc_profile`](Self::strong_lc_profile) plus the correlation
    /// inequality swept over `[-3, 3]²` at `corr_step`.
    pub fn diagnose(&self, grid: &[f64], corr_step: Option<f64>) -> Result<DiagnosticsReport> {
        let mut report = self.strong_lc_profile(grid)?;
        if let Some(step) = corr_step {
            let corr = CorrelationKernel::new(self.config.quad)?;
            report.corr_residual_min = corr.grid_min(-3.0, 3.0, step)?.0;
        }
        Ok(report)
    }

    /// `T(z) = F⁻¹(Φ(z))` with a central-difference `T'`; `|z| > 5` is clamped.
    pub fn transport_map(&self, z: f64) -> Result<TransportPoint> {
        if !z.is_finite() {
            return Err(ChernoffError::Domain(format!("z must be finite, got {z}")));
        }
        let clamped = z.abs() > TRANSPORT_LIMIT;
        let z = z.clamp(-TRANSPORT_LIMIT, TRANSPORT_LIMIT);
        let t = |z: f64| self.quantile(normal::cdf(z));
        let value = t(z)?;
        let h = 1e-3;
        let derivative = (t(z + h)? - t(z - h)?) / (2.0 * h);
        Ok(TransportPoint { z, value, derivative, clamped })
    }

    /// Second divided differences of `T⁻¹(w) = Φ⁻¹(F(w))` over `grid`
    /// (positive `w`); convexity would make them all non-negative.
    pub fn van_zwet_probe(&self, grid: &[f64]) -> Result<Vec<f64>> {
        if grid.iter().any(|&w| !(w > 0.0)) {
            return Err(ChernoffError::Domain("van Zwet probe needs w > 0".into()));
        }
        let inv: Vec<f64> = grid.iter().map(|&w| Ok(normal::quantile(self.cdf(w)?))).collect::<Result<_>>()?;
        Ok(second_differences(grid, &inv))
    }
}

const TRANSPORT_LIMIT: f64 = 5.0;

/// Version of the serialized diagnostics layout.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TransportPoint {
    pub z: f64,
    pub value: f64,
    pub derivative: f64,
    pub clamped: bool,
}

/// Log-concavity diagnostics on a grid. `corr_residual_min` is NaN unless
/// the correlation sweep was requested.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagnosticsReport {
    pub schema_version: u32,
    pub c: f64,
    pub grid: Vec<f64>,
    pub f: Vec<f64>,
    pub neg_log_f: Vec<f64>,
    pub w: Vec<f64>,
    pub v: Vec<f64>,
    pub w0: f64,
    pub sigma0_est: f64,
    pub strong_lc_margin: f64,
    pub pf2_min_det: f64,
    pub corr_residual_min: f64,
    /// Second divided differences of `v` at interior grid points.
    pub v_second_differences: Vec<f64>,
    pub v_convexity_violations: usize,
}

impl DiagnosticsReport {
    /// `min w` over the grid.
    pub fn w_min(&self) -> f64 {
        self.w.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// `f_{Z_c}(t) - c^{2/3} f_1(c^{2/3} t)`, from two independent inversions.
pub fn scaling_check(c: f64, t: f64) -> Result<f64> {
    scaling_check_with(c, t, QuadratureConfig::default())
}

pub fn scaling_check_with(c: f64, t: f64, quad: QuadratureConfig) -> Result<f64> {
    let gc = GFunction::new(GParams::with_quadrature(c, quad)?)?;
    if c == 1.0 {
        return Ok(0.0);
    }
    let g1 = GFunction::new(GParams::with_quadrature(1.0, quad)?)?;
    let k = c.powf(2.0 / 3.0);
    Ok(pdf_of(&gc, t)? - k * pdf_of(&g1, k * t)?)
}

/// The three frequency integrals of the Airy-kernel correlation inequality.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CorrelationTerms {
    /// `∫ sin²(uy) φh du`
    pub sin2: f64,
    /// `∫ cos²(uy) φh du`
    pub cos2: f64,
    /// `∫ sin(uy) cos(uy) ψh du`
    pub sincos: f64,
}

impl CorrelationTerms {
    /// `sin2 · cos2 + sincos²`, non-negative by log-concavity of `g`.
    pub fn lhs(&self) -> f64 {
        self.sin2 * self.cos2 + self.sincos * self.sincos
    }

    /// The same combination with the last term unsquared. Not sign-definite.
    pub fn unsquared_lhs(&self) -> f64 {
        self.sin2 * self.cos2 + self.sincos
    }
}

/// Evaluates the correlation inequality with `h(u) = 1/|Ai(iu)|`,
/// `φ(u,x) h(u) = Re(e^{-iux}/Ai(iu))` and `ψ(u,x) h(u) = -Im(e^{-iux}/Ai(iu))`.
/// The kernel is that of `g_c` at `c = 2^{-1/2}`, so its cache is reused
/// across `(x, y)`.
#[derive(Debug)]
pub struct CorrelationKernel {
    g: GFunction,
}

impl CorrelationKernel {
    pub fn new(quad: QuadratureConfig) -> Result<Self> {
        Ok(CorrelationKernel { g: GFunction::new(GParams::with_quadrature(0.5f64.sqrt(), quad)?)? })
    }

    pub fn terms(&self, x: f64, y: f64) -> Result<CorrelationTerms> {
        if !(x.is_finite() && y.is_finite()) {
            return Err(ChernoffError::Domain("correlation inequality needs finite x, y".into()));
        }
        let tol = 1e-11;
        let tolerances = [tol; MAX_ORDER + 1];
        let r = self.g.kernel_integral(x.abs() + 2.0 * y.abs(), 3, &tolerances, |u, k, out| {
            let e: Complex64 = Complex64::new((u * x).cos(), -(u * x).sin()) * k;
            let (s, c) = (u * y).sin_cos();
            out[0] = s * s * e.re;
            out[1] = c * c * e.re;
            out[2] = -s * c * e.im;
        })?;
        Ok(CorrelationTerms { sin2: r.values[0], cos2: r.values[1], sincos: r.values[2] })
    }

    /// Minimum of `lhs` and of the unsquared form over `[lo, hi]²` at `step`.
    pub fn grid_min(&self, lo: f64, hi: f64, step: f64) -> Result<(f64, f64)> {
        if !(step > 0.0) || hi < lo {
            return Err(ChernoffError::Domain("correlation grid needs step > 0 and lo <= hi".into()));
        }
        let n = ((hi - lo) / step + 1e-9).floor() as usize + 1;
        let points: Vec<(f64, f64)> = (0..n)
            .flat_map(|i| (0..n).map(move |j| (lo + step * i as f64, lo + step * j as f64)))
            .collect();
        let mins = points
            .par_iter()
            .map(|&(x, y)| self.terms(x, y).map(|t| (t.lhs(), t.unsquared_lhs())))
            .collect::<Result<Vec<_>>>()?;
        Ok(mins.iter().fold((f64::INFINITY, f64::INFINITY), |m, v| (m.0.min(v.0), m.1.min(v.1))))
    }
}

/// Correlation-inequality LHS at `(x, y)` with the default quadrature.
pub fn correlation_inequality(x: f64, y: f64) -> Result<f64> {
    Ok(CorrelationKernel::new(QuadratureConfig::default())?.terms(x, y)?.lhs())
}

fn pdf_of(g: &GFunction, t: f64) -> Result<f64> {
    Ok(0.5 * g.g(t)? * g.g(-t)?)
}

fn guarded(slot: &Cell<Option<ChernoffError>>, value: Result<f64>) -> f64 {
    match value {
        Ok(v) => v,
        Err(e) => {
            let prior = slot.take();
            slot.set(Some(prior.unwrap_or(e)));
            0.0
        }
    }
}

fn integrate_pdf(g: &GFunction, a: f64, b: f64, abs_tol: f64) -> Result<f64> {
    let err = Cell::new(None);
    let r = quad::integrate(|t| guarded(&err, pdf_of(g, t)), a, b, Adaptive::with_abs_tol(abs_tol))?;
    match err.into_inner() {
        Some(e) => Err(e),
        None => Ok(r.value),
    }
}

/// Hermite slopes from the exact derivative, limited so the cubic stays monotone.
fn limited_slopes(x: &[f64], y: &[f64], d: &[f64]) -> Vec<f64> {
    let mut m = d.to_vec();
    for i in 0..x.len() - 1 {
        let delta = (y[i + 1] - y[i]) / (x[i + 1] - x[i]);
        if delta <= 0.0 {
            m[i] = 0.0;
            m[i + 1] = 0.0;
            continue;
        }
        let a = m[i] / delta;
        let b = m[i + 1] / delta;
        let r = a * a + b * b;
        if r > 9.0 {
            let tau = 3.0 / r.sqrt();
            m[i] = tau * a * delta;
            m[i + 1] = tau * b * delta;
        }
    }
    m
}

/// Second divided differences `f[x_{i-1}, x_i, x_{i+1}]` (times 2).
pub(crate) fn second_differences(x: &[f64], y: &[f64]) -> Vec<f64> {
    (1..x.len().saturating_sub(1))
        .map(|i| {
            let d1 = (y[i] - y[i - 1]) / (x[i] - x[i - 1]);
            let d2 = (y[i + 1] - y[i]) / (x[i + 1] - x[i]);
            2.0 * (d2 - d1) / (x[i + 1] - x[i - 1])
        })
        .collect()
}
