//! The one-sided factor `g_c` of Chernoff's density, computed by Fourier
//! inversion of `2^{1/3} c^{-1/3} / Ai(i (2c²)^{-1/3} λ)`.
//!
//! Since `Ai(conj z) = conj Ai(z)` the inversion integral folds onto the
//! half line:
//!
//! ```text
//! g_c(x) = ((2/c)^{1/3} / π) ∫_0^U Re( e^{-iux} / Ai(i (2c²)^{-1/3} u) ) du
//! ```
//!
//! and the k-th derivative multiplies the integrand by `(-iu)^k`.
//!
//! The kernel `1/Ai(i s u)` does not depend on `x`, so it is evaluated once
//! per Gauss–Kronrod panel on a dyadic hierarchy over `[0, U]` and shared by
//! every subsequent evaluation. Each call refines panels locally until its
//! own error budget is met.

use std::f64::consts::PI;
use std::sync::atomic::{AtomicUsize, Ordering as AtomicOrdering};
use std::sync::OnceLock;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::airy::ai;
use crate::error::{ChernoffError, Result};
use crate::quad::{self, rescale_error, rule_from_values};

/// Highest derivative order supported by [`GFunction::derivatives`].
pub const MAX_ORDER: usize = 4;

const MAX_LEVEL: usize = 9;
const BASE_WIDTH: f64 = 1.25;

/// Controls the truncated frequency integral.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureConfig {
    /// Truncation point of the frequency integral.
    pub u_max: f64,
    /// Budget of kernel nodes a single evaluation may touch.
    pub nodes: usize,
    /// Absolute error target for `g`; derivative order k gets `10^k` times this.
    pub abs_tol: f64,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        QuadratureConfig { u_max: 40.0, nodes: 400_000, abs_tol: 1e-12 }
    }
}

impl QuadratureConfig {
    /// Bound on the neglected tail `(2/c)^{1/3}/π ∫_U^∞ u^k h(s u) du`, using
    /// `h(v) ~ 2√π v^{1/4} exp(-(√2/3) v^{3/2})` for `h = 1/|Ai(iv)|`.
    pub fn tail_bound(&self, c: f64, order: usize) -> f64 {
        tail_bound(c, self.u_max, order)
    }
}

fn tail_bound(c: f64, u_max: f64, order: usize) -> f64 {
    let s = (2.0 * c * c).powf(-1.0 / 3.0);
    let prefactor = (2.0 / c).cbrt() / PI;
    let h = |u: f64| {
        let v = s * u;
        2.0 * PI.sqrt() * v.powf(0.25) * (-(2f64.sqrt() / 3.0) * v.powf(1.5)).exp() * u.powi(order as i32)
    };
    // the integrand has dropped by e^{-60} well before u_max + span
    let span = 10.0 + 60f64.powf(2.0 / 3.0) / s;
    quad::integrate(h, u_max, u_max + span, quad::Adaptive::with_abs_tol(1e-300).panels(8))
        .map(|r| prefactor * r.value)
        .unwrap_or(f64::INFINITY)
}

/// Parameters of `g_c`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GParams {
    pub c: f64,
    pub quad: QuadratureConfig,
}

impl GParams {
    pub fn new(c: f64) -> Result<Self> {
        Self::with_quadrature(c, QuadratureConfig::default())
    }

    pub fn with_quadrature(c: f64, quad: QuadratureConfig) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(ChernoffError::Domain(format!("drift coefficient c must be positive, got {c}")));
        }
        if !(quad.u_max > 0.0 && quad.abs_tol > 0.0 && quad.nodes > 0) {
            return Err(ChernoffError::Domain("quadrature config must be positive".into()));
        }
        Ok(GParams { c, quad })
    }
}

struct KernelPanel {
    u: [f64; 15],
    k: [Complex64; 15],
}

/// `g_c` together with its cached frequency kernel.
pub struct GFunction {
    params: GParams,
    scale: f64,
    prefactor: f64,
    u_max: f64,
    base_panels: usize,
    levels: Vec<OnceLock<Vec<OnceLock<KernelPanel>>>>,
    kernel_evaluations: AtomicUsize,
}

impl std::fmt::Debug for GFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GFunction")
            .field("params", &self.params)
            .field("u_max", &self.u_max)
            .finish()
    }
}

/// Result of one inversion: derivative values and their error estimates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GDerivatives {
    pub values: [f64; MAX_ORDER + 1],
    pub errors: [f64; MAX_ORDER + 1],
    pub nodes: usize,
}

impl GFunction {
    pub fn new(params: GParams) -> Result<Self> {
        let params = GParams::with_quadrature(params.c, params.quad)?;
        let c = params.c;
        // grow U until the neglected tail of the highest derivative is negligible
        let mut u_max = params.quad.u_max;
        let mut grown = 0;
        while tail_bound(c, u_max, MAX_ORDER) > 1e-3 * params.quad.abs_tol {
            u_max *= 1.25;
            grown += 1;
            if grown > 40 {
                return Err(ChernoffError::Domain(format!("cannot bound frequency tail for c = {c}")));
            }
        }
        if grown > 0 {
            log::debug!("u_max raised from {} to {u_max} for c = {c}", params.quad.u_max);
        }
        let base_panels = (u_max / BASE_WIDTH).ceil() as usize;
        Ok(GFunction {
            params,
            scale: (2.0 * c * c).powf(-1.0 / 3.0),
            prefactor: (2.0 / c).cbrt() / PI,
            u_max,
            base_panels,
            levels: (0..=MAX_LEVEL).map(|_| OnceLock::new()).collect(),
            kernel_evaluations: AtomicUsize::new(0),
        })
    }

    pub fn params(&self) -> &GParams {
        &self.params
    }

    pub fn c(&self) -> f64 {
        self.params.c
    }

    /// The truncation point actually used (at least `quad.u_max`).
    pub fn u_max(&self) -> f64 {
        self.u_max
    }

    /// Number of Airy evaluations made so far for the kernel cache.
    pub fn kernel_evaluations(&self) -> usize {
        self.kernel_evaluations.load(AtomicOrdering::Relaxed)
    }

    /// `2^{1/3} c^{-1/3} / Ai(i s λ)`, the Fourier transform of `g_c`.
    pub fn transform(&self, lambda: f64) -> Complex64 {
        (2.0 / self.params.c).cbrt() / ai(Complex64::new(0.0, self.scale * lambda))
    }

    fn panel_width(&self, level: usize) -> f64 {
        self.u_max / (self.base_panels << level) as f64
    }

    fn kernel(&self, level: usize, index: usize) -> &KernelPanel {
        let slots = self.levels[level].get_or_init(|| {
            (0..(self.base_panels << level)).map(|_| OnceLock::new()).collect()
        });
        slots[index].get_or_init(|| {
            let w = self.panel_width(level);
            let a = w * index as f64;
            let u = quad::nodes(a, a + w);
            let mut k = [Complex64::new(0.0, 0.0); 15];
            for (kv, &uv) in k.iter_mut().zip(u.iter()) {
                *kv = ai(Complex64::new(0.0, self.scale * uv)).inv();
            }
            self.kernel_evaluations.fetch_add(15, AtomicOrdering::Relaxed);
            KernelPanel { u, k }
        })
    }

    /// g and its derivatives of order `0..=max_order` at `x` in one pass.
    pub fn derivatives(&self, x: f64, max_order: usize) -> Result<GDerivatives> {
        if !x.is_finite() {
            return Err(ChernoffError::Domain(format!("x must be finite, got {x}")));
        }
        if max_order > MAX_ORDER {
            return Err(ChernoffError::Domain(format!("derivative order {max_order} exceeds {MAX_ORDER}")));
        }
        let tol = self.params.quad.abs_tol;
        let mut tolerances = [0.0; MAX_ORDER + 1];
        for (k, t) in tolerances.iter_mut().enumerate() {
            *t = tol * 10f64.powi(k as i32) / self.prefactor;
        }
        let raw = self.kernel_integral(x.abs(), max_order + 1, &tolerances, |u, k, out| {
            let e = Complex64::new((u * x).cos(), -(u * x).sin()) * k;
            // Re((-iu)^j e) for j = 0..4
            let (a, b) = (e.re, e.im);
            let u2 = u * u;
            out[0] = a;
            out[1] = u * b;
            out[2] = -u2 * a;
            out[3] = -u2 * u * b;
            out[4] = u2 * u2 * a;
        });
        let raw = match raw {
            Ok(r) => r,
            Err(ChernoffError::Precision { context, estimate, tolerance }) => {
                return Err(ChernoffError::Precision {
                    context,
                    estimate: estimate * self.prefactor,
                    tolerance: tolerance * self.prefactor,
                })
            }
            Err(e) => return Err(e),
        };
        let mut out = GDerivatives {
            values: [0.0; MAX_ORDER + 1],
            errors: [0.0; MAX_ORDER + 1],
            nodes: raw.nodes,
        };
        for k in 0..=max_order {
            out.values[k] = self.prefactor * raw.values[k];
            out.errors[k] = self.prefactor * raw.errors[k];
        }
        Ok(out)
    }

    /// Integrate up to five real functionals of the kernel over `[0, U]`:
    /// `integrand(u, 1/Ai(i s u), out)` fills `out[..count]`. Panels are
    /// refined until slot j meets `tolerances[j]` (absolute, in raw integral
    /// units). `frequency` is the oscillation rate the caller adds on top of
    /// the kernel, used to pick the starting panel width.
    pub fn kernel_integral<F>(
        &self,
        frequency: f64,
        count: usize,
        tolerances: &[f64; MAX_ORDER + 1],
        integrand: F,
    ) -> Result<GDerivatives>
    where
        F: Fn(f64, Complex64, &mut [f64; MAX_ORDER + 1]),
    {
        assert!((1..=MAX_ORDER + 1).contains(&count));
        let mut density = [0.0; MAX_ORDER + 1];
        for k in 0..count {
            density[k] = tolerances[k] / self.u_max;
        }
        let mut start = 0;
        while start < MAX_LEVEL && self.panel_width(start) * (1.0 + frequency) > 2.5 {
            start += 1;
        }
        let mut acc = Accumulator {
            sums: [0.0; MAX_ORDER + 1],
            errors: [0.0; MAX_ORDER + 1],
            nodes: 0,
        };
        for index in 0..(self.base_panels << start) {
            self.panel(start, index, count, &density, &integrand, &mut acc)?;
        }
        for k in 0..count {
            if acc.errors[k] > tolerances[k] {
                return Err(ChernoffError::Precision {
                    context: "g_c Fourier inversion",
                    estimate: acc.errors[k],
                    tolerance: tolerances[k],
                });
            }
        }
        Ok(GDerivatives { values: acc.sums, errors: acc.errors, nodes: acc.nodes })
    }

    fn panel<F>(
        &self,
        level: usize,
        index: usize,
        count: usize,
        density: &[f64; MAX_ORDER + 1],
        integrand: &F,
        acc: &mut Accumulator,
    ) -> Result<()>
    where
        F: Fn(f64, Complex64, &mut [f64; MAX_ORDER + 1]),
    {
        acc.nodes += 15;
        if acc.nodes > self.params.quad.nodes {
            return Err(ChernoffError::Precision {
                context: "g_c Fourier inversion (node budget)",
                estimate: f64::INFINITY,
                tolerance: self.params.quad.abs_tol,
            });
        }
        let kp = self.kernel(level, index);
        let width = self.panel_width(level);

        let mut values = [[0.0; 15]; MAX_ORDER + 1];
        let mut slot = [0.0; MAX_ORDER + 1];
        for j in 0..15 {
            integrand(kp.u[j], kp.k[j], &mut slot);
            for k in 0..count {
                values[k][j] = slot[k];
            }
        }

        let mut sums = [0.0; MAX_ORDER + 1];
        let mut errs = [0.0; MAX_ORDER + 1];
        let mut accept = true;
        for k in 0..count {
            let (kron, gauss, resabs, resasc) = rule_from_values(&values[k], 0.5 * width);
            sums[k] = kron;
            errs[k] = rescale_error(kron - gauss, resabs, resasc);
            if errs[k] > density[k] * width {
                accept = false;
            }
        }

        if accept || level == MAX_LEVEL {
            for k in 0..count {
                acc.sums[k] += sums[k];
                acc.errors[k] += errs[k];
            }
            return Ok(());
        }
        self.panel(level + 1, 2 * index, count, density, integrand, acc)?;
        self.panel(level + 1, 2 * index + 1, count, density, integrand, acc)
    }

    /// `g_c(x)`; tiny negative round-off is clamped to zero.
    pub fn g(&self, x: f64) -> Result<f64> {
        let d = self.derivatives(x, 0)?;
        clamp_nonnegative(d.values[0], self.params.quad.abs_tol)
    }

    /// The k-th derivative of `g_c` at `x`, `k <= 4`.
    pub fn g_deriv(&self, x: f64, order: usize) -> Result<f64> {
        let d = self.derivatives(x, order)?;
        if order == 0 {
            clamp_nonnegative(d.values[0], self.params.quad.abs_tol)
        } else {
            Ok(d.values[order])
        }
    }

    /// Floor below which `g` is considered numerically zero for log-derivatives.
    pub fn floor(&self) -> f64 {
        100.0 * self.params.quad.abs_tol
    }

    /// `v(x) = (-log g_c)''(x) = ((g')² - g g'') / g²`.
    pub fn v(&self, x: f64) -> Result<f64> {
        let d = self.derivatives(x, 2)?;
        log_curvature(d.values[0], d.values[1], d.values[2], self.floor(), x)
    }

    /// `(log g_c)'(x) = g'/g`.
    pub fn log_slope(&self, x: f64) -> Result<f64> {
        let d = self.derivatives(x, 1)?;
        if d.values[0] <= self.floor() {
            return Err(underflow(x));
        }
        Ok(d.values[1] / d.values[0])
    }
}

struct Accumulator {
    sums: [f64; MAX_ORDER + 1],
    errors: [f64; MAX_ORDER + 1],
    nodes: usize,
}

fn underflow(x: f64) -> ChernoffError {
    ChernoffError::Domain(format!("g_c({x}) is below the numerical floor"))
}

pub(crate) fn log_curvature(g: f64, g1: f64, g2: f64, floor: f64, x: f64) -> Result<f64> {
    if g <= floor {
        return Err(underflow(x));
    }
    Ok((g1 * g1 - g * g2) / (g * g))
}

fn clamp_nonnegative(value: f64, tol: f64) -> Result<f64> {
    if value >= 0.0 {
        Ok(value)
    } else if value > -tol {
        Ok(0.0)
    } else {
        Err(ChernoffError::Precision {
            context: "g_c negative beyond tolerance",
            estimate: -value,
            tolerance: tol,
        })
    }
}

/// `g_c(x)` for a one-off evaluation. Build a [`GFunction`] to reuse the kernel.
pub fn g(params: GParams, x: f64) -> Result<f64> {
    GFunction::new(params)?.g(x)
}

pub fn g_deriv(params: GParams, x: f64, order: usize) -> Result<f64> {
    GFunction::new(params)?.g_deriv(x, order)
}

pub fn v(params: GParams, x: f64) -> Result<f64> {
    GFunction::new(params)?.v(x)
}
