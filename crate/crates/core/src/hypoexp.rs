//! Sums of independent exponentials and the samplers built on them.
//!
//! * Harrison's closed form for the density of `X_1 + … + X_m`,
//!   `X_j ~ Exp(λ_j)` with distinct rates.
//! * `g̃_c = g_c / ∫g_c` is the law of `Y = -δ - Σ_j (X_j - b_j)` with
//!   `X_j ~ Exp(1/b_j)`, `b_j = 1/((2c²)^{1/3} a_j)`, `δ = -(2c²)^{-1/3} ν`.
//! * An adaptive-envelope rejection sampler for `Z_c` (valid because the
//!   density is log-concave).
//! * The direct Monte Carlo oracle: the last grid argmax of `W(t) - c t²`.
//!
//! All samplers split work into fixed-size chunks; chunk `k` draws from its
//! own ChaCha8 block range, so output depends only on the seed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::airy::{airy_constants, airy_zeros};
use crate::chernoff::{second_differences, ChernoffDist};
use crate::error::{ChernoffError, Result};
use crate::gfunc::GFunction;
use crate::quad::{self, Adaptive};

/// Rates closer than this are rejected by [`HypoExpRates::new`].
pub const MIN_RATE_GAP: f64 = 1e-9;

const CHUNK: usize = 4096;
// words reserved per chunk within a ChaCha stream; far above any chunk's use
const CHUNK_WORDS: u128 = 1 << 40;

/// Seed plus stream id; identical values reproduce identical samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct RngSeed {
    pub seed: u64,
    pub stream: u64,
}

impl RngSeed {
    pub fn new(seed: u64) -> Self {
        RngSeed { seed, stream: 0 }
    }

    pub fn with_stream(seed: u64, stream: u64) -> Self {
        RngSeed { seed, stream }
    }

    /// Generator for chunk `chunk` of this stream.
    pub fn rng(&self, chunk: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng.set_word_pos(chunk as u128 * CHUNK_WORDS);
        rng
    }
}

/// Run `draw` for `n` replicates, chunked with deterministic per-chunk RNGs.
fn chunked<T, F>(n: usize, seed: RngSeed, draw: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&mut ChaCha8Rng) -> Result<T> + Sync,
{
    let chunks = n.div_ceil(CHUNK);
    let parts: Vec<Vec<T>> = (0..chunks)
        .into_par_iter()
        .map(|k| {
            let mut rng = seed.rng(k);
            let len = CHUNK.min(n - k * CHUNK);
            (0..len).map(|_| draw(&mut rng)).collect::<Result<Vec<T>>>()
        })
        .collect::<Result<_>>()?;
    Ok(parts.into_iter().flatten().collect())
}

/// Distinct positive rates `λ_1, …, λ_m`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HypoExpRates {
    lambdas: Vec<f64>,
}

impl HypoExpRates {
    pub fn new(lambdas: Vec<f64>) -> Result<Self> {
        if lambdas.is_empty() {
            return Err(ChernoffError::Domain("need at least one rate".into()));
        }
        if lambdas.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
            return Err(ChernoffError::Domain("rates must be positive and finite".into()));
        }
        let mut sorted = lambdas.clone();
        sorted.sort_by(|a, b| a.total_cmp(b));
        let gap = sorted.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
        if gap < MIN_RATE_GAP {
            return Err(ChernoffError::IllConditioned { gap, guard: MIN_RATE_GAP });
        }
        Ok(HypoExpRates { lambdas })
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    pub fn len(&self) -> usize {
        self.lambdas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambdas.is_empty()
    }

    /// `ln |∏_{i≠j} λ_i/(λ_i - λ_j)|` and its sign, per `j`.
    fn log_coefficients(&self) -> Vec<(f64, f64)> {
        let l = &self.lambdas;
        (0..l.len())
            .map(|j| {
                let mut log = 0.0;
                let mut sign = 1.0;
                for (i, &li) in l.iter().enumerate() {
                    if i != j {
                        let d = li - l[j];
                        log += li.ln() - d.abs().ln();
                        if d < 0.0 {
                            sign = -sign;
                        }
                    }
                }
                (log, sign)
            })
            .collect()
    }

    /// `f_m`, `f_m'`, `f_m''` at `t >= 0`.
    fn density_derivatives(&self, t: f64) -> [f64; 3] {
        let mut out = [0.0; 3];
        for (&lj, (log, sign)) in self.lambdas.iter().zip(self.log_coefficients()) {
            let term = sign * (lj.ln() - lj * t + log).exp();
            out[0] += term;
            out[1] -= lj * term;
            out[2] += lj * lj * term;
        }
        out
    }
}

/// Harrison's density `Σ_j λ_j e^{-λ_j t} ∏_{i≠j} λ_i/(λ_i - λ_j)`; zero for `t < 0`.
pub fn harrison_pdf(rates: &HypoExpRates, t: f64) -> f64 {
    if t < 0.0 {
        return 0.0;
    }
    let f = rates.density_derivatives(t)[0];
    if f > -1e-12 {
        f.max(0.0)
    } else {
        f
    }
}

/// `v_m = (-log f_m)''` on a grid and its second divided differences.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VmConvexityReport {
    pub m: usize,
    pub grid: Vec<f64>,
    pub v: Vec<f64>,
    pub second_differences: Vec<f64>,
    pub min_second_difference: f64,
    /// Convexity is known for `m <= 2`; for larger `m` the probe only reports.
    pub asserted: bool,
}

impl VmConvexityReport {
    /// `true` when every second difference is at least `-tol`.
    pub fn convex_within(&self, tol: f64) -> bool {
        self.min_second_difference >= -tol
    }
}

pub fn vm_convexity_probe(rates: &HypoExpRates, grid: &[f64]) -> Result<VmConvexityReport> {
    if grid.iter().any(|&t| !(t > 0.0 && t.is_finite())) {
        return Err(ChernoffError::Domain("v_m probe needs a grid in (0, ∞)".into()));
    }
    let v: Vec<f64> = grid
        .iter()
        .map(|&t| {
            let [f, f1, f2] = rates.density_derivatives(t);
            if f <= 0.0 {
                return Err(ChernoffError::Domain(format!("f_m({t}) is not positive")));
            }
            Ok((f1 * f1 - f * f2) / (f * f))
        })
        .collect::<Result<_>>()?;
    let second_differences = second_differences(grid, &v);
    let min_second_difference = second_differences.iter().copied().fold(f64::INFINITY, f64::min);
    let m = rates.len();
    let report = VmConvexityReport {
        m,
        grid: grid.to_vec(),
        v,
        second_differences,
        min_second_difference,
        asserted: m <= 2,
    };
    if report.asserted && !report.convex_within(1e-6) {
        return Err(ChernoffError::Precision {
            context: "v_m convexity for m <= 2",
            estimate: -report.min_second_difference,
            tolerance: 1e-6,
        });
    }
    if !report.asserted && !report.convex_within(1e-6) {
        log::info!("v_{m} not convex on the probe grid (min second difference {min_second_difference:.3e})");
    }
    Ok(report)
}

/// How [`sample_gtilde`] treats the terms beyond `m`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum TailMode {
    /// Replace `-Σ_{j>m} b_j (E_j - 1)` by a centred normal of the same variance.
    Gaussian,
    /// Drop the tail.
    Truncate,
}

/// Truncated representation of `Y = -δ - Σ_j b_j (E_j - 1)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GTildeRep {
    pub c: f64,
    pub m: usize,
    pub b: Vec<f64>,
    pub delta: f64,
    /// `Σ_{j>m} b_j²`, from `Σ_k a_k^{-2} = ν²`.
    pub tail_variance: f64,
}

impl GTildeRep {
    pub fn new(c: f64, m: usize) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(ChernoffError::Domain(format!("c must be positive, got {c}")));
        }
        let k = (2.0 * c * c).cbrt();
        let nu = airy_constants().nu;
        let zeros = airy_zeros(m)?;
        let b: Vec<f64> = zeros.values.iter().map(|a| 1.0 / (k * a)).collect();
        let head: f64 = zeros.values.iter().rev().map(|a| a.powi(-2)).sum();
        let tail_variance = ((nu * nu - head) / (k * k)).max(0.0);
        Ok(GTildeRep { c, m, b, delta: -nu / k, tail_variance })
    }

    /// Mean of `Y` (each centred summand has mean zero).
    pub fn mean(&self) -> f64 {
        -self.delta
    }

    /// Variance of the truncated sum, `Σ_{j<=m} b_j²`.
    pub fn head_variance(&self) -> f64 {
        self.b.iter().rev().map(|b| b * b).sum()
    }

    pub fn rates(&self) -> Result<HypoExpRates> {
        HypoExpRates::new(self.b.iter().map(|b| 1.0 / b).collect())
    }
}

pub fn sample_gtilde(rep: &GTildeRep, n: usize, seed: RngSeed, mode: TailMode) -> Result<Vec<f64>> {
    let tail_sd = match mode {
        TailMode::Gaussian => rep.tail_variance.sqrt(),
        TailMode::Truncate => 0.0,
    };
    chunked(n, seed, |rng| {
        let mut y = -rep.delta;
        for &b in &rep.b {
            let e: f64 = rng.sample(Exp1);
            y -= b * (e - 1.0);
        }
        if tail_sd > 0.0 {
            let z: f64 = rng.sample(StandardNormal);
            y += tail_sd * z;
        }
        Ok(y)
    })
}

/// Draws from a [`HypoExpRates`] law (sum of exponentials).
pub fn sample_hypoexp(rates: &HypoExpRates, n: usize, seed: RngSeed) -> Result<Vec<f64>> {
    chunked(n, seed, |rng| {
        Ok(rates.lambdas().iter().map(|&l| rng.sample::<f64, _>(Exp1) / l).sum())
    })
}

/// CDF of `g̃_c` tabulated by quadrature, normalized by the exact mass
/// `ĝ_c(0) = 2^{1/3} c^{-1/3} / Ai(0)`.
#[derive(Debug, Clone)]
pub struct GTildeCdf {
    x: Vec<f64>,
    cdf: Vec<f64>,
    pdf: Vec<f64>,
}

impl GTildeCdf {
    pub fn new(g: &GFunction, knots: usize) -> Result<Self> {
        let c = g.c();
        let k = (2.0 * c * c).powf(-1.0 / 3.0) / 2f64.powf(-1.0 / 3.0);
        // g_1 < 1e-12 left of -10 and right of 5; scale with (2c²)^{-1/3}
        let (lo, hi) = (-10.0 * k, 5.0 * k);
        let mass = g.transform(0.0).re;
        let x: Vec<f64> = (0..knots).map(|i| lo + (hi - lo) * i as f64 / (knots - 1) as f64).collect();
        let pdf: Vec<f64> = x.par_iter().map(|&t| Ok(g.g(t)? / mass)).collect::<Result<_>>()?;
        let incs: Vec<f64> = (1..knots)
            .into_par_iter()
            .map(|i| {
                let err = std::cell::Cell::new(None);
                let r = quad::integrate(
                    |t| match g.g(t) {
                        Ok(v) => v,
                        Err(e) => {
                            err.set(Some(e));
                            0.0
                        }
                    },
                    x[i - 1],
                    x[i],
                    Adaptive::with_abs_tol(1e-14),
                )?;
                match err.into_inner() {
                    Some(e) => Err(e),
                    None => Ok(r.value / mass),
                }
            })
            .collect::<Result<_>>()?;
        let mut cdf = vec![0.0; knots];
        for i in 1..knots {
            cdf[i] = cdf[i - 1] + incs[i - 1];
        }
        Ok(GTildeCdf { x, cdf, pdf })
    }

    /// Total mass captured by the table (close to 1).
    pub fn mass(&self) -> f64 {
        *self.cdf.last().expect("non-empty table")
    }

    /// Cubic Hermite interpolation of the tabulated CDF.
    pub fn cdf(&self, t: f64) -> f64 {
        let n = self.x.len();
        if t <= self.x[0] {
            return 0.0;
        }
        if t >= self.x[n - 1] {
            return 1.0;
        }
        let i = (self.x.partition_point(|&k| k <= t) - 1).min(n - 2);
        let h = self.x[i + 1] - self.x[i];
        let s = (t - self.x[i]) / h;
        let (s2, s3) = (s * s, s * s * s);
        (2.0 * s3 - 3.0 * s2 + 1.0) * self.cdf[i]
            + (s3 - 2.0 * s2 + s) * h * self.pdf[i]
            + (-2.0 * s3 + 3.0 * s2) * self.cdf[i + 1]
            + (s3 - s2) * h * self.pdf[i + 1]
    }
}

/// Piecewise-exponential upper hull of `log f` from tangents, with the
/// chord (squeeze) lower hull between tangent points.
#[derive(Debug, Clone)]
struct Envelope {
    x: Vec<f64>,
    h: Vec<f64>,
    s: Vec<f64>,
    /// Breakpoints between tangent pieces; `z[i]` ends piece `i`.
    z: Vec<f64>,
    /// Cumulative piece masses.
    cum: Vec<f64>,
}

impl Envelope {
    fn build(points: &[(f64, f64, f64)]) -> Result<Self> {
        let k = points.len();
        if points[0].2 <= 0.0 || points[k - 1].2 >= 0.0 {
            return Err(ChernoffError::Domain("envelope needs increasing left and decreasing right tangents".into()));
        }
        let x: Vec<f64> = points.iter().map(|p| p.0).collect();
        let h: Vec<f64> = points.iter().map(|p| p.1).collect();
        let s: Vec<f64> = points.iter().map(|p| p.2).collect();
        let mut z = Vec::with_capacity(k);
        for i in 0..k - 1 {
            let ds = s[i] - s[i + 1];
            let zi = if ds.abs() < 1e-12 {
                0.5 * (x[i] + x[i + 1])
            } else {
                (h[i + 1] - h[i] - x[i + 1] * s[i + 1] + x[i] * s[i]) / ds
            };
            z.push(zi.clamp(x[i], x[i + 1]));
        }
        z.push(f64::INFINITY);
        let mut cum = Vec::with_capacity(k);
        let mut total = 0.0;
        for i in 0..k {
            let a = if i == 0 { f64::NEG_INFINITY } else { z[i - 1] };
            total += piece_mass(h[i], s[i], x[i], a, z[i]);
            cum.push(total);
        }
        Ok(Envelope { x, h, s, z, cum })
    }

    fn total(&self) -> f64 {
        *self.cum.last().expect("non-empty")
    }

    fn piece(&self, t: f64) -> usize {
        self.z.partition_point(|&z| z < t).min(self.x.len() - 1)
    }

    fn upper(&self, t: f64) -> f64 {
        let i = self.piece(t);
        self.h[i] + self.s[i] * (t - self.x[i])
    }

    fn lower(&self, t: f64) -> f64 {
        let j = self.x.partition_point(|&x| x <= t);
        if j == 0 || j == self.x.len() {
            return f64::NEG_INFINITY;
        }
        let (a, b) = (self.x[j - 1], self.x[j]);
        ((b - t) * self.h[j - 1] + (t - a) * self.h[j]) / (b - a)
    }

    fn draw<R: Rng>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.gen::<f64>() * self.total();
        let i = self.cum.partition_point(|&c| c < u).min(self.x.len() - 1);
        let a = if i == 0 { f64::NEG_INFINITY } else { self.z[i - 1] };
        let b = self.z[i];
        let v: f64 = rng.gen();
        let (s, x0) = (self.s[i], self.x[i]);
        if s.abs() < 1e-12 {
            return a + v * (b - a);
        }
        // inverse CDF of e^{s (t - x0)} on [a, b], in a cancellation-safe form
        let ea = if a.is_finite() { (s * (a - x0)).exp() } else { 0.0 };
        let eb = if b.is_finite() { (s * (b - x0)).exp() } else { 0.0 };
        x0 + (ea + v * (eb - ea)).ln() / s
    }
}

fn piece_mass(h: f64, s: f64, x0: f64, a: f64, b: f64) -> f64 {
    if s.abs() < 1e-12 {
        return h.exp() * (b - a);
    }
    let ea = if a.is_finite() { (s * (a - x0)).exp() } else { 0.0 };
    let eb = if b.is_finite() { (s * (b - x0)).exp() } else { 0.0 };
    h.exp() * (eb - ea) / s
}

/// Samples from [`sample_chernoff`] with the sampler's bookkeeping.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChernoffSample {
    pub values: Vec<f64>,
    /// Accepted draws over proposals.
    pub acceptance_rate: f64,
    /// Fraction of proposals that needed an exact density evaluation.
    pub density_evaluations: f64,
    pub tangent_points: usize,
}

/// Rejection sampling from `f_{Z_c}` under a tangent-line envelope of
/// `log f`. The envelope is refined at its worst breakpoint until its mass is
/// within 1% of the density's, then frozen so draws are reproducible in
/// parallel.
pub fn sample_chernoff(d: &ChernoffDist, n: usize, seed: RngSeed) -> Result<ChernoffSample> {
    let l = d.working_half_width();
    let mut points: Vec<(f64, f64, f64)> = (0..12)
        .map(|i| {
            let t = -0.9 * l * (std::f64::consts::PI * i as f64 / 11.0).cos();
            let (h, s) = d.log_pdf_and_slope(t)?;
            Ok((t, h, s))
        })
        .collect::<Result<_>>()?;
    let mut env = Envelope::build(&points)?;
    while env.total() > 1.01 && points.len() < 200 {
        // add a tangent where the hull sits furthest above the density
        let (mut best, mut gap) = (None, 0.0);
        for &zi in &env.z[..env.z.len() - 1] {
            let f = d.pdf(zi)?;
            let g = env.upper(zi).exp() - f;
            if g > gap {
                gap = g;
                best = Some(zi);
            }
        }
        let Some(t) = best else { break };
        if points.iter().any(|p| (p.0 - t).abs() < 1e-9) {
            break;
        }
        let (h, s) = d.log_pdf_and_slope(t)?;
        let at = points.partition_point(|p| p.0 < t);
        points.insert(at, (t, h, s));
        env = Envelope::build(&points)?;
    }

    let draws = chunked(n, seed, |rng| {
        let mut proposals = 0usize;
        let mut exact = 0usize;
        loop {
            proposals += 1;
            let t = env.draw(rng);
            let u: f64 = rng.gen();
            let log_u = u.ln();
            let up = env.upper(t);
            if log_u <= env.lower(t) - up {
                return Ok((t, proposals, exact));
            }
            exact += 1;
            let f = d.pdf(t)?;
            if f > 0.0 && log_u <= f.ln() - up {
                return Ok((t, proposals, exact));
            }
        }
    })?;
    let proposals: usize = draws.iter().map(|r| r.1).sum();
    let exact: usize = draws.iter().map(|r| r.2).sum();
    Ok(ChernoffSample {
        values: draws.into_iter().map(|r| r.0).collect(),
        acceptance_rate: n as f64 / proposals.max(1) as f64,
        density_evaluations: exact as f64 / proposals.max(1) as f64,
        tangent_points: points.len(),
    })
}

/// Grid argmax draws of `W(t) - c t²`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArgmaxSample {
    pub values: Vec<f64>,
    /// Replicates whose argmax landed on the window edge.
    pub boundary_hits: usize,
}

/// For each replicate, simulate two-sided Brownian motion on `step`-spaced
/// points of `[-half_width, half_width]` (`W(0) = 0`) and return the largest
/// `t` at which `W(t) - c t²` is maximal.
pub fn simulate_argmax(c: f64, half_width: f64, step: f64, n: usize, seed: RngSeed) -> Result<ArgmaxSample> {
    let k = argmax_grid(c, half_width, step)?;
    let draws = chunked(n, seed, |rng| Ok(path_argmax(rng, c, k, step).0))?;
    Ok(collect_argmax(draws, k, half_width))
}

/// Argmax draws at `step` and at `step / 2` from the same Brownian paths:
/// each path is simulated at `step / 2` and the coarse grid is every other
/// point, so differences between the two samples are pure discretization.
pub fn simulate_argmax_halving(
    c: f64,
    half_width: f64,
    step: f64,
    n: usize,
    seed: RngSeed,
) -> Result<(ArgmaxSample, ArgmaxSample)> {
    let k = argmax_grid(c, half_width, step)?;
    let fine = step / 2.0;
    let draws = chunked(n, seed, |rng| Ok(path_argmax(rng, c, 2 * k, fine)))?;
    let (fine_draws, coarse): (Vec<_>, Vec<_>) = draws.into_iter().unzip();
    Ok((collect_argmax(coarse, k, half_width), collect_argmax(fine_draws, 2 * k, half_width)))
}

fn argmax_grid(c: f64, half_width: f64, step: f64) -> Result<usize> {
    if !(c > 0.0 && half_width > 0.0 && step > 0.0 && step < half_width) {
        return Err(ChernoffError::Domain("argmax simulation needs c, half_width, step > 0 and step < half_width".into()));
    }
    if half_width < 3.0 * c.powf(-2.0 / 3.0) {
        log::warn!("half_width {half_width} is below 3 c^(-2/3); boundary hits likely");
    }
    Ok((half_width / step).round() as usize)
}

/// Grid index of the last maximum of `W - c t²` over `-k..=k`, and of the last
/// maximum restricted to even indices (in units of two steps).
fn path_argmax<R: Rng>(rng: &mut R, c: f64, k: usize, step: f64) -> ((i64, f64), (i64, f64)) {
    let sd = step.sqrt();
    let mut all = (0i64, 0.0f64);
    let mut even = (0i64, 0.0f64);
    // left side, scanning outward: a tie keeps the larger (inner) t
    let mut w = 0.0;
    for i in 1..=k {
        let z: f64 = rng.sample(StandardNormal);
        w += sd * z;
        let t = i as f64 * step;
        let val = w - c * t * t;
        if val > all.1 {
            all = (-(i as i64), val);
        }
        if i % 2 == 0 && val > even.1 {
            even = (-(i as i64) / 2, val);
        }
    }
    // right side, scanning outward: a tie moves to the larger t
    w = 0.0;
    for i in 1..=k {
        let z: f64 = rng.sample(StandardNormal);
        w += sd * z;
        let t = i as f64 * step;
        let val = w - c * t * t;
        if val >= all.1 {
            all = (i as i64, val);
        }
        if i % 2 == 0 && val >= even.1 {
            even = (i as i64 / 2, val);
        }
    }
    ((all.0, step), (even.0, 2.0 * step))
}

fn collect_argmax(draws: Vec<(i64, f64)>, k: usize, half_width: f64) -> ArgmaxSample {
    let boundary_hits = draws.iter().filter(|d| d.0.unsigned_abs() as usize == k).count();
    if boundary_hits > 0 {
        log::warn!("{boundary_hits} of {} argmax draws hit the window edge ±{half_width}", draws.len());
    }
    ArgmaxSample { values: draws.into_iter().map(|(i, h)| i as f64 * h).collect(), boundary_hits }
}
