//! The verification suite: one check per documented claim, each returning a
//! pass/fail line. Used by `chernoff verify` and by the acceptance tests.

use std::path::PathBuf;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::airy::airy_constants;
use crate::chernoff::{scaling_check, ChernoffDist, CorrelationKernel};
use crate::error::Result;
use crate::figures::{emit_figures, FigureConfig};
use crate::gaussfact::{factorization_residual_scan, g_normal, g_normal_first_form};
use crate::gfunc::{GFunction, GParams, QuadratureConfig};
use crate::hypoexp::{
    harrison_pdf, sample_gtilde, simulate_argmax_halving, vm_convexity_probe, GTildeCdf, GTildeRep, HypoExpRates,
    RngSeed, TailMode,
};
use crate::ks::{critical_value, ks_statistic};

/// Sizes and seed for the randomized criteria.
#[derive(Debug, Clone, Serialize)]
pub struct VerifyOptions {
    pub seed: u64,
    pub argmax_draws: usize,
    pub argmax_step: f64,
    pub gtilde_draws: usize,
    pub gtilde_terms: usize,
    pub pf2_draws: usize,
    /// Where `figures` writes its files; a temporary directory if unset.
    pub figures_dir: Option<PathBuf>,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            seed: 20_140_501,
            argmax_draws: 100_000,
            argmax_step: 1e-3,
            gtilde_draws: 100_000,
            gtilde_terms: 400,
            pf2_draws: 10_000,
            figures_dir: None,
        }
    }
}

/// KS allowance for the Euler discretization of the argmax oracle.
pub const ARGMAX_ALLOWANCE: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriterionResult {
    pub id: u8,
    pub title: &'static str,
    pub passed: bool,
    /// Soft criteria report but never fail the suite.
    pub soft: bool,
    pub detail: String,
}

impl CriterionResult {
    pub fn line(&self) -> String {
        let status = match (self.passed, self.soft) {
            (true, _) => "PASS",
            (false, true) => "FLAG",
            (false, false) => "FAIL",
        };
        format!("[{status}] {:>2}. {} — {}", self.id, self.title, self.detail)
    }
}

pub const CRITERIA: [(u8, &str); 11] = [
    (1, "Airy constants"),
    (2, "log-concavity: w >= 0 and PF2 determinants"),
    (3, "w(0), sigma0, sigma0^(3/2)"),
    (4, "strong log-concavity margin (conjecture, soft)"),
    (5, "scaling law"),
    (6, "argmax simulation vs analytic cdf"),
    (7, "g-tilde sampler vs quadrature cdf"),
    (8, "Harrison density and v_m convexity"),
    (9, "Gaussian factorization"),
    (10, "Airy-kernel correlation inequality"),
    (11, "figure data"),
];

/// Runs criterion `id`; computation errors become failures.
pub fn run_criterion(id: u8, opts: &VerifyOptions) -> CriterionResult {
    let title = CRITERIA.iter().find(|c| c.0 == id).map_or("unknown criterion", |c| c.1);
    let outcome = match id {
        1 => constants(),
        2 => log_concavity(opts),
        3 => mode_constants(),
        4 => strong_log_concavity(),
        5 => scaling(),
        6 => argmax_oracle(opts),
        7 => gtilde_sampler(opts),
        8 => harrison(),
        9 => gaussian_factorization(),
        10 => correlation(),
        11 => figures(opts),
        _ => Ok((false, format!("no criterion {id}"))),
    };
    let (passed, detail) = outcome.unwrap_or_else(|e| (false, format!("error: {e}")));
    CriterionResult { id, title, passed, soft: id == 4, detail }
}

pub fn run_all(opts: &VerifyOptions) -> Vec<CriterionResult> {
    CRITERIA.iter().map(|&(id, _)| run_criterion(id, opts)).collect()
}

type Outcome = Result<(bool, String)>;

fn unit() -> Result<ChernoffDist> {
    ChernoffDist::new(1.0)
}

fn constants() -> Outcome {
    let k = airy_constants();
    let ok = (k.ai0 - 0.35503).abs() <= 1e-5 && (k.ai_prime0 + 0.25882).abs() <= 1e-5 && (k.nu - 0.729011).abs() <= 1e-5;
    Ok((ok, format!("Ai(0) = {:.8}, Ai'(0) = {:.8}, nu = {:.8}", k.ai0, k.ai_prime0, k.nu)))
}

fn log_concavity(opts: &VerifyOptions) -> Outcome {
    let d = unit()?;
    let grid: Vec<f64> = (0..=500).map(|i| -2.5 + 0.01 * i as f64).collect();
    let w_min = grid.par_iter().map(|&t| d.w(t)).collect::<Result<Vec<_>>>()?.into_iter().fold(f64::INFINITY, f64::min);
    let mut rng = RngSeed::with_stream(opts.seed, 2).rng(0);
    let quads: Vec<((f64, f64), (f64, f64))> = (0..opts.pf2_draws)
        .map(|_| {
            let mut v = [0.0f64; 4];
            for x in &mut v {
                *x = rng.gen_range(-3.0..3.0);
            }
            ((v[0].min(v[1]), v[0].max(v[1])), (v[2].min(v[3]), v[2].max(v[3])))
        })
        .collect();
    let det_min = quads
        .par_iter()
        .map(|&(x, y)| d.pf2_check(x, y))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    let ok = w_min >= -1e-6 && det_min >= -1e-10;
    Ok((ok, format!("min w = {w_min:.6}, min PF2 det over {} draws = {det_min:.3e}", opts.pf2_draws)))
}

fn mode_constants() -> Outcome {
    let d = unit()?;
    let w0 = d.w(0.0)?;
    let s = d.sigma0()?;
    let ok = (w0 - 3.4052).abs() <= 1e-3 && (s - 0.541912).abs() <= 1e-4 && (s.powf(1.5) - 0.398927).abs() <= 1e-4;
    Ok((ok, format!("w(0) = {w0:.7}, sigma0 = {s:.7}, sigma0^1.5 = {:.7}", s.powf(1.5))))
}

fn strong_log_concavity() -> Outcome {
    let d = unit()?;
    let grid: Vec<f64> = (0..=500).map(|i| -2.5 + 0.01 * i as f64).collect();
    let r = d.strong_lc_profile(&grid)?;
    Ok((
        r.strong_lc_margin >= -1e-6,
        format!(
            "min w - w(0) = {:.3e} on [-2.5, 2.5]; v non-convex at {} grid points (reported only)",
            r.strong_lc_margin, r.v_convexity_violations
        ),
    ))
}

fn scaling() -> Outcome {
    let cs = [0.25, 0.5, 2.0, 4.0];
    let ts = [-1.0, -0.3, 0.0, 0.7, 1.5];
    let mut worst = 0.0f64;
    for &c in &cs {
        for &t in &ts {
            worst = worst.max(scaling_check(c, t)?.abs());
        }
    }
    let m1 = unit()?.moment(2)?;
    let mut worst_ratio = 0.0f64;
    for &c in &cs {
        let mc = ChernoffDist::new(c)?.moment(2)?;
        worst_ratio = worst_ratio.max((mc / m1 / c.powf(-4.0 / 3.0) - 1.0).abs());
    }
    Ok((
        worst <= 1e-7 && worst_ratio <= 1e-5,
        format!("max density residual {worst:.2e}, max relative moment-ratio error {worst_ratio:.2e}"),
    ))
}

fn argmax_oracle(opts: &VerifyOptions) -> Outcome {
    let d = unit()?;
    let n = opts.argmax_draws;
    let (coarse, fine) = simulate_argmax_halving(1.0, 3.0, opts.argmax_step, n, RngSeed::with_stream(opts.seed, 6))?;
    let ks = |mut xs: Vec<f64>| -> Result<f64> {
        let mut err = None;
        let v = ks_statistic(&mut xs, |t| d.cdf_cached(t).unwrap_or_else(|e| {
            err.get_or_insert(e);
            f64::NAN
        }));
        err.map_or(Ok(v), Err)
    };
    let ks_coarse = ks(coarse.values)?;
    let ks_fine = ks(fine.values)?;
    let limit = critical_value(n, 0.01) + ARGMAX_ALLOWANCE;
    let change = (ks_coarse - ks_fine).abs();
    Ok((
        ks_coarse <= limit && change < 0.005,
        format!(
            "KS = {ks_coarse:.5} (limit {limit:.5}) at step {}; {ks_fine:.5} at half step (change {change:.5}); {} boundary hits",
            opts.argmax_step, coarse.boundary_hits
        ),
    ))
}

fn gtilde_sampler(opts: &VerifyOptions) -> Outcome {
    let rep = GTildeRep::new(1.0, opts.gtilde_terms)?;
    let mut xs = sample_gtilde(&rep, opts.gtilde_draws, RngSeed::with_stream(opts.seed, 7), TailMode::Gaussian)?;
    let g = GFunction::new(GParams::new(1.0)?)?;
    let table = GTildeCdf::new(&g, 1001)?;
    let ks = ks_statistic(&mut xs, |t| table.cdf(t));
    let limit = 1.5 * critical_value(opts.gtilde_draws, 0.01);
    Ok((
        ks <= limit,
        format!("KS = {ks:.5} (limit {limit:.5}), m = {}, tail sd {:.4}, table mass {:.10}", rep.m, rep.tail_variance.sqrt(), table.mass()),
    ))
}

/// Density of a sum of exponentials by repeated trapezoid convolution on a
/// grid of spacing `h` (value at `t`), extrapolated from `h` and `h/2`.
fn convolution_oracle(rates: &[f64], t: f64) -> f64 {
    let at = |h: f64| {
        let n = (t / h).round() as usize + 1;
        let density = |l: f64| (0..n).map(|i| l * (-l * i as f64 * h).exp()).collect::<Vec<_>>();
        let mut acc = density(rates[0]);
        for &l in &rates[1..] {
            let next = density(l);
            acc = (0..n)
                .map(|k| {
                    if k == 0 {
                        return 0.0;
                    }
                    let inner: f64 = (1..k).map(|j| acc[j] * next[k - j]).sum();
                    h * (inner + 0.5 * (acc[0] * next[k] + acc[k] * next[0]))
                })
                .collect();
        }
        acc[n - 1]
    };
    (4.0 * at(1e-3) - at(2e-3)) / 3.0
}

fn harrison() -> Outcome {
    let two = HypoExpRates::new(vec![1.0, 2.0])?;
    let pair_err = (0..=100)
        .map(|i| {
            let t = 0.05 * i as f64;
            (harrison_pdf(&two, t) - 2.0 * ((-t).exp() - (-2.0 * t).exp())).abs()
        })
        .fold(0.0f64, f64::max);
    let mut conv_err = 0.0f64;
    for rates in [vec![0.7, 1.9, 3.3], vec![1.0, 2.5, 0.4, 5.0]] {
        let r = HypoExpRates::new(rates.clone())?;
        for t in [0.3, 1.0, 2.5] {
            conv_err = conv_err.max((harrison_pdf(&r, t) - convolution_oracle(&rates, t)).abs());
        }
    }
    let grid: Vec<f64> = (10..=500).map(|i| 0.01 * i as f64).collect();
    let probe = vm_convexity_probe(&two, &grid)?;
    let three = vm_convexity_probe(&HypoExpRates::new(vec![1.0, 2.0, 3.0])?, &grid)?;
    Ok((
        pair_err <= 1e-12 && conv_err <= 1e-6 && probe.convex_within(1e-6),
        format!(
            "m=2 closed-form error {pair_err:.1e}, m=3,4 convolution error {conv_err:.1e}, min second difference of v_2 {:.2e} (v_3: {:.2e}, reported)",
            probe.min_second_difference, three.min_second_difference
        ),
    ))
}

fn gaussian_factorization() -> Outcome {
    let grid: Vec<f64> = (0..=240).map(|i| -6.0 + 0.05 * i as f64).collect();
    let scan = factorization_residual_scan(&grid)?;
    let mut forms = 0.0f64;
    for z in [-1.0, 0.5, 2.0] {
        forms = forms.max((g_normal(z)? - g_normal_first_form(z)?).abs());
    }
    Ok((
        scan.max_residual <= 1e-8 && forms <= 1e-8,
        format!("max residual {:.2e}, integral forms differ by {forms:.2e}", scan.max_residual),
    ))
}

fn correlation() -> Outcome {
    let k = CorrelationKernel::new(QuadratureConfig::default())?;
    let (min, unsquared) = k.grid_min(-3.0, 3.0, 0.25)?;
    Ok((
        min >= -1e-7,
        format!("min LHS over [-3, 3]^2 = {min:.3e} (last term squared; as printed, unsquared: {unsquared:.3})"),
    ))
}

fn figures(opts: &VerifyOptions) -> Outcome {
    let dir = opts
        .figures_dir
        .clone()
        .unwrap_or_else(|| std::env::temp_dir().join(format!("chernoff-figures-{}", std::process::id())));
    let config = FigureConfig::default();
    let s = emit_figures(&dir, &config)?;
    let ok = s.density_argmax.abs() < 0.5 * config.density_step
        && s.curvature_argmin.abs() < 0.5 * config.density_step
        && (s.curvature_min - 3.4052).abs() <= 1e-3
        && s.product_sup_gap[2] < s.product_sup_gap[0]
        && s.files.len() == 4;
    if opts.figures_dir.is_none() {
        let _ = std::fs::remove_dir_all(&dir);
    }
    Ok((
        ok,
        format!(
            "f max at t = {:.3}, w min {:.5} at t = {:.3}, product sup gaps {:.2e} / {:.2e} / {:.2e}",
            s.density_argmax, s.curvature_min, s.curvature_argmin, s.product_sup_gap[0], s.product_sup_gap[1], s.product_sup_gap[2]
        ),
    ))
}
