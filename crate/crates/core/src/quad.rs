//! Gauss–Kronrod 7/15 quadrature: a single-panel rule and a globally
//! adaptive integrator in the style of QUADPACK's QAG.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{ChernoffError, Result};

/// Kronrod abscissae on [-1, 1] (non-negative half, descending). Odd indices
/// are the 7-point Gauss nodes.
pub(crate) const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];

pub(crate) const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

pub(crate) const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// The 15 Kronrod nodes mapped to `[a, b]`, ordered left to right.
pub(crate) fn nodes(a: f64, b: f64) -> [f64; 15] {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut out = [0.0; 15];
    for j in 0..7 {
        out[j] = center - half * XGK[j];
        out[14 - j] = center + half * XGK[j];
    }
    out[7] = center;
    out
}

/// Kronrod and Gauss sums over values at `nodes(a, b)`.
///
/// Returns `(kronrod, gauss, resabs, resasc)` already scaled by the half-width.
pub(crate) fn rule_from_values(values: &[f64; 15], half: f64) -> (f64, f64, f64, f64) {
    let fc = values[7];
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    let mut resabs = kron.abs();
    for j in 0..7 {
        let (l, r) = (values[j], values[14 - j]);
        kron += WGK[j] * (l + r);
        resabs += WGK[j] * (l.abs() + r.abs());
        if j % 2 == 1 {
            gauss += WG[j / 2] * (l + r);
        }
    }
    let mean = 0.5 * kron;
    let mut resasc = WGK[7] * (fc - mean).abs();
    for j in 0..7 {
        resasc += WGK[j] * ((values[j] - mean).abs() + (values[14 - j] - mean).abs());
    }
    (kron * half, gauss * half, resabs * half.abs(), resasc * half.abs())
}

/// QUADPACK's error rescaling: `|K - G|` is a gross overestimate for smooth
/// integrands, so it is mapped through `(200 |K - G| / resasc)^{3/2}`.
pub(crate) fn rescale_error(diff: f64, resabs: f64, resasc: f64) -> f64 {
    let mut err = diff.abs();
    if resasc != 0.0 && err != 0.0 {
        let scale = (200.0 * err / resasc).powf(1.5);
        err = if scale < 1.0 { resasc * scale } else { resasc };
    }
    if resabs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * resabs);
    }
    err
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
}

/// One Gauss–Kronrod panel: `(value, error estimate)`.
pub fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let xs = nodes(a, b);
    let mut values = [0.0; 15];
    for (v, &x) in values.iter_mut().zip(xs.iter()) {
        *v = f(x);
    }
    let (k, g, resabs, resasc) = rule_from_values(&values, 0.5 * (b - a));
    (k, rescale_error(k - g, resabs, resasc))
}

#[derive(Debug)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Tolerances and limits for [`integrate`].
#[derive(Debug, Clone, Copy)]
pub struct Adaptive {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_panels: usize,
    /// Number of equal panels the interval is split into before adapting.
    pub initial_panels: usize,
}

impl Default for Adaptive {
    fn default() -> Self {
        Adaptive {
            abs_tol: 1e-13,
            rel_tol: 1e-12,
            max_panels: 4000,
            initial_panels: 1,
        }
    }
}

impl Adaptive {
    pub fn with_abs_tol(abs_tol: f64) -> Self {
        Adaptive { abs_tol, ..Default::default() }
    }

    pub fn panels(mut self, n: usize) -> Self {
        self.initial_panels = n.max(1);
        self
    }
}

/// Globally adaptive integration of `f` over `[a, b]`: the panel with the
/// largest error estimate is bisected until the total estimate drops below
/// `max(abs_tol, rel_tol |I|)`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, opts: Adaptive) -> Result<QuadResult> {
    if a == b {
        return Ok(QuadResult { value: 0.0, error: 0.0, evaluations: 0 });
    }
    let mut heap = BinaryHeap::new();
    let mut value = 0.0;
    let mut error = 0.0;
    let n0 = opts.initial_panels;
    let width = (b - a) / n0 as f64;
    for i in 0..n0 {
        let lo = a + width * i as f64;
        let hi = if i + 1 == n0 { b } else { lo + width };
        let (v, e) = gk15(&f, lo, hi);
        value += v;
        error += e;
        heap.push(Panel { a: lo, b: hi, value: v, error: e });
    }
    let mut evaluations = 15 * n0;

    while error > opts.abs_tol.max(opts.rel_tol * value.abs()) {
        if heap.len() >= opts.max_panels {
            return Err(ChernoffError::Precision {
                context: "adaptive Gauss-Kronrod",
                estimate: error,
                tolerance: opts.abs_tol.max(opts.rel_tol * value.abs()),
            });
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // interval exhausted at machine resolution; keep what we have
            heap.push(worst);
            break;
        }
        let (v1, e1) = gk15(&f, worst.a, mid);
        let (v2, e2) = gk15(&f, mid, worst.b);
        evaluations += 30;
        value += v1 + v2 - worst.value;
        error += e1 + e2 - worst.error;
        heap.push(Panel { a: worst.a, b: mid, value: v1, error: e1 });
        heap.push(Panel { a: mid, b: worst.b, value: v2, error: e2 });
    }
    // re-sum to shed drift from the incremental updates
    let value = heap.iter().map(|p| p.value).sum();
    let error = heap.iter().map(|p| p.error).sum();
    Ok(QuadResult { value, error, evaluations })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_sum_to_two() {
        let k: f64 = WGK[7] + 2.0 * WGK[..7].iter().sum::<f64>();
        let g: f64 = WG[3] + 2.0 * WG[..3].iter().sum::<f64>();
        assert!((k - 2.0).abs() < 1e-15);
        assert!((g - 2.0).abs() < 1e-15);
    }

    #[test]
    fn kronrod_exact_to_degree_22_gauss_to_13() {
        for deg in 0..=22u32 {
            let f = |x: f64| x.powi(deg as i32);
            let xs = nodes(-1.0, 1.0);
            let mut vals = [0.0; 15];
            for (v, &x) in vals.iter_mut().zip(xs.iter()) {
                *v = f(x);
            }
            let (k, g, _, _) = rule_from_values(&vals, 1.0);
            let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
            assert!((k - exact).abs() < 1e-14, "K deg {deg}");
            if deg <= 13 {
                assert!((g - exact).abs() < 1e-14, "G deg {deg}");
            }
        }
    }

    #[test]
    fn adaptive_handles_peaked_integrand() {
        // ∫_0^1 1/(1e-4 + (x - 0.3)^2) dx = 100 (atan(70) + atan(30))
        let exact = 100.0 * ((0.7f64 / 0.01).atan() + (0.3f64 / 0.01).atan());
        let r = integrate(|x| 1.0 / (1e-4 + (x - 0.3).powi(2)), 0.0, 1.0, Adaptive::default()).unwrap();
        assert!((r.value - exact).abs() < 1e-9 * exact);
    }

    #[test]
    fn budget_exhaustion_is_a_precision_failure() {
        let opts = Adaptive { max_panels: 3, abs_tol: 1e-15, rel_tol: 0.0, initial_panels: 1 };
        let r = integrate(|x: f64| (1.0 / x.max(1e-300)).sqrt(), 0.0, 1.0, opts);
        assert!(matches!(r, Err(ChernoffError::Precision { .. })));
    }
}
