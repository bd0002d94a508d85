use std::sync::OnceLock;

use chernoff::chernoff::ChernoffDist;
use chernoff::error::ChernoffError;
use chernoff::hypoexp::{
    harrison_pdf, sample_chernoff, sample_gtilde, sample_hypoexp, simulate_argmax, simulate_argmax_halving,
    vm_convexity_probe, GTildeRep, HypoExpRates, RngSeed, TailMode,
};
use chernoff::ks::{critical_value, ks_statistic};
use chernoff::quad::{integrate, Adaptive};

fn unit() -> &'static ChernoffDist {
    static D: OnceLock<ChernoffDist> = OnceLock::new();
    D.get_or_init(|| ChernoffDist::new(1.0).unwrap())
}

fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    (m, xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0))
}

/// Density of a sum of exponentials by repeated trapezoid convolution on a
/// grid of spacing `h`, returned on that grid.
fn grid_convolution(rates: &[f64], h: f64, t_max: f64) -> Vec<f64> {
    let n = (t_max / h).round() as usize + 1;
    let exp_density = |l: f64| (0..n).map(|i| l * (-l * i as f64 * h).exp()).collect::<Vec<_>>();
    let mut acc = exp_density(rates[0]);
    for &l in &rates[1..] {
        let next = exp_density(l);
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
    acc
}

/// Richardson extrapolation of the grid convolution at `h` and `h/2`.
fn convolution_oracle(rates: &[f64], t: f64) -> f64 {
    let h = 2e-3;
    let coarse = grid_convolution(rates, h, t);
    let fine = grid_convolution(rates, h / 2.0, t);
    (4.0 * fine.last().unwrap() - coarse.last().unwrap()) / 3.0
}

#[test]
fn single_and_pair_closed_forms() {
    let one = HypoExpRates::new(vec![2.0]).unwrap();
    assert!((harrison_pdf(&one, 0.5) - 2.0 * (-1.0f64).exp()).abs() < 1e-15);
    assert_eq!(harrison_pdf(&one, -0.1), 0.0);
    let two = HypoExpRates::new(vec![1.0, 2.0]).unwrap();
    for t in [0.0f64, 0.05, 0.7, 2.0, 9.0] {
        let want = 2.0 * ((-t).exp() - (-2.0 * t).exp());
        assert!((harrison_pdf(&two, t) - want).abs() < 1e-12, "t = {t}");
    }
}

#[test]
fn agrees_with_grid_convolution() {
    for rates in [vec![0.7, 1.9, 3.3], vec![1.0, 2.5, 0.4, 5.0]] {
        let r = HypoExpRates::new(rates.clone()).unwrap();
        for t in [0.3, 1.0, 2.5] {
            let want = convolution_oracle(&rates, t);
            let got = harrison_pdf(&r, t);
            assert!((got - want).abs() < 1e-6, "rates {rates:?}, t = {t}: {got} vs {want}");
        }
    }
}

#[test]
fn integrates_to_one() {
    for m in 1..=6 {
        let rates: Vec<f64> = (1..=m).map(|j| 0.5 + 0.8 * j as f64).collect();
        let r = HypoExpRates::new(rates).unwrap();
        let mass = integrate(|t| harrison_pdf(&r, t), 0.0, 80.0, Adaptive::with_abs_tol(1e-12).panels(40)).unwrap();
        assert!((mass.value - 1.0).abs() < 1e-8, "m = {m}: {}", mass.value);
    }
}

#[test]
fn rejects_bad_rates() {
    assert!(matches!(HypoExpRates::new(vec![1.0, 1.0 + 1e-12]), Err(ChernoffError::IllConditioned { .. })));
    assert!(HypoExpRates::new(vec![]).is_err());
    assert!(HypoExpRates::new(vec![1.0, -2.0]).is_err());
}

#[test]
fn vm_convexity() {
    let grid: Vec<f64> = (10..=500).map(|i| i as f64 * 0.01).collect();
    let two = vm_convexity_probe(&HypoExpRates::new(vec![1.0, 2.0]).unwrap(), &grid).unwrap();
    assert!(two.asserted && two.convex_within(1e-6));
    let one = vm_convexity_probe(&HypoExpRates::new(vec![3.0]).unwrap(), &grid).unwrap();
    assert!(one.v.iter().all(|v| v.abs() < 1e-12));
    let three = vm_convexity_probe(&HypoExpRates::new(vec![1.0, 2.0, 3.0]).unwrap(), &grid).unwrap();
    assert!(!three.asserted);
    assert_eq!(three.second_differences.len(), grid.len() - 2);
}

#[test]
fn gtilde_representation() {
    let rep = GTildeRep::new(1.0, 400).unwrap();
    assert_eq!(rep.b.len(), 400);
    assert!(rep.b.windows(2).all(|w| w[1] < w[0] && w[1] > 0.0));
    // Σ_j b_j² = (2c²)^{-2/3} ν²
    let total = rep.head_variance() + rep.tail_variance;
    assert!((total - (0.72901113294722698f64 / 2f64.cbrt()).powi(2)).abs() < 1e-12);
    assert!(rep.tail_variance > 0.0 && rep.tail_variance < 0.05);

    let empty = GTildeRep::new(1.0, 0).unwrap();
    let xs = sample_gtilde(&empty, 10, RngSeed::new(1), TailMode::Truncate).unwrap();
    assert!(xs.iter().all(|&x| x == -empty.delta));
}

#[test]
fn gtilde_moments() {
    let rep = GTildeRep::new(1.0, 400).unwrap();
    let n = 20_000;
    let xs = sample_gtilde(&rep, n, RngSeed::new(11), TailMode::Gaussian).unwrap();
    let (m, v) = mean_var(&xs);
    let var = rep.head_variance() + rep.tail_variance;
    assert!((m - rep.mean()).abs() < 3.0 * (var / n as f64).sqrt());
    assert!((v - var).abs() < 0.05 * var);
}

#[test]
fn samplers_are_deterministic() {
    let rep = GTildeRep::new(0.8, 50).unwrap();
    let a = sample_gtilde(&rep, 9000, RngSeed::with_stream(5, 2), TailMode::Gaussian).unwrap();
    let b = sample_gtilde(&rep, 9000, RngSeed::with_stream(5, 2), TailMode::Gaussian).unwrap();
    assert_eq!(a, b);
    let c = sample_gtilde(&rep, 9000, RngSeed::with_stream(5, 3), TailMode::Gaussian).unwrap();
    assert_ne!(a, c);
    let s1 = simulate_argmax(1.0, 3.0, 1e-2, 100, RngSeed::new(4)).unwrap();
    let s2 = simulate_argmax(1.0, 3.0, 1e-2, 100, RngSeed::new(4)).unwrap();
    assert_eq!(s1, s2);
}

#[test]
fn hypoexp_sampler_matches_density() {
    let r = HypoExpRates::new(vec![1.0, 2.0]).unwrap();
    let mut xs = sample_hypoexp(&r, 20_000, RngSeed::new(3)).unwrap();
    let cdf = |t: f64| 1.0 - 2.0 * (-t).exp() + (-2.0 * t).exp();
    assert!(ks_statistic(&mut xs, cdf) < critical_value(20_000, 0.01));
}

#[test]
fn chernoff_sampler() {
    let d = unit();
    let n = 100_000;
    let s = sample_chernoff(d, n, RngSeed::new(2024)).unwrap();
    assert!(s.acceptance_rate > 0.95);
    let (m, v) = mean_var(&s.values);
    let var = d.moment(2).unwrap();
    assert!(m.abs() < 3.0 * (var / n as f64).sqrt());
    // Var(S²) ≈ (μ4 - σ⁴)/n
    let se = ((d.moment(4).unwrap() - var * var) / n as f64).sqrt();
    assert!((v - var).abs() < 3.0 * se, "{v} vs {var}");
    let mut xs = s.values;
    let ks = ks_statistic(&mut xs, |t| d.cdf_cached(t).unwrap());
    assert!(ks <= critical_value(n, 0.01), "KS {ks}");
}

#[test]
fn argmax_scaling() {
    let tight = simulate_argmax(50.0, 0.5, 1e-4, 2000, RngSeed::new(8)).unwrap();
    assert!(mean_var(&tight.values).1.sqrt() < 0.1);

    let n = 20_000;
    let a = simulate_argmax(1.0, 3.0, 1e-3, n, RngSeed::new(9)).unwrap();
    let b = simulate_argmax(8.0, 1.0, 1e-3 / 4.0, n, RngSeed::new(10)).unwrap();
    let (ma, va) = mean_var(&a.values);
    let (_, vb) = mean_var(&b.values);
    assert!(ma.abs() <= 3.0 * (va / n as f64).sqrt());
    let ratio = va / vb;
    assert!((ratio / 8f64.powf(4.0 / 3.0) - 1.0).abs() < 0.1, "ratio {ratio}");
    assert_eq!(a.boundary_hits, 0);
}

#[test]
fn argmax_matches_density_at_mode() {
    // mass of the bin [-h, h] within 3 binomial standard errors plus the
    // 0.01 allowance for the Euler grid
    let n = 20_000;
    let s = simulate_argmax(1.0, 3.0, 1e-3, n, RngSeed::new(77)).unwrap();
    let h = 0.05;
    let hits = s.values.iter().filter(|x| x.abs() <= h).count() as f64;
    let p = unit().cdf(h).unwrap() - unit().cdf(-h).unwrap();
    let se = (p * (1.0 - p) / n as f64).sqrt();
    assert!((hits / n as f64 - p).abs() < 3.0 * se + 0.01);
}

#[test]
fn step_halving_shares_paths() {
    let step = 1e-2;
    let (coarse, fine) = simulate_argmax_halving(1.0, 3.0, step, 2000, RngSeed::new(12)).unwrap();
    for (&a, &b) in coarse.values.iter().zip(&fine.values) {
        assert!(((a / step).round() - a / step).abs() < 1e-9);
        assert!(a.abs() <= 3.0 && b.abs() <= 3.0);
    }
    // same path: near-ties between distant peaks aside, the maximizers agree to a coarse step
    let close = coarse.values.iter().zip(&fine.values).filter(|(a, b)| (*a - *b).abs() <= step + 1e-12).count();
    assert!(close as f64 > 0.8 * 2000.0, "{close} of 2000 close");
}
