//! One-sample Kolmogorov–Smirnov distance and asymptotic critical values.

/// `sup_x |F_n(x) - F(x)|`. Sorts `samples` in place.
pub fn ks_statistic<F: FnMut(f64) -> f64>(samples: &mut [f64], mut cdf: F) -> f64 {
    samples.sort_by(|a, b| a.total_cmp(b));
    let n = samples.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in samples.iter().enumerate() {
        let f = cdf(x);
        d = d.max(f - i as f64 / n).max((i + 1) as f64 / n - f);
    }
    d
}

/// Asymptotic critical value `sqrt(-ln(α/2) / 2) / sqrt(n)` of the KS distance.
pub fn critical_value(n: usize, alpha: f64) -> f64 {
    (-(0.5 * alpha).ln() / 2.0).sqrt() / (n as f64).sqrt()
}
