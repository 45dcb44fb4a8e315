//! Reference implementations shared by the integration tests. Nothing here
//! calls into the simulator, so each helper is an independent oracle.

#![allow(dead_code)]

use std::f64::consts::PI;

use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Bessel `J0(x)` from its integral form `(1/π)∫_0^π cos(x·sinθ) dθ`,
/// evaluated with composite Simpson's rule.
pub fn bessel_j0(x: f64) -> f64 {
    let n = 2000;
    let h = PI / n as f64;
    let f = |th: f64| (x * th.sin()).cos();
    let mut s = f(0.0) + f(PI);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(i as f64 * h);
    }
    s * h / 3.0 / PI
}

/// Two-sided Kolmogorov-Smirnov statistic of `samples` against `cdf`.
pub fn ks_statistic(samples: &mut [f64], cdf: impl Fn(f64) -> f64) -> f64 {
    samples.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = samples.len() as f64;
    samples
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// KS critical value at significance 0.01 for large samples.
pub fn ks_critical_01(n: usize) -> f64 {
    1.6276 / (n as f64).sqrt()
}

/// Pearson chi-square statistic of `counts` against equal expected counts.
pub fn chi_square_uniform(counts: &[u64]) -> f64 {
    let total: u64 = counts.iter().sum();
    let e = total as f64 / counts.len() as f64;
    counts.iter().map(|&c| (c as f64 - e).powi(2) / e).sum()
}

/// Upper critical value of the chi-square law with `dof` degrees of freedom.
pub fn chi_square_critical(dof: usize, alpha: f64) -> f64 {
    ChiSquared::new(dof as f64).unwrap().inverse_cdf(1.0 - alpha)
}

/// Sample mean and unbiased variance.
pub fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, v)
}
