//! Probability integral transform sampling and Kolmogorov-Smirnov checks.

use rand::Rng;
use rand_distr::StandardNormal;
use statrs::distribution::{ContinuousCDF, Normal};

use super::weibull_exp::sample_blocks;
use crate::rng::Seed;
use crate::{Error, Result};

/// Draws `F⁻¹(Φ(a))` with `a` standard normal.
pub fn pit_sample(
    quantile: impl Fn(f64) -> f64 + Sync,
    n_draws: usize,
    seed: Seed,
) -> Result<Vec<f64>> {
    let std_normal = Normal::standard();
    let levels = sample_blocks(n_draws, seed, 0, |rng| {
        std_normal.cdf(rng.sample::<f64, _>(StandardNormal))
    });
    levels
        .into_iter()
        .map(|u| {
            let v = quantile(u);
            if v.is_finite() {
                Ok(v)
            } else {
                Err(Error::NonFiniteQuantile { u })
            }
        })
        .collect()
}

/// One-sample Kolmogorov-Smirnov statistic of `sample` against `cdf`.
pub fn ks_statistic(sample: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut x = sample.to_vec();
    x.sort_by(f64::total_cmp);
    let n = x.len() as f64;
    x.iter()
        .enumerate()
        .map(|(i, &v)| {
            let f = cdf(v);
            ((i + 1) as f64 / n - f).max(f - i as f64 / n)
        })
        .fold(0.0, f64::max)
}

/// Two-sample Kolmogorov-Smirnov statistic.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        let v = a[i].min(b[j]);
        while i < a.len() && a[i] <= v {
            i += 1;
        }
        while j < b.len() && b[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Asymptotic Kolmogorov coefficient `c(α) = √(−ln(α/2)/2)`.
pub fn ks_coefficient(level: f64) -> f64 {
    (-(level / 2.0).ln() / 2.0).sqrt()
}

/// One-sample critical value at `level` for `n` draws.
pub fn ks_critical(level: f64, n: usize) -> f64 {
    ks_coefficient(level) / (n as f64).sqrt()
}

/// Two-sample critical value at `level`.
pub fn ks_critical_two_sample(level: f64, n: usize, m: usize) -> f64 {
    let (n, m) = (n as f64, m as f64);
    ks_coefficient(level) * ((n + m) / (n * m)).sqrt()
}
