//! Descriptive statistics used across the crate.
//!
//! Variances and covariances use the population convention (divide by `n`)
//! everywhere.

use alloc::vec;
use alloc::vec::Vec;

use libm::{log, sqrt};
use rand::Rng;

use crate::rng::Stream;

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Population variance.
pub fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64
}

/// Column means of an `n × d` row-major array.
pub fn column_means(points: &[f64], d: usize) -> Vec<f64> {
    let n = points.len() / d;
    let mut m = vec![0.0; d];
    for row in points.chunks_exact(d) {
        for (acc, v) in m.iter_mut().zip(row) {
            *acc += v;
        }
    }
    m.iter_mut().for_each(|v| *v /= n as f64);
    m
}

/// Population covariance (row-major `d × d`) of an `n × d` array.
pub fn covariance(points: &[f64], d: usize) -> Vec<f64> {
    let n = points.len() / d;
    let m = column_means(points, d);
    let mut c = vec![0.0; d * d];
    for row in points.chunks_exact(d) {
        for i in 0..d {
            let di = row[i] - m[i];
            for j in 0..=i {
                c[i * d + j] += di * (row[j] - m[j]);
            }
        }
    }
    for i in 0..d {
        for j in 0..=i {
            c[i * d + j] /= n as f64;
            c[j * d + i] = c[i * d + j];
        }
    }
    c
}

/// Linear-interpolated quantile of sorted data, `q` in `[0, 1]`.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 0 {
        return f64::NAN;
    }
    let pos = q.clamp(0.0, 1.0) * (n - 1) as f64;
    let lo = pos as usize;
    let hi = (lo + 1).min(n - 1);
    let frac = pos - lo as f64;
    sorted[lo] * (1.0 - frac) + sorted[hi] * frac
}

pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    quantile_sorted(&v, 0.5)
}

/// One-sample Kolmogorov–Smirnov statistic of `xs` against `cdf`.
pub fn ks_statistic(xs: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    v.iter().enumerate().fold(0.0_f64, |acc, (i, &x)| {
        let f = cdf(x);
        acc.max(f - i as f64 / n).max((i + 1) as f64 / n - f)
    })
}

/// Two-sample Kolmogorov–Smirnov statistic.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut worst: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = if a[i] <= b[j] { a[i] } else { b[j] };
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        worst = worst.max((i as f64 / na - j as f64 / nb).abs());
    }
    worst
}

/// Asymptotic 99% critical value of the KS statistic (`c(0.01) = 1.628`).
pub const KS_C99: f64 = 1.628;

pub fn ks_critical_99(n: usize) -> f64 {
    KS_C99 / sqrt(n as f64)
}

pub fn ks_critical_99_two_sample(n: usize, m: usize) -> f64 {
    KS_C99 * sqrt((n + m) as f64 / (n as f64 * m as f64))
}

/// Ordinary least-squares slope and intercept.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Option<(f64, f64)> {
    let mx = mean(xs);
    let my = mean(ys);
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if !(sxx > 0.0) {
        return None;
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}

/// Log-log slope with a percentile bootstrap band over `(x, y)` pairs.
/// Returns `(slope, lower, upper)`; `None` when fewer than three distinct
/// abscissae are available.
pub fn loglog_slope_bootstrap(xs: &[f64], ys: &[f64], resamples: usize, rng: &mut Stream) -> Option<(f64, f64, f64)> {
    let lx: Vec<f64> = xs.iter().map(|&x| log(x)).collect();
    let ly: Vec<f64> = ys.iter().map(|&y| log(y)).collect();
    let mut distinct = lx.clone();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    if distinct.len() < 3 {
        return None;
    }
    let (slope, _) = linear_fit(&lx, &ly)?;
    let n = lx.len();
    let mut slopes = Vec::with_capacity(resamples);
    let mut bx = vec![0.0; n];
    let mut by = vec![0.0; n];
    for _ in 0..resamples {
        for k in 0..n {
            let i = rng.random_range(0..n);
            bx[k] = lx[i];
            by[k] = ly[i];
        }
        if let Some((s, _)) = linear_fit(&bx, &by) {
            slopes.push(s);
        }
    }
    if slopes.is_empty() {
        return Some((slope, slope, slope));
    }
    slopes.sort_by(f64::total_cmp);
    let lo = quantile_sorted(&slopes, 0.025).min(slope);
    let hi = quantile_sorted(&slopes, 0.975).max(slope);
    Some((slope, lo, hi))
}

/// Effective sample size of a scalar chain from its autocorrelations,
/// truncated with Geyer's initial positive sequence rule. Returns `None` for
/// a constant chain.
pub fn effective_sample_size(xs: &[f64]) -> Option<f64> {
    let n = xs.len();
    if n < 2 {
        return None;
    }
    let m = mean(xs);
    let var = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n as f64;
    if !(var > 0.0) {
        return None;
    }
    let autocorr = |lag: usize| -> f64 {
        let s: f64 = (0..n - lag).map(|i| (xs[i] - m) * (xs[i + lag] - m)).sum();
        s / (n as f64 * var)
    };
    let max_lag = (n - 1).min(2000);
    let mut tau = -1.0;
    let mut lag = 0;
    while lag < max_lag {
        let pair = autocorr(lag) + autocorr(lag + 1);
        if pair <= 0.0 {
            break;
        }
        tau += 2.0 * pair;
        lag += 2;
    }
    let tau = tau.max(1.0 / n as f64);
    Some((n as f64 / tau).min(n as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn population_variance_convention() {
        assert_relative_eq!(variance(&[-1.0, 1.0]), 1.0);
        let cov = covariance(&[-1.0, 2.0, 1.0, -2.0], 2);
        assert_relative_eq!(cov[0], 1.0);
        assert_relative_eq!(cov[1], -2.0);
        assert_relative_eq!(cov[3], 4.0);
    }

    #[test]
    fn two_sample_ks_identical_is_zero() {
        let a = [0.3, 0.1, 0.7];
        assert_eq!(ks_two_sample(&a, &a), 0.0);
        assert_relative_eq!(ks_two_sample(&[0.0, 1.0], &[2.0, 3.0]), 1.0);
    }

    #[test]
    fn slope_of_power_law() {
        let xs: Vec<f64> = (1..=20).map(|k| k as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x * x).collect();
        let mut rng = crate::rng::stream(1);
        let (s, lo, hi) = loglog_slope_bootstrap(&xs, &ys, 200, &mut rng).unwrap();
        assert_relative_eq!(s, 2.0, epsilon = 1e-12);
        assert!(lo <= s && s <= hi);
    }

    #[test]
    fn ess_of_constant_chain_is_degenerate() {
        assert!(effective_sample_size(&[2.0; 10]).is_none());
    }
}
