use alloc::vec;
use alloc::vec::Vec;

use libm::sqrt;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::SymMatrix;
use crate::map::TransportMap;
use crate::potential::Potential;
use crate::rng::derive_seed;
use crate::sampling::{sample_gaussian, sample_target, SampleBatch, SampleProvenance};
use crate::stats;

/// Discrepancies between `T#γ` and direct target samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PushforwardReport {
    pub n: usize,
    /// `max_k |mean_k(T#γ) − mean_k(μ)|`
    pub mean_error: f64,
    pub mean_threshold: f64,
    /// Operator norm of the covariance difference.
    pub covariance_error: f64,
    pub covariance_threshold: f64,
    /// Two-sample KS statistic and its 99% critical value, for `d = 1`.
    pub ks: Option<(f64, f64)>,
    pub passed: bool,
}

/// Population fourth-moment based standard error of each covariance entry.
fn covariance_entry_se(points: &[f64], d: usize, n_eff: f64) -> f64 {
    let means = stats::column_means(points, d);
    let cov = stats::covariance(points, d);
    let n = points.len() / d;
    let mut worst: f64 = 0.0;
    for a in 0..d {
        for b in 0..d {
            let m4: f64 = points
                .chunks_exact(d)
                .map(|x| {
                    let v = (x[a] - means[a]) * (x[b] - means[b]) - cov[a * d + b];
                    v * v
                })
                .sum::<f64>()
                / n as f64;
            worst = worst.max(sqrt(m4 / n_eff));
        }
    }
    worst
}

/// Pushes `n` Gaussian draws through `map` and compares mean, covariance
/// and (in one dimension) the KS distance with `n` target samples.
/// Thresholds are 4-sigma CLT bands, using the effective sample size of
/// correlated target samples where the sampler reports one.
pub fn pushforward_test(map: &dyn TransportMap, pot: &Potential, n: usize, seed: u64) -> Result<PushforwardReport> {
    let d = map.dim();
    if pot.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, got: pot.dim() });
    }
    let source = sample_gaussian(d, n, derive_seed(seed, "pushforward/source"))?;
    let mut pushed = vec![0.0; n * d];
    for (x, out) in source.rows().zip(pushed.chunks_exact_mut(d)) {
        map.apply(x, out)?;
    }
    let pushed = SampleBatch::new(d, pushed, seed, SampleProvenance::External)?;
    let target = sample_target(pot, n, derive_seed(seed, "pushforward/target"))?;
    compare(&pushed, &target)
}

fn compare(pushed: &SampleBatch, target: &SampleBatch) -> Result<PushforwardReport> {
    let d = pushed.dim();
    let (n, m) = (pushed.len(), target.len());
    let ess = target
        .diagnostics()
        .and_then(|diag| diag.ess.iter().copied().reduce(f64::min))
        .map_or(m as f64, |e| e.clamp(1.0, m as f64));

    let mp = stats::column_means(pushed.points(), d);
    let mt = stats::column_means(target.points(), d);
    let cp = stats::covariance(pushed.points(), d);
    let ct = stats::covariance(target.points(), d);

    let mean_error = mp.iter().zip(&mt).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let var_max = (0..d).map(|k| ct[k * d + k].max(cp[k * d + k])).fold(0.0, f64::max);
    let mean_threshold = 4.0 * sqrt(var_max * (1.0 / n as f64 + 1.0 / ess));

    let diff: Vec<f64> = cp.iter().zip(&ct).map(|(a, b)| a - b).collect();
    let covariance_error = SymMatrix::from_row_major(d, diff).eigenvalues().iter().map(|l| l.abs()).fold(0.0, f64::max);
    let se = covariance_entry_se(pushed.points(), d, n as f64).max(covariance_entry_se(target.points(), d, ess));
    // operator norm ≤ d · max entry
    let covariance_threshold = 4.0 * d as f64 * sqrt(2.0) * se;

    let ks = (d == 1).then(|| {
        let stat = stats::ks_two_sample(pushed.points(), target.points());
        (stat, stats::ks_critical_99_two_sample(n, ess as usize))
    });
    let passed = mean_error <= mean_threshold && covariance_error <= covariance_threshold && ks.map_or(true, |(s, c)| s <= c);
    Ok(PushforwardReport { n, mean_error, mean_threshold, covariance_error, covariance_threshold, ks, passed })
}
