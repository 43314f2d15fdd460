use alloc::vec;

use crate::error::Result;
use crate::linalg::dot;
use crate::map::TransportMap;
use crate::rng::{fill_normal, stream};

use super::{BoundReport, WorstCase};

/// Minimum of `⟨T(y) − T(x), y − x⟩` over `n_pairs` Gaussian pairs. The
/// tolerance defaults to the one documented for the map's provenance. The
/// worst point is `x` followed by `y`.
pub fn monotonicity_check(map: &dyn TransportMap, n_pairs: usize, seed: u64, tol: Option<f64>) -> Result<BoundReport> {
    let d = map.dim();
    let tol = tol.unwrap_or_else(|| map.provenance().monotonicity_tolerance());
    let mut report = BoundReport::new("monotonicity", "<T(y) - T(x), y - x> >= 0", tol);
    let mut rng = stream(seed);
    let (mut x, mut y) = (vec![0.0; d], vec![0.0; d]);
    let (mut tx, mut ty) = (vec![0.0; d], vec![0.0; d]);
    let mut diff_t = vec![0.0; d];
    let mut diff = vec![0.0; d];
    let mut worst = f64::INFINITY;
    let mut worst_point = vec![];
    let mut negatives = 0usize;
    for _ in 0..n_pairs {
        fill_normal(&mut rng, &mut x);
        fill_normal(&mut rng, &mut y);
        map.apply(&x, &mut tx)?;
        map.apply(&y, &mut ty)?;
        for k in 0..d {
            diff_t[k] = ty[k] - tx[k];
            diff[k] = y[k] - x[k];
        }
        let v = dot(&diff_t, &diff);
        if v < 0.0 {
            negatives += 1;
        }
        if v < worst {
            worst = v;
            worst_point = x.iter().chain(&y).copied().collect();
        }
    }
    report.passed = n_pairs == 0 || worst >= -tol;
    report.sample_size = n_pairs;
    report.seed = Some(seed);
    if n_pairs > 0 {
        report.constant = Some(worst);
        report.metric("min_inner_product", worst);
        report.worst = Some(WorstCase { point: worst_point, margin: worst });
    }
    report.metric("negative_pairs", negatives as f64);
    report.note(alloc::format!("tolerance {tol:e} for {} maps", map.provenance().as_str()));
    Ok(report)
}
