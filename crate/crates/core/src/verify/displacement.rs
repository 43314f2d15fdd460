use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{norm, norm_sq};
use crate::map::TransportMap;
use crate::rng::stream;

use super::{fit_top_decade, BoundReport, ProbeSet, WorstCase, EXPONENT_GATE};

/// Fits `Ĉ = max |T(x)|/(d + |x|²)` over the probes and the growth exponent
/// of `max_{|x|=r} |T(x)|`. Passes when `Ĉ` is finite and the exponent is at
/// most [`EXPONENT_GATE`]; a map with no positive values has no exponent.
pub fn displacement_bound_check(map: &dyn TransportMap, probes: &ProbeSet, seed: u64) -> Result<BoundReport> {
    let d = map.dim();
    if probes.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, got: probes.dim() });
    }
    let mut report = BoundReport::new("displacement", "|T(x)| <= C (d + |x|^2)", EXPONENT_GATE - 2.0);
    let mut tx = vec![0.0; d];
    let mut radii = Vec::with_capacity(probes.len());
    let mut sizes = Vec::with_capacity(probes.len());
    let mut c_hat: f64 = 0.0;
    let mut argmax = probes.rows().next().map(<[f64]>::to_vec).unwrap_or_default();
    for x in probes.rows() {
        map.apply(x, &mut tx)?;
        let size = norm(&tx);
        let ratio = size / (d as f64 + norm_sq(x));
        if ratio > c_hat {
            c_hat = ratio;
            argmax = x.to_vec();
        }
        radii.push(norm(x));
        sizes.push(size);
    }
    let fit = fit_top_decade(&radii, &sizes, &mut stream(seed));
    let exponent_ok = fit.as_ref().map_or(true, |f| f.slope <= EXPONENT_GATE);
    report.passed = c_hat.is_finite() && exponent_ok;
    report.constant = Some(c_hat);
    report.metric("c_hat", c_hat);
    if let Some(f) = &fit {
        report.metric("exponent", f.slope);
    } else {
        report.note("no positive displacements; growth exponent undefined");
    }
    report.worst = Some(WorstCase { point: argmax, margin: fit.as_ref().map_or(EXPONENT_GATE, |f| EXPONENT_GATE - f.slope) });
    report.exponent = fit;
    report.sample_size = probes.len();
    report.seed = Some(seed);
    report.extrapolated_rows = probes.extrapolated_rows();
    Ok(report)
}
