//! Executable growth, regularity and concentration checks.
//!
//! Universal constants are fitted and reported; pass/fail binds to growth
//! exponents (gate [`EXPONENT_GATE`]) and to fully explicit constants only.
//! Sampled quantities meet exact inequalities through 3-sigma bands.

mod certificate;
mod concentration;
mod derivative;
mod displacement;
mod monotonicity;
mod probes;
mod report;

pub use certificate::{ball_certificate, BallCertificate, FIntegralBranch, McEstimate};
pub use concentration::{
    concentration_constant_bound_check, concentration_profile, default_radius_grid, ConcentrationKind, ConcentrationProfile, ConcentrationSpec,
    MIN_EXCEEDANCES,
};
pub use derivative::{eigen_log_variance, lp_derivative_norm, opnorm_growth_check, Direction, EigenLogVariance, LpEstimate, LP_MAX_ORDER};
pub use displacement::displacement_bound_check;
pub use monotonicity::monotonicity_check;
pub use probes::{ProbeSet, PROBE_LEVELS};
pub use report::{BoundReport, ExponentFit, WorstCase};

/// Largest accepted log-log growth exponent (2 plus a 0.1 fitting slack).
pub const EXPONENT_GATE: f64 = 2.1;
/// Bootstrap resamples for exponent bands.
pub const BOOTSTRAP_RESAMPLES: usize = 200;

use alloc::vec::Vec;

use crate::rng::Stream;
use crate::stats::loglog_slope_bootstrap;

/// Fits `log y` against `log r` over the largest decade of radii, using the
/// per-radius maximum of `y`. Non-positive values are ignored.
pub(crate) fn fit_top_decade(radii: &[f64], values: &[f64], rng: &mut Stream) -> Option<ExponentFit> {
    let mut pairs: Vec<(f64, f64)> = radii.iter().copied().zip(values.iter().copied()).filter(|&(r, y)| r > 0.0 && y > 0.0 && y.is_finite()).collect();
    if pairs.is_empty() {
        return None;
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut grouped: Vec<(f64, f64)> = Vec::new();
    for (r, y) in pairs {
        match grouped.last_mut() {
            Some(last) if (last.0 - r).abs() <= 1e-12 * r => last.1 = last.1.max(y),
            _ => grouped.push((r, y)),
        }
    }
    let r_max = grouped.last()?.0;
    let window: Vec<(f64, f64)> = grouped.into_iter().filter(|&(r, _)| r >= r_max / 10.0).collect();
    let xs: Vec<f64> = window.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = window.iter().map(|p| p.1).collect();
    let (slope, lower, upper) = loglog_slope_bootstrap(&xs, &ys, BOOTSTRAP_RESAMPLES, rng)?;
    Some(ExponentFit { slope, lower, upper, r_min: xs[0], r_max, points: xs.len() })
}
