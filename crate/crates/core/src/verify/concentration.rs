use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use libm::{log, sqrt};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::{dot, norm, norm_sq};
use crate::map::TransportMap;
use crate::rng::{stream, unit_vector};
use crate::sampling::SampleBatch;

use super::{BoundReport, ProbeSet, WorstCase};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConcentrationKind {
    /// `μ(f ≥ ∫f + r) ≤ e^{−αr}`
    Exponential,
    /// `μ(f ≥ ∫f + r) ≤ e^{−βr²/2}`
    Gaussian,
    /// `μ(f ≥ ∫f + r) ≤ e^{−r²/(r + c√d)}`
    LeeVempala,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationSpec {
    pub kind: ConcentrationKind,
    pub constant: f64,
    pub dim: usize,
}

impl ConcentrationSpec {
    pub fn new(kind: ConcentrationKind, constant: f64, dim: usize) -> Result<Self> {
        if !(constant > 0.0 && constant.is_finite()) {
            return Err(invalid("constant", "concentration constant must be positive"));
        }
        if dim == 0 {
            return Err(invalid("dim", "dimension must be positive"));
        }
        Ok(Self { kind, constant, dim })
    }

    /// The explicit displacement bound implied by the concentration
    /// inequality, at `|x|² = r2`.
    pub fn displacement_bound(&self, r2: f64) -> Result<f64> {
        let s = r2 + 17.0 * self.dim as f64;
        match self.kind {
            ConcentrationKind::Exponential => Ok(f64::max(12.0 / self.constant, 8.0) * s),
            ConcentrationKind::Gaussian => Ok(f64::max(12.0 / sqrt(self.constant), 8.0) * sqrt(s)),
            ConcentrationKind::LeeVempala => Err(Error::UnsupportedKind("lee-vempala has no explicit displacement constant".into())),
        }
    }

    fn reference(&self) -> &'static str {
        match self.kind {
            ConcentrationKind::Exponential => "|T(x)| <= max(12/alpha, 8) (|x|^2 + 17 d)",
            ConcentrationKind::Gaussian => "|T(x)| <= max(12 beta^(-1/2), 8) sqrt(|x|^2 + 17 d)",
            ConcentrationKind::LeeVempala => "",
        }
    }
}

/// Pointwise check of `|T(x)|` against the explicit bound for `spec`.
/// The reported constant is the worst ratio `|T(x)|/bound`.
pub fn concentration_constant_bound_check(map: &dyn TransportMap, spec: &ConcentrationSpec, probes: &ProbeSet) -> Result<BoundReport> {
    let d = map.dim();
    if probes.dim() != d || spec.dim != d {
        return Err(Error::DimensionMismatch { expected: d, got: spec.dim });
    }
    spec.displacement_bound(0.0)?;
    let mut report = BoundReport::new("concentration-constant", spec.reference(), 0.0);
    let mut tx = vec![0.0; d];
    let mut worst_ratio: f64 = 0.0;
    let mut worst = WorstCase { point: Vec::new(), margin: f64::INFINITY };
    for x in probes.rows() {
        map.apply(x, &mut tx)?;
        let bound = spec.displacement_bound(norm_sq(x))?;
        let size = norm(&tx);
        worst_ratio = worst_ratio.max(size / bound);
        if bound - size < worst.margin {
            worst = WorstCase { point: x.to_vec(), margin: bound - size };
        }
    }
    report.passed = probes.is_empty() || worst.margin > 0.0;
    report.constant = Some(worst_ratio);
    report.metric("worst_ratio", worst_ratio);
    report.metric("declared_constant", spec.constant);
    report.sample_size = probes.len();
    report.extrapolated_rows = probes.extrapolated_rows();
    if !probes.is_empty() {
        report.worst = Some(worst);
    }
    Ok(report)
}

/// Upper end of the Wilson score interval for a binomial proportion; unlike
/// `t + z·√(t(1−t)/n)` it stays honest at small counts.
fn wilson_upper(t: f64, n: f64, z: f64) -> f64 {
    let z2 = z * z;
    (t + z2 / (2.0 * n) + z * sqrt(t * (1.0 - t) / n + z2 / (4.0 * n * n))) / (1.0 + z2 / n)
}

/// Minimum number of exceedances for a radius to enter the fit.
pub const MIN_EXCEEDANCES: usize = 5;
const MIN_SAMPLES: usize = 10_000;

/// Empirical tail masses of 1-Lipschitz test functions and the constants
/// that make every tail (inflated to its 3-sigma Wilson upper bound) respect each
/// concentration inequality.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationProfile {
    pub n: usize,
    pub radii: Vec<f64>,
    /// `tails[f][k]`: empirical `μ(f ≥ mean f + radii[k])`; the last test
    /// function is the norm.
    pub tails: Vec<Vec<f64>>,
    /// Largest `α` with every banded tail below `e^{−αr}`.
    pub alpha: Option<f64>,
    /// Largest `β` with every banded tail below `e^{−βr²/2}`.
    pub beta: Option<f64>,
    /// Smallest `c` with every banded tail below `e^{−r²/(r + c√d)}`; the
    /// bound weakens as `c` grows.
    pub lee_vempala_c: Option<f64>,
    /// Radii dropped for some test function for lack of exceedances.
    pub excluded_radii: Vec<f64>,
    pub notes: Vec<String>,
}

impl ConcentrationProfile {
    /// Ungated report; callers attach expected ranges to gate it.
    pub fn to_report(&self) -> BoundReport {
        let mut r = BoundReport::new("concentration-profile", "mu(f >= E f + r) <= exp(-beta r^2 / 2)", 0.0);
        r.gated = false;
        r.passed = true;
        r.sample_size = self.n;
        r.constant = self.beta;
        for (name, v) in [("alpha", self.alpha), ("beta", self.beta), ("lee_vempala_c", self.lee_vempala_c)] {
            if let Some(v) = v {
                r.metric(name, v);
            }
        }
        r.metric("excluded_radii", self.excluded_radii.len() as f64);
        r.notes.extend(self.notes.iter().cloned());
        r
    }
}

/// `count` radii spread evenly up to the largest observed deviation of the
/// norm functional.
pub fn default_radius_grid(samples: &SampleBatch, count: usize) -> Vec<f64> {
    let norms: Vec<f64> = samples.rows().map(norm).collect();
    let mean = norms.iter().sum::<f64>() / norms.len().max(1) as f64;
    let mut top = norms.iter().map(|v| v - mean).fold(0.0, f64::max);
    for x in samples.rows() {
        top = top.max(x.iter().map(|v| v.abs()).fold(0.0, f64::max));
    }
    (1..=count).map(|k| top * k as f64 / count as f64).collect()
}

pub fn concentration_profile(samples: &SampleBatch, n_directions: usize, rs: &[f64], seed: u64) -> Result<ConcentrationProfile> {
    let n = samples.len();
    if n < MIN_SAMPLES {
        return Err(Error::TooFewSamples { needed: MIN_SAMPLES, got: n });
    }
    if rs.iter().any(|r| !(*r >= 0.0)) {
        return Err(invalid("rs", "radii must be non-negative"));
    }
    let d = samples.dim();
    let mut rng = stream(seed);
    let mut u = vec![0.0; d];
    let mut functions: Vec<Vec<f64>> = Vec::with_capacity(n_directions + 1);
    for _ in 0..n_directions {
        unit_vector(&mut rng, &mut u);
        functions.push(samples.rows().map(|x| dot(x, &u)).collect());
    }
    functions.push(samples.rows().map(norm).collect());

    let nf = n as f64;
    let sqrt_d = sqrt(d as f64);
    let mut alpha = f64::INFINITY;
    let mut beta = f64::INFINITY;
    let mut c_min: f64 = 0.0;
    let mut used = 0usize;
    let mut excluded: Vec<f64> = Vec::new();
    let mut tails = Vec::with_capacity(functions.len());
    for values in &mut functions {
        let mean = values.iter().sum::<f64>() / nf;
        values.sort_by(f64::total_cmp);
        let mut row = Vec::with_capacity(rs.len());
        for &r in rs {
            let threshold = mean + r;
            let count = n - values.partition_point(|&v| v < threshold);
            let t = count as f64 / nf;
            row.push(t);
            if r == 0.0 {
                continue;
            }
            if count < MIN_EXCEEDANCES {
                excluded.push(r);
                continue;
            }
            let upper = wilson_upper(t, nf, 3.0).min(1.0);
            let l = -log(upper);
            if !(l > 0.0) {
                continue;
            }
            used += 1;
            alpha = alpha.min(l / r);
            beta = beta.min(2.0 * l / (r * r));
            c_min = c_min.max((r * r / l - r) / sqrt_d);
        }
        tails.push(row);
    }
    excluded.sort_by(f64::total_cmp);
    excluded.dedup();
    let mut notes = Vec::new();
    if !excluded.is_empty() {
        notes.push(format!(
            "{} radii from {:.4} upward excluded for some test function (fewer than {MIN_EXCEEDANCES} exceedances)",
            excluded.len(),
            excluded[0]
        ));
    }
    let fitted = used > 0;
    Ok(ConcentrationProfile {
        n,
        radii: rs.to_vec(),
        tails,
        alpha: fitted.then_some(alpha),
        beta: fitted.then_some(beta),
        lee_vempala_c: fitted.then_some(c_min),
        excluded_radii: excluded,
        notes,
    })
}
