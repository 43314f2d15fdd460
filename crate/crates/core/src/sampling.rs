//! Samplers for the Gaussian source and for target measures.
//!
//! All samplers are pure functions of `(parameters, seed)`: identical inputs
//! give bit-identical batches.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use libm::{exp, log, sqrt};
use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::cdf1d::{Cdf1d, Support, Tail};
use crate::error::{Error, Result};
use crate::exact::LineDensity;
use crate::potential::Potential;
use crate::rng::{derive_seed, fill_normal, stream, Stream};
use crate::stats;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SampleProvenance {
    GaussianDirect,
    InverseCdf,
    Mala,
    /// Loaded from a file or built by hand.
    External,
}

impl SampleProvenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::GaussianDirect => "gaussian-direct",
            Self::InverseCdf => "inverse-cdf",
            Self::Mala => "mala",
            Self::External => "external",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "gaussian-direct" => Self::GaussianDirect,
            "inverse-cdf" => Self::InverseCdf,
            "mala" => Self::Mala,
            "external" => Self::External,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub mean: Vec<f64>,
    /// Population covariance, row-major.
    pub covariance: Vec<f64>,
    /// Per-coordinate effective sample size.
    pub ess: Vec<f64>,
    pub acceptance_rate: Option<f64>,
    pub step: Option<f64>,
    /// Set when some coordinate is constant (ESS reported as 1).
    pub degenerate: bool,
    pub warnings: Vec<String>,
}

/// `n` points in `R^d`, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleBatch {
    dim: usize,
    points: Vec<f64>,
    seed: u64,
    provenance: SampleProvenance,
    diagnostics: Option<Diagnostics>,
}

impl SampleBatch {
    pub fn new(dim: usize, points: Vec<f64>, seed: u64, provenance: SampleProvenance) -> Result<Self> {
        if dim == 0 || points.len() % dim != 0 {
            return Err(Error::InvalidParameter { name: "points", reason: alloc::format!("length {} is not a multiple of d = {dim}", points.len()) });
        }
        if points.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter { name: "points", reason: "non-finite coordinate".into() });
        }
        Ok(Self { dim, points, seed, provenance, diagnostics: None })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.points.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn provenance(&self) -> SampleProvenance {
        self.provenance
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> core::slice::ChunksExact<'_, f64> {
        self.points.chunks_exact(self.dim)
    }

    pub fn diagnostics(&self) -> Option<&Diagnostics> {
        self.diagnostics.as_ref()
    }

    /// Values of coordinate `j`.
    pub fn coordinate(&self, j: usize) -> Vec<f64> {
        self.rows().map(|r| r[j]).collect()
    }

    /// `(max |mean_i|, max |cov_ij − δ_ij|)`.
    pub fn isotropy_error(&self) -> (f64, f64) {
        let d = self.dim;
        let m = stats::column_means(&self.points, d);
        let c = stats::covariance(&self.points, d);
        let mean_err = m.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
        let mut cov_err: f64 = 0.0;
        for i in 0..d {
            for j in 0..d {
                let target = if i == j { 1.0 } else { 0.0 };
                cov_err = cov_err.max((c[i * d + j] - target).abs());
            }
        }
        (mean_err, cov_err)
    }
}

/// I.i.d. standard normal points.
pub fn sample_gaussian(d: usize, n: usize, seed: u64) -> Result<SampleBatch> {
    if d == 0 {
        return Err(Error::InvalidParameter { name: "d", reason: "dimension must be at least 1".into() });
    }
    let mut rng = stream(seed);
    let mut points = vec![0.0; n * d];
    fill_normal(&mut rng, &mut points);
    SampleBatch::new(d, points, seed, SampleProvenance::GaussianDirect)
}

/// Uniform on `(0, 1)`, never exactly 0 or 1.
pub(crate) fn open_uniform(rng: &mut Stream) -> f64 {
    ((rng.next_u64() >> 11) as f64 + 0.5) / (1u64 << 53) as f64
}

/// `x = F⁻¹(u)` with `F` tabulated by adaptive quadrature.
pub fn sample_inverse_cdf_1d(pot: &Potential, n: usize, seed: u64) -> Result<SampleBatch> {
    if pot.dim() != 1 {
        return Err(Error::DimensionMismatch { expected: 1, got: pot.dim() });
    }
    let table = Cdf1d::new(LineDensity::new(pot.clone()), Support::Line, &pot.breakpoints_1d())?;
    let mut rng = stream(seed);
    let mut points = Vec::with_capacity(n);
    for _ in 0..n {
        let u = open_uniform(&mut rng);
        let tail = if u < 0.5 { Tail::Lower(log(u)) } else { Tail::Upper(log(1.0 - u)) };
        points.push(table.quantile(tail)?);
    }
    SampleBatch::new(1, points, seed, SampleProvenance::InverseCdf)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MalaOptions {
    /// Langevin step; tuned by a pilot run when `None`.
    pub step: Option<f64>,
    pub burn_in: usize,
    pub thinning: usize,
    pub start: Option<Vec<f64>>,
}

impl Default for MalaOptions {
    fn default() -> Self {
        Self { step: None, burn_in: 2000, thinning: 5, start: None }
    }
}

/// Pilot-run acceptance window for step tuning.
pub const MALA_TARGET_ACCEPTANCE: (f64, f64) = (0.55, 0.60);
const MALA_ACCEPTANCE_LIMITS: (f64, f64) = (0.1, 0.9);

struct MalaChain<'a> {
    pot: &'a Potential,
    step: f64,
    x: Vec<f64>,
    v: f64,
    grad: Vec<f64>,
    proposal: Vec<f64>,
    prop_grad: Vec<f64>,
    noise: Vec<f64>,
}

impl<'a> MalaChain<'a> {
    fn new(pot: &'a Potential, start: Vec<f64>, step: f64) -> Result<Self> {
        let d = pot.dim();
        let mut grad = vec![0.0; d];
        gradient_checked(pot, &start, &mut grad)?;
        let v = pot.value(&start);
        Ok(Self { pot, step, x: start, v, grad, proposal: vec![0.0; d], prop_grad: vec![0.0; d], noise: vec![0.0; d] })
    }

    /// One Metropolis-adjusted Langevin transition; returns acceptance.
    fn advance(&mut self, rng: &mut Stream) -> Result<bool> {
        let h = self.step;
        let s = sqrt(2.0 * h);
        fill_normal(rng, &mut self.noise);
        for i in 0..self.x.len() {
            self.proposal[i] = self.x[i] - h * self.grad[i] + s * self.noise[i];
        }
        match gradient_checked(self.pot, &self.proposal, &mut self.prop_grad) {
            Ok(()) => {}
            // the kink has measure zero; reject the move
            Err(Error::NonSmooth { .. }) => return Ok(false),
            Err(e) => return Err(e),
        }
        let v_prop = self.pot.value(&self.proposal);
        let mut fwd = 0.0;
        let mut bwd = 0.0;
        for i in 0..self.x.len() {
            let a = self.proposal[i] - self.x[i] + h * self.grad[i];
            let b = self.x[i] - self.proposal[i] + h * self.prop_grad[i];
            fwd += a * a;
            bwd += b * b;
        }
        let log_ratio = -v_prop + self.v - (bwd - fwd) / (4.0 * h);
        let u = open_uniform(rng);
        if log(u) < log_ratio {
            core::mem::swap(&mut self.x, &mut self.proposal);
            core::mem::swap(&mut self.grad, &mut self.prop_grad);
            self.v = v_prop;
            Ok(true)
        } else {
            Ok(false)
        }
    }
}

fn gradient_checked(pot: &Potential, x: &[f64], out: &mut [f64]) -> Result<()> {
    pot.gradient(x, out)?;
    if out.iter().any(|g| !g.is_finite()) {
        return Err(Error::NanGradient);
    }
    Ok(())
}

/// Tunes the Langevin step by short pilot runs until the acceptance rate
/// falls in [`MALA_TARGET_ACCEPTANCE`].
pub fn tune_mala_step(pot: &Potential, seed: u64) -> Result<f64> {
    let d = pot.dim();
    let mut rng = stream(derive_seed(seed, "mala-pilot"));
    let mut step = 0.5 / libm::pow(d as f64, 1.0 / 3.0);
    let mut chain = MalaChain::new(pot, vec![1e-3; d], step)?;
    for _ in 0..500 {
        chain.advance(&mut rng)?;
    }
    let mut best = (f64::INFINITY, step);
    for _ in 0..80 {
        chain.step = step;
        let mut accepted = 0;
        const BLOCK: usize = 1000;
        for _ in 0..BLOCK {
            accepted += chain.advance(&mut rng)? as usize;
        }
        let rate = accepted as f64 / BLOCK as f64;
        let centre = 0.5 * (MALA_TARGET_ACCEPTANCE.0 + MALA_TARGET_ACCEPTANCE.1);
        if (rate - centre).abs() < best.0 {
            best = ((rate - centre).abs(), step);
        }
        if rate >= MALA_TARGET_ACCEPTANCE.0 && rate <= MALA_TARGET_ACCEPTANCE.1 {
            return Ok(step);
        }
        step *= exp(2.0 * (rate - centre));
    }
    Ok(best.1)
}

/// Metropolis-adjusted Langevin chain targeting `e^{-V}`.
pub fn sample_mala(pot: &Potential, n: usize, seed: u64, opts: &MalaOptions) -> Result<SampleBatch> {
    let d = pot.dim();
    if n == 0 {
        return SampleBatch::new(d, Vec::new(), seed, SampleProvenance::Mala);
    }
    let step = match opts.step {
        Some(h) if h > 0.0 && h.is_finite() => h,
        Some(h) => return Err(Error::InvalidParameter { name: "step", reason: alloc::format!("must be positive, got {h}") }),
        None => tune_mala_step(pot, seed)?,
    };
    let thinning = opts.thinning.max(1);
    let start = opts.start.clone().unwrap_or_else(|| vec![1e-3; d]);
    let mut chain = MalaChain::new(pot, start, step)?;
    let mut rng = stream(seed);
    for _ in 0..opts.burn_in {
        chain.advance(&mut rng)?;
    }
    let mut points = Vec::with_capacity(n * d);
    let mut accepted = 0usize;
    let total = n * thinning;
    for k in 0..total {
        accepted += chain.advance(&mut rng)? as usize;
        if (k + 1) % thinning == 0 {
            points.extend_from_slice(&chain.x);
        }
    }
    let rate = accepted as f64 / total as f64;
    if rate < MALA_ACCEPTANCE_LIMITS.0 || rate > MALA_ACCEPTANCE_LIMITS.1 {
        return Err(Error::Tuning { rate });
    }
    let mut batch = SampleBatch::new(d, points, seed, SampleProvenance::Mala)?;
    let mut diag = batch_diagnostics(&batch)?;
    diag.acceptance_rate = Some(rate);
    diag.step = Some(step);
    batch.diagnostics = Some(diag);
    Ok(batch)
}

/// Mean, population covariance and per-coordinate ESS.
pub fn batch_diagnostics(b: &SampleBatch) -> Result<Diagnostics> {
    if b.len() < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: b.len() });
    }
    let d = b.dim();
    let mut degenerate = false;
    let mut warnings = Vec::new();
    let ess = (0..d)
        .map(|j| match stats::effective_sample_size(&b.coordinate(j)) {
            Some(e) => e,
            None => {
                degenerate = true;
                warnings.push(alloc::format!("coordinate {j} is constant; ESS reported as 1"));
                1.0
            }
        })
        .collect();
    Ok(Diagnostics {
        mean: stats::column_means(b.points(), d),
        covariance: stats::covariance(b.points(), d),
        ess,
        acceptance_rate: None,
        step: None,
        degenerate,
        warnings,
    })
}

/// Samples from a target, choosing inverse CDF in one dimension and a tuned
/// MALA chain otherwise.
pub fn sample_target(pot: &Potential, n: usize, seed: u64) -> Result<SampleBatch> {
    if pot.dim() == 1 {
        sample_inverse_cdf_1d(pot, n, seed)
    } else {
        sample_mala(pot, n, seed, &MalaOptions::default())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_batches_are_deterministic() {
        let a = sample_gaussian(3, 100, 9).unwrap();
        let b = sample_gaussian(3, 100, 9).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, sample_gaussian(3, 100, 10).unwrap());
    }

    #[test]
    fn empty_mala_request() {
        let pot = Potential::gaussian(2, 1.0).unwrap();
        let b = sample_mala(&pot, 0, 1, &MalaOptions::default()).unwrap();
        assert!(b.is_empty());
    }

    #[test]
    fn two_point_batch_population_variance() {
        let b = SampleBatch::new(1, vec![-1.0, 1.0], 0, SampleProvenance::External).unwrap();
        let diag = batch_diagnostics(&b).unwrap();
        assert_eq!(diag.mean, vec![0.0]);
        assert_eq!(diag.covariance, vec![1.0]);
    }

    #[test]
    fn constant_batch_is_degenerate() {
        let b = SampleBatch::new(1, vec![3.0; 50], 0, SampleProvenance::External).unwrap();
        let diag = batch_diagnostics(&b).unwrap();
        assert!(diag.degenerate);
        assert_eq!(diag.ess, vec![1.0]);
        assert!(!diag.warnings.is_empty());
    }

    #[test]
    fn bad_step_is_rejected_by_acceptance_window() {
        let pot = Potential::gaussian(2, 1.0).unwrap();
        let opts = MalaOptions { step: Some(50.0), burn_in: 10, thinning: 1, start: None };
        assert!(matches!(sample_mala(&pot, 2000, 3, &opts), Err(Error::Tuning { .. })));
    }
}
