//! Exact Brenier maps from the standard Gaussian.
//!
//! In one dimension the map is `T = F_μ⁻¹ ∘ Φ`; for rotationally symmetric
//! targets it is `T(x) = s(|x|)·x/|x|` where `s` matches the chi distribution
//! of `|X|` to the radial law of the target. Derivatives come from the
//! Monge–Ampère balance `φ_γ(x) = ρ_μ(T(x))·det ∇T(x)`.

use alloc::vec;
use alloc::vec::Vec;

use libm::{exp, log};
use serde::{Deserialize, Serialize};

use crate::cdf1d::{Accuracy, Cdf1d, LogDensity1d, Support, Tail};
use crate::error::{Error, Result};
use crate::linalg::{norm, norm_sq, SymMatrix};
use crate::map::{Provenance, TransportMap};
use crate::potential::Potential;
use crate::rng::{stream, unit_vector};
use crate::sampling::SampleBatch;
use crate::special::{chi_log_cdf_sf, chi_log_pdf, chi_quantile, ln_gamma, log_normal_cdf, normal_log_pdf};
use crate::stats;

/// `t ↦ −V(t)` for a one-dimensional potential.
#[derive(Debug, Clone)]
pub struct LineDensity {
    pot: Potential,
}

impl LineDensity {
    pub fn new(pot: Potential) -> Self {
        Self { pot }
    }
}

impl LogDensity1d for LineDensity {
    fn log_density(&self, t: f64) -> f64 {
        -self.pot.value(&[t])
    }
}

/// `t ↦ (d−1) ln t − V(t e₁)`, the law of `|Y|` up to normalisation.
#[derive(Debug, Clone)]
pub struct RadialDensity {
    pot: Potential,
}

impl LogDensity1d for RadialDensity {
    fn log_density(&self, t: f64) -> f64 {
        let d = self.pot.dim();
        let v = self.pot.axis_value(t);
        if d == 1 {
            -v
        } else {
            (d as f64 - 1.0) * log(t) - v
        }
    }
}

/// `F_μ(x)` for a one-dimensional target.
pub fn cdf_1d(pot: &Potential, x: f64) -> Result<f64> {
    if pot.dim() != 1 {
        return Err(Error::DimensionMismatch { expected: 1, got: pot.dim() });
    }
    Cdf1d::new(LineDensity::new(pot.clone()), Support::Line, &pot.breakpoints_1d())?.cdf(x)
}

/// The monotone rearrangement `T = F_μ⁻¹ ∘ Φ`.
#[derive(Debug, Clone)]
pub struct Brenier1d {
    table: Cdf1d<LineDensity>,
}

pub fn brenier_1d(pot: &Potential) -> Result<Brenier1d> {
    brenier_1d_with_accuracy(pot, Accuracy::default())
}

/// [`brenier_1d`] with an explicit CDF table resolution.
pub fn brenier_1d_with_accuracy(pot: &Potential, accuracy: Accuracy) -> Result<Brenier1d> {
    if pot.dim() != 1 {
        return Err(Error::DimensionMismatch { expected: 1, got: pot.dim() });
    }
    let table = Cdf1d::with_accuracy(LineDensity::new(pot.clone()), Support::Line, &pot.breakpoints_1d(), accuracy)?;
    Ok(Brenier1d { table })
}

impl Brenier1d {
    pub fn target(&self) -> &Potential {
        &self.table.density().pot
    }

    pub fn target_cdf(&self, y: f64) -> Result<f64> {
        self.table.cdf(y)
    }

    pub fn map_scalar(&self, x: f64) -> Result<f64> {
        // match in whichever tail is smaller, so both tails keep full precision
        let tail = if x <= 0.0 { Tail::Lower(log_normal_cdf(x)) } else { Tail::Upper(log_normal_cdf(-x)) };
        self.table.quantile(tail)
    }

    /// `T'(x) = φ(x) / ρ_μ(T(x))`.
    pub fn derivative(&self, x: f64) -> Result<f64> {
        let y = self.map_scalar(x)?;
        self.derivative_at(x, y)
    }

    fn derivative_at(&self, x: f64, y: f64) -> Result<f64> {
        let log_rho = self.table.log_pdf(y);
        if log_rho == f64::NEG_INFINITY {
            return Err(Error::ZeroDensity { at: y });
        }
        Ok(exp(normal_log_pdf(x) - log_rho))
    }
}

impl TransportMap for Brenier1d {
    fn dim(&self) -> usize {
        1
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        out[0] = self.map_scalar(x[0])?;
        Ok(())
    }

    fn provenance(&self) -> Provenance {
        Provenance::Exact1d
    }

    fn has_jacobian(&self) -> bool {
        true
    }

    fn jacobian(&self, x: &[f64]) -> Result<SymMatrix> {
        Ok(SymMatrix::scaled_identity(1, self.derivative(x[0])?))
    }
}

/// Number of nodes in the tabulated radial profile.
pub const PROFILE_NODES: usize = 512;
/// Chi-distribution quantile levels covered by the tabulated profile.
pub const PROFILE_LEVELS: (f64, f64) = (1e-8, 1.0 - 1e-8);

/// The radial reduction `r ↦ s(r)` of a radial Brenier map: a monotone
/// cubic Hermite spline over log-spaced nodes, with exact solves outside.
#[derive(Debug, Clone)]
pub struct RadialProfile {
    dim: usize,
    table: Cdf1d<RadialDensity>,
    radii: Vec<f64>,
    values: Vec<f64>,
    slopes: Vec<f64>,
    /// `s'(0⁺)`
    slope_at_origin: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfilePoint {
    pub s: f64,
    pub ds: f64,
    /// Outside the tabulated range; computed by a direct solve.
    pub extrapolated: bool,
}

impl RadialProfile {
    fn build(pot: &Potential) -> Result<Self> {
        let d = pot.dim();
        let table = Cdf1d::new(RadialDensity { pot: pot.clone() }, Support::HalfLine, &[])?;
        let k = d as f64;
        let log_c_chi = -(0.5 * k - 1.0) * core::f64::consts::LN_2 - ln_gamma(0.5 * k);
        let slope_at_origin = exp((log_c_chi + table.log_normalizer() + pot.axis_value(0.0)) / k);
        let mut profile = Self { dim: d, table, radii: Vec::new(), values: Vec::new(), slopes: Vec::new(), slope_at_origin };

        let r_lo = chi_quantile(d, PROFILE_LEVELS.0);
        let r_hi = chi_quantile(d, PROFILE_LEVELS.1);
        let (l0, l1) = (log(r_lo), log(r_hi));
        for i in 0..PROFILE_NODES {
            let r = exp(l0 + (l1 - l0) * i as f64 / (PROFILE_NODES - 1) as f64);
            let s = profile.solve(r)?;
            profile.radii.push(r);
            profile.values.push(s);
            profile.slopes.push(profile.balance_slope(r, s)?);
        }
        profile.limit_slopes();
        Ok(profile)
    }

    /// Exact `s(r)` by matching the chi CDF against the radial CDF of the
    /// target, in whichever tail is smaller.
    fn solve(&self, r: f64) -> Result<f64> {
        let (lp, lq) = chi_log_cdf_sf(self.dim, r);
        let tail = if lp < lq { Tail::Lower(lp) } else { Tail::Upper(lq) };
        self.table.quantile(tail)
    }

    /// `s'(r) = χ_d(r) / ρ_|Y|(s)`.
    fn balance_slope(&self, r: f64, s: f64) -> Result<f64> {
        let log_rho = self.table.log_pdf(s);
        if log_rho == f64::NEG_INFINITY {
            return Err(Error::ZeroDensity { at: s });
        }
        Ok(exp(chi_log_pdf(self.dim, r) - log_rho))
    }

    /// Fritsch–Carlson limiter; a no-op when the node slopes are exact.
    fn limit_slopes(&mut self) {
        for k in 0..self.radii.len() - 1 {
            let h = self.radii[k + 1] - self.radii[k];
            let delta = (self.values[k + 1] - self.values[k]) / h;
            if delta <= 0.0 {
                self.slopes[k] = 0.0;
                self.slopes[k + 1] = 0.0;
                continue;
            }
            let a = self.slopes[k] / delta;
            let b = self.slopes[k + 1] / delta;
            let n2 = a * a + b * b;
            if n2 > 9.0 {
                let t = 3.0 / libm::sqrt(n2);
                self.slopes[k] = t * a * delta;
                self.slopes[k + 1] = t * b * delta;
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Tabulated `(r, s(r))` nodes.
    pub fn nodes(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.radii.iter().copied().zip(self.values.iter().copied())
    }

    pub fn tabulated_range(&self) -> (f64, f64) {
        (self.radii[0], self.radii[self.radii.len() - 1])
    }

    pub fn slope_at_origin(&self) -> f64 {
        self.slope_at_origin
    }

    pub fn eval(&self, r: f64) -> Result<ProfilePoint> {
        if r <= 0.0 {
            return Ok(ProfilePoint { s: 0.0, ds: self.slope_at_origin, extrapolated: false });
        }
        let (lo, hi) = self.tabulated_range();
        if r < lo || r > hi {
            let s = self.solve(r)?;
            let ds = self.balance_slope(r, s)?;
            return Ok(ProfilePoint { s, ds, extrapolated: r > hi });
        }
        let k = self.radii.partition_point(|&v| v <= r).saturating_sub(1).min(self.radii.len() - 2);
        let (r0, r1) = (self.radii[k], self.radii[k + 1]);
        let h = r1 - r0;
        let t = (r - r0) / h;
        let (y0, y1) = (self.values[k], self.values[k + 1]);
        let (m0, m1) = (self.slopes[k] * h, self.slopes[k + 1] * h);
        let t2 = t * t;
        let t3 = t2 * t;
        let s = (2.0 * t3 - 3.0 * t2 + 1.0) * y0 + (t3 - 2.0 * t2 + t) * m0 + (-2.0 * t3 + 3.0 * t2) * y1 + (t3 - t2) * m1;
        let ds = ((6.0 * t2 - 6.0 * t) * y0 + (3.0 * t2 - 4.0 * t + 1.0) * m0 + (-6.0 * t2 + 6.0 * t) * y1 + (3.0 * t2 - 2.0 * t) * m1) / h;
        Ok(ProfilePoint { s, ds, extrapolated: false })
    }
}

/// `T(x) = s(|x|)·x/|x|`, with `T(0) = 0`.
#[derive(Debug, Clone)]
pub struct RadialMap {
    profile: RadialProfile,
}

/// Spot-checks rotation invariance of `V` at a few seeded random points.
pub fn radial_deviation(pot: &Potential) -> f64 {
    let d = pot.dim();
    let mut rng = stream(0x5eed_0f7a_d1a1);
    let mut u = vec![0.0; d];
    let mut worst: f64 = 0.0;
    for &r in &[0.3, 1.0, 2.5, 7.0] {
        for _ in 0..4 {
            unit_vector(&mut rng, &mut u);
            let x: Vec<f64> = u.iter().map(|v| r * v).collect();
            let a = pot.value(&x);
            let b = pot.axis_value(r);
            worst = worst.max((a - b).abs() / (1.0 + b.abs()));
            if d == 1 {
                worst = worst.max((pot.value(&[-r]) - b).abs() / (1.0 + b.abs()));
            }
        }
    }
    worst
}

pub fn brenier_radial(pot: &Potential) -> Result<RadialMap> {
    let deviation = radial_deviation(pot);
    if deviation > 1e-10 {
        return Err(Error::NonRadial { deviation });
    }
    Ok(RadialMap { profile: RadialProfile::build(pot)? })
}

impl RadialMap {
    pub fn profile(&self) -> &RadialProfile {
        &self.profile
    }

    pub fn target(&self) -> &Potential {
        &self.profile.table.density().pot
    }

    /// `(s'(r), s(r)/r)`: radial and tangential Jacobian eigenvalues.
    pub fn eigen_pair(&self, r: f64) -> Result<(f64, f64)> {
        let p = self.profile.eval(r)?;
        if r == 0.0 {
            return Ok((p.ds, p.ds));
        }
        Ok((p.ds, p.s / r))
    }
}

impl TransportMap for RadialMap {
    fn dim(&self) -> usize {
        self.profile.dim
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        let r = norm(x);
        if r == 0.0 {
            out.iter_mut().for_each(|o| *o = 0.0);
            return Ok(());
        }
        let s = self.profile.eval(r)?.s;
        out.iter_mut().zip(x).for_each(|(o, v)| *o = s / r * v);
        Ok(())
    }

    fn provenance(&self) -> Provenance {
        Provenance::ExactRadial
    }

    fn has_jacobian(&self) -> bool {
        true
    }

    fn jacobian(&self, x: &[f64]) -> Result<SymMatrix> {
        let d = self.dim();
        let r2 = norm_sq(x);
        let r = libm::sqrt(r2);
        let (radial, tangential) = self.eigen_pair(r)?;
        if r == 0.0 {
            return Ok(SymMatrix::scaled_identity(d, radial));
        }
        Ok(SymMatrix::identity_plus_rank_one(d, tangential, (radial - tangential) / r2, x))
    }

    fn jacobian_eigenvalues(&self, x: &[f64]) -> Result<Vec<f64>> {
        let d = self.dim();
        let (radial, tangential) = self.eigen_pair(norm(x))?;
        let mut ev = vec![tangential; d];
        ev[0] = radial;
        ev.sort_by(f64::total_cmp);
        Ok(ev)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualStats {
    /// Median of the raw residuals (absorbs the unknown normalisation of `V`).
    pub median: f64,
    pub max_abs_centered: f64,
    pub worst_point: Vec<f64>,
    pub count: usize,
}

/// `R(x) = −|x|²/2 − (−V(T(x)) + ln det ∇T(x))`, centred by its median.
pub fn monge_ampere_residual(map: &dyn TransportMap, pot: &Potential, points: &SampleBatch) -> Result<ResidualStats> {
    let d = map.dim();
    if pot.dim() != d || points.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, got: points.dim() });
    }
    if !map.has_jacobian() {
        return Err(Error::MissingJacobian);
    }
    let mut residuals = Vec::with_capacity(points.len());
    let mut tx = vec![0.0; d];
    for x in points.rows() {
        map.apply(x, &mut tx)?;
        let ev = map.jacobian_eigenvalues(x)?;
        let det: f64 = ev.iter().product();
        if !(ev.iter().all(|&l| l > 0.0)) {
            return Err(Error::NonPositiveDeterminant { det });
        }
        let log_det: f64 = ev.iter().map(|&l| log(l)).sum();
        residuals.push(-0.5 * norm_sq(x) + pot.value(&tx) - log_det);
    }
    let median = stats::median(&residuals);
    let (mut worst, mut worst_i) = (0.0_f64, 0);
    for (i, r) in residuals.iter().enumerate() {
        if (r - median).abs() > worst {
            worst = (r - median).abs();
            worst_i = i;
        }
    }
    Ok(ResidualStats {
        median,
        max_abs_centered: worst,
        worst_point: if points.is_empty() { Vec::new() } else { points.point(worst_i).to_vec() },
        count: residuals.len(),
    })
}
