//! Log-concave target measures `μ = e^{-V} dx`.
//!
//! A [`Potential`] bundles the evaluators `V`, `∇V` and `Hess V` (always up to
//! an additive normalisation constant, which is never computed) together with
//! declared [`Metadata`]: the Hessian band `c₂/(d+|x|)·Id ≤ Hess V ≤ c₁·Id`
//! and optional concentration constants. Potentials are immutable once built.

use alloc::boxed::Box;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::SQRT_2;

use libm::{log, pow, sqrt};
use serde::{Deserialize, Serialize};

use crate::cdf1d::{log_total_mass, Support};
use crate::error::{invalid, Error, Result};
use crate::linalg::{norm, norm_sq, SymMatrix};
use crate::sampling::SampleBatch;
use crate::stats;
use crate::verify::{BoundReport, WorstCase};

/// Declared constants. `None` means "not declared".
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    /// Upper Hessian bound `Hess V ≤ c₁·Id`.
    pub c1: Option<f64>,
    /// Lower band `Hess V ≥ c₂/(d+|x|)·Id`.
    pub c2: Option<f64>,
    /// Radius range over which `c₁`, `c₂` were established.
    pub band_radius_range: Option<(f64, f64)>,
    /// Exponential concentration constant.
    pub alpha: Option<f64>,
    /// Gaussian concentration constant.
    pub beta: Option<f64>,
    pub centered: bool,
    pub isotropic: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Family {
    /// `V = |x|² / (2σ²)`
    Gaussian { sigma: f64 },
    /// `V = √2 Σ|xᵢ|`, unit variance per coordinate.
    LaplaceProduct,
    /// `V = a (d + |x|²)^{p/2}`
    Power { p: f64, a: f64 },
    /// Pushforward of `inner` under `x ↦ A(x − m)`.
    Affine(Box<AffineImage>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffineImage {
    pub inner: Potential,
    pub shift: Vec<f64>,
    /// `A`
    pub whitening: SymMatrix,
    /// `A⁻¹`
    pub coloring: SymMatrix,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Potential {
    dim: usize,
    family: Family,
    meta: Metadata,
}

/// Upper end of the radius range used to establish the power family band.
const POWER_BAND_RADIUS: f64 = 1e6;

impl Potential {
    pub fn gaussian(d: usize, sigma: f64) -> Result<Self> {
        check_dim(d)?;
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(invalid("sigma", format!("must be positive and finite, got {sigma}")));
        }
        let prec = 1.0 / (sigma * sigma);
        Ok(Self {
            dim: d,
            family: Family::Gaussian { sigma },
            meta: Metadata {
                c1: Some(prec),
                // c₂/(d+|x|) ≤ σ⁻² everywhere, tight at the origin
                c2: Some(d as f64 * prec),
                band_radius_range: Some((0.0, f64::INFINITY)),
                alpha: None,
                beta: Some(prec),
                centered: true,
                isotropic: sigma == 1.0,
            },
        })
    }

    pub fn laplace_product(d: usize) -> Result<Self> {
        check_dim(d)?;
        Ok(Self {
            dim: d,
            family: Family::LaplaceProduct,
            meta: Metadata {
                c1: None,
                c2: Some(0.0),
                band_radius_range: None,
                alpha: Some(SQRT_2),
                beta: None,
                centered: true,
                isotropic: true,
            },
        })
    }

    /// Power family with the scale `a` chosen so that `E|X|² = d`, which
    /// makes the (radial) measure exactly isotropic.
    pub fn power(d: usize, p: f64) -> Result<Self> {
        check_dim(d)?;
        check_power_exponent(p)?;
        let a = isotropic_power_scale(d, p)?;
        let mut pot = Self::power_with_scale(d, p, a)?;
        pot.meta.isotropic = true;
        Ok(pot)
    }

    pub fn power_with_scale(d: usize, p: f64, a: f64) -> Result<Self> {
        check_dim(d)?;
        check_power_exponent(p)?;
        if !(a > 0.0) || !a.is_finite() {
            return Err(invalid("a", format!("must be positive and finite, got {a}")));
        }
        let k = d as f64;
        let c1 = a * p * pow(k, 0.5 * p - 1.0);
        let c2 = power_band_c2(d, p, a);
        Ok(Self {
            dim: d,
            family: Family::Power { p, a },
            meta: Metadata {
                c1: Some(c1),
                c2: Some(c2),
                band_radius_range: Some((0.0, POWER_BAND_RADIUS)),
                alpha: None,
                beta: None,
                centered: true,
                isotropic: false,
            },
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn metadata(&self) -> &Metadata {
        &self.meta
    }

    pub fn with_metadata(mut self, meta: Metadata) -> Self {
        self.meta = meta;
        self
    }

    /// Declared rotation invariance `V(x) = f(|x|)`.
    pub fn is_radial(&self) -> bool {
        match &self.family {
            Family::Gaussian { .. } | Family::Power { .. } => true,
            Family::LaplaceProduct => self.dim == 1,
            Family::Affine(_) => false,
        }
    }

    /// True where `∇V` is undefined (a Laplace coordinate sits on its kink).
    pub fn non_smooth_at(&self, x: &[f64]) -> bool {
        match &self.family {
            Family::LaplaceProduct => x.contains(&0.0),
            Family::Affine(img) => self.non_smooth_at_inner(img, x),
            _ => false,
        }
    }

    fn non_smooth_at_inner(&self, img: &AffineImage, y: &[f64]) -> bool {
        let x = img.preimage(y);
        img.inner.non_smooth_at(&x)
    }

    /// Kink locations of the one-dimensional restriction, for quadrature.
    pub fn breakpoints_1d(&self) -> Vec<f64> {
        match &self.family {
            Family::LaplaceProduct => vec![0.0],
            Family::Affine(img) if self.dim == 1 => {
                // y = A(x - m) with scalar A
                let a = img.whitening.get(0, 0);
                img.inner.breakpoints_1d().iter().map(|&x| a * (x - img.shift[0])).collect()
            }
            _ => Vec::new(),
        }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dim);
        match &self.family {
            Family::Gaussian { sigma } => 0.5 * norm_sq(x) / (sigma * sigma),
            Family::LaplaceProduct => SQRT_2 * x.iter().map(|v| v.abs()).sum::<f64>(),
            Family::Power { p, a } => a * pow(self.dim as f64 + norm_sq(x), 0.5 * p),
            Family::Affine(img) => img.inner.value(&img.preimage(x)),
        }
    }

    pub fn gradient(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        self.check_len(x)?;
        match &self.family {
            Family::Gaussian { sigma } => {
                let s2 = sigma * sigma;
                out.iter_mut().zip(x).for_each(|(o, v)| *o = v / s2);
            }
            Family::LaplaceProduct => {
                for (i, (o, &v)) in out.iter_mut().zip(x).enumerate() {
                    if v == 0.0 {
                        return Err(Error::NonSmooth { coordinate: i });
                    }
                    *o = SQRT_2 * v.signum();
                }
            }
            Family::Power { p, a } => {
                let w = self.dim as f64 + norm_sq(x);
                let c = a * p * pow(w, 0.5 * p - 1.0);
                out.iter_mut().zip(x).for_each(|(o, v)| *o = c * v);
            }
            Family::Affine(img) => {
                let inner_x = img.preimage(x);
                let mut g = vec![0.0; self.dim];
                img.inner.gradient(&inner_x, &mut g)?;
                img.coloring.mul_vec(&g, out);
            }
        }
        Ok(())
    }

    pub fn hessian(&self, x: &[f64]) -> Result<SymMatrix> {
        self.check_len(x)?;
        let d = self.dim;
        match &self.family {
            Family::Gaussian { sigma } => Ok(SymMatrix::scaled_identity(d, 1.0 / (sigma * sigma))),
            Family::LaplaceProduct => {
                if let Some(i) = x.iter().position(|&v| v == 0.0) {
                    return Err(Error::NonSmooth { coordinate: i });
                }
                Ok(SymMatrix::zeros(d))
            }
            Family::Power { p, a } => {
                // Hess = t·Id + a p (p-2) w^{p/2-2} x xᵀ with t = f'(r)/r
                let w = d as f64 + norm_sq(x);
                let t = a * p * pow(w, 0.5 * p - 1.0);
                let b = a * p * (p - 2.0) * pow(w, 0.5 * p - 2.0);
                Ok(SymMatrix::identity_plus_rank_one(d, t, b, x))
            }
            Family::Affine(img) => {
                let h = img.inner.hessian(&img.preimage(x))?;
                Ok(h.congruence(&img.coloring))
            }
        }
    }

    /// Closed-form `(radial, tangential)` Hessian eigenvalues at radius `r`
    /// for the radial families: `(f''(r), f'(r)/r)`.
    pub fn radial_eigenvalues(&self, r: f64) -> Option<(f64, f64)> {
        let k = self.dim as f64;
        match &self.family {
            Family::Gaussian { sigma } => {
                let v = 1.0 / (sigma * sigma);
                Some((v, v))
            }
            Family::Power { p, a } => {
                let w = k + r * r;
                let tangential = a * p * pow(w, 0.5 * p - 1.0);
                let radial = a * p * pow(w, 0.5 * p - 2.0) * (k + (p - 1.0) * r * r);
                Some((radial, tangential))
            }
            _ => None,
        }
    }

    /// `V` along the first axis, `r ↦ V(r e₁)`.
    pub fn axis_value(&self, r: f64) -> f64 {
        let mut x = vec![0.0; self.dim];
        x[0] = r;
        self.value(&x)
    }

    fn check_len(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: x.len() });
        }
        Ok(())
    }
}

impl AffineImage {
    /// `x = A⁻¹ y + m`
    pub fn preimage(&self, y: &[f64]) -> Vec<f64> {
        let mut x = vec![0.0; y.len()];
        self.coloring.mul_vec(y, &mut x);
        x.iter_mut().zip(&self.shift).for_each(|(v, m)| *v += m);
        x
    }
}

fn check_dim(d: usize) -> Result<()> {
    if d == 0 {
        return Err(invalid("d", "dimension must be at least 1"));
    }
    Ok(())
}

fn check_power_exponent(p: f64) -> Result<()> {
    if !(p > 1.0 && p <= 2.0) {
        return Err(invalid("p", format!("power exponent must lie in (1, 2], got {p}")));
    }
    Ok(())
}

/// `inf_{0 ≤ r ≤ R} (d + r)·f''(r)`: the tightest lower-band constant on the
/// declared radius range.
fn power_band_c2(d: usize, p: f64, a: f64) -> f64 {
    let k = d as f64;
    let g = |r: f64| {
        let w = k + r * r;
        (k + r) * a * p * pow(w, 0.5 * p - 2.0) * (k + (p - 1.0) * r * r)
    };
    let grid: Vec<f64> = core::iter::once(0.0)
        .chain((0..=4000).map(|i| pow(10.0, -4.0 + 10.0 * i as f64 / 4000.0)))
        .filter(|&r| r <= POWER_BAND_RADIUS)
        .collect();
    let (mut best_i, mut best) = (0, g(0.0));
    for (i, &r) in grid.iter().enumerate() {
        let v = g(r);
        if v < best {
            best = v;
            best_i = i;
        }
    }
    // refine between the neighbours of the grid minimum
    let lo = grid[best_i.saturating_sub(1)];
    let hi = grid[(best_i + 1).min(grid.len() - 1)];
    let (mut a_, mut b_) = (lo, hi);
    for _ in 0..100 {
        let m1 = a_ + (b_ - a_) / 3.0;
        let m2 = b_ - (b_ - a_) / 3.0;
        if g(m1) < g(m2) {
            b_ = m2;
        } else {
            a_ = m1;
        }
    }
    best.min(g(0.5 * (a_ + b_)))
}

/// Scale `a` such that `a (d + |x|²)^{p/2}` has `E|X|² = d`.
fn isotropic_power_scale(d: usize, p: f64) -> Result<f64> {
    let k = d as f64;
    let second_moment = |a: f64| -> Result<f64> {
        // the constant a·d^{p/2} cancels in the ratio and only costs precision
        let f = |t: f64| a * (pow(k + t * t, 0.5 * p) - pow(k, 0.5 * p));
        let m2 = log_total_mass(&|t: f64| (k + 1.0) * log(t) - f(t), Support::HalfLine)?;
        let m0 = log_total_mass(&|t: f64| (k - 1.0) * log(t) - f(t), Support::HalfLine)?;
        Ok(libm::exp(m2 - m0))
    };
    // E|X|² is decreasing in a
    let (mut lo, mut hi) = (-8.0_f64, 8.0_f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if second_moment(libm::exp(mid))? > k {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-14 {
            break;
        }
    }
    Ok(libm::exp(0.5 * (lo + hi)))
}

/// Checks `λ_max(Hess V) ≤ c₁ + tol` and `λ_min ≥ c₂/(d+|x|) − tol` at every
/// point. A missing or zero `c₂` fails the lower band, since the band needs a
/// strictly positive constant.
pub fn hessian_band_check(pot: &Potential, points: &SampleBatch, tol: f64) -> Result<BoundReport> {
    let mut report = BoundReport::new("hessian-band", "c1 Id >= Hess V(x) >= c2/(d+|x|) Id", tol);
    let d = pot.dim();
    if points.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, got: points.dim() });
    }
    let meta = pot.metadata();
    let c1 = meta.c1;
    let c2 = meta.c2.unwrap_or(0.0);
    let mut worst_upper = f64::INFINITY;
    let mut worst_lower = f64::INFINITY;
    let mut worst_point = Vec::new();
    let mut worst_margin = f64::INFINITY;
    let mut skipped = 0usize;
    let mut upper_violations = 0usize;
    let mut lower_violations = 0usize;
    for x in points.rows() {
        let h = match pot.hessian(x) {
            Ok(h) => h,
            Err(Error::NonSmooth { .. }) => {
                skipped += 1;
                continue;
            }
            Err(e) => return Err(e),
        };
        let asym = h.asymmetry();
        if asym > 1e-9 * (1.0 + h.as_slice().iter().fold(0.0_f64, |m, v| m.max(v.abs()))) {
            return Err(Error::NonSymmetricHessian { asymmetry: asym });
        }
        let ev = h.eigenvalues();
        let (lmin, lmax) = (ev[0], ev[d - 1]);
        let upper_margin = c1.map_or(f64::INFINITY, |c| c - lmax);
        let lower_margin = lmin - c2 / (d as f64 + norm(x));
        if upper_margin < -tol {
            upper_violations += 1;
        }
        if lower_margin < -tol {
            lower_violations += 1;
        }
        worst_upper = worst_upper.min(upper_margin);
        worst_lower = worst_lower.min(lower_margin);
        let m = upper_margin.min(lower_margin);
        if m < worst_margin {
            worst_margin = m;
            worst_point = x.to_vec();
        }
    }
    let positive_band = c2 > 0.0;
    report.passed = positive_band && upper_violations == 0 && lower_violations == 0;
    report.sample_size = points.len();
    report.seed = Some(points.seed());
    report.constant = meta.c2;
    report.worst = (!worst_point.is_empty()).then_some(WorstCase { point: worst_point, margin: worst_margin });
    report.metric("worst_upper_margin", worst_upper);
    report.metric("worst_lower_margin", worst_lower);
    report.metric("upper_violations", upper_violations as f64);
    report.metric("lower_violations", lower_violations as f64);
    if let Some(c) = c1 {
        report.metric("c1", c);
    }
    report.metric("c2", c2);
    if let Some((lo, hi)) = meta.band_radius_range {
        report.metric("band_radius_min", lo);
        report.metric("band_radius_max", hi);
    }
    if !positive_band {
        report.note("no strictly positive lower band constant c2 is declared");
    }
    if skipped > 0 {
        report.note(format!("{skipped} points on the non-smooth locus skipped"));
    }
    Ok(report)
}

/// Pushes `pot` forward under `x ↦ A(x − m)`, with `m` the empirical mean and
/// `A` the inverse square root of the empirical covariance of `samples`.
pub fn isotropize(pot: &Potential, samples: &SampleBatch) -> Result<Potential> {
    let d = pot.dim();
    if samples.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, got: samples.dim() });
    }
    let needed = 10 * d * d;
    if samples.len() < needed {
        return Err(Error::TooFewSamples { needed, got: samples.len() });
    }
    let mean = stats::column_means(samples.points(), d);
    let cov = SymMatrix::from_row_major(d, stats::covariance(samples.points(), d));
    let ev = cov.eigenvalues();
    if !(ev[0] > 1e-12 * ev[d - 1].abs().max(1e-300)) {
        return Err(Error::SingularCovariance { min_eigenvalue: ev[0] });
    }
    let whitening = cov.map_spectrum(|l| 1.0 / sqrt(l));
    let coloring = cov.map_spectrum(sqrt);
    // extreme singular values of A⁻¹
    let (s_min, s_max) = (sqrt(ev[0]), sqrt(ev[d - 1]));
    let a_norm = 1.0 / s_min;
    let shift_factor = (1.0 + norm(&mean) / d as f64).max(s_max);
    let old = pot.metadata();
    let meta = Metadata {
        c1: old.c1.map(|c| c * s_max * s_max),
        c2: old.c2.map(|c| c * s_min * s_min / shift_factor),
        band_radius_range: old.band_radius_range,
        alpha: old.alpha.map(|a| a / a_norm),
        beta: old.beta.map(|b| b / (a_norm * a_norm)),
        centered: true,
        isotropic: true,
    };
    Ok(Potential {
        dim: d,
        family: Family::Affine(Box::new(AffineImage { inner: pot.clone(), shift: mean, whitening, coloring })),
        meta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn gaussian_rejects_bad_sigma() {
        assert!(Potential::gaussian(2, 0.0).is_err());
        assert!(Potential::gaussian(2, -1.0).is_err());
        assert!(Potential::gaussian(0, 1.0).is_err());
    }

    #[test]
    fn gaussian_quadratic_values() {
        let g = Potential::gaussian(3, 2.0).unwrap();
        let mut grad = [0.0; 3];
        g.gradient(&[1.0, 2.0, -4.0], &mut grad).unwrap();
        assert_eq!(grad, [0.25, 0.5, -1.0]);
        assert_relative_eq!(g.value(&[1.0, 0.0, 0.0]) - g.value(&[0.0; 3]), 0.125);
        let h = Potential::gaussian(1, 1.0).unwrap().hessian(&[3.7]).unwrap();
        assert_eq!(h.get(0, 0), 1.0);
    }

    #[test]
    fn power_rejects_out_of_range_exponent() {
        assert!(Potential::power_with_scale(2, 1.0, 1.0).is_err());
        assert!(Potential::power_with_scale(2, 2.5, 1.0).is_err());
        assert!(Potential::power(2, 0.5).is_err());
    }

    #[test]
    fn power_second_derivative_at_origin() {
        let pot = Potential::power_with_scale(1, 1.5, 1.0).unwrap();
        let h = pot.hessian(&[0.0]).unwrap();
        assert_relative_eq!(h.get(0, 0), 1.5, epsilon = 1e-15);
        let pot4 = Potential::power_with_scale(4, 1.5, 1.0).unwrap();
        let (rad, tan) = pot4.radial_eigenvalues(0.0).unwrap();
        assert_relative_eq!(rad, 1.5 * pow(4.0, -0.25), epsilon = 1e-15);
        assert_relative_eq!(tan, rad, epsilon = 1e-15);
    }

    #[test]
    fn power_p2_is_standard_gaussian() {
        let pot = Potential::power(3, 2.0).unwrap();
        match pot.family() {
            Family::Power { a, .. } => assert_relative_eq!(*a, 0.5, epsilon = 1e-10),
            _ => unreachable!(),
        }
    }

    #[test]
    fn laplace_flags_kink() {
        let pot = Potential::laplace_product(2).unwrap();
        let mut g = [0.0; 2];
        assert_eq!(pot.gradient(&[0.0, 1.0], &mut g), Err(Error::NonSmooth { coordinate: 0 }));
        assert!(pot.hessian(&[1.0, 0.0]).is_err());
        assert!(pot.value(&[0.0, 0.0]).is_finite());
    }
}
