use alloc::vec;
use alloc::vec::Vec;

use libm::pow;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{norm, SymMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    Exact1d,
    ExactRadial,
    SemiDiscrete,
    Entropic,
    /// Closed-form maps used as references and harness test doubles.
    Synthetic,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Exact1d => "exact-1d",
            Self::ExactRadial => "exact-radial",
            Self::SemiDiscrete => "semi-discrete",
            Self::Entropic => "entropic",
            Self::Synthetic => "synthetic",
        }
    }

    /// Documented slack for `⟨T(y) − T(x), y − x⟩ ≥ −tol`, relative to
    /// `|y − x|²`-scale quantities of order one.
    pub fn monotonicity_tolerance(self) -> f64 {
        match self {
            Self::Exact1d | Self::ExactRadial | Self::Synthetic => 1e-8,
            // both are gradients of convex functions up to rounding
            Self::SemiDiscrete => 1e-9,
            Self::Entropic => 1e-8,
        }
    }
}

/// A map `x ↦ T(x)` from the Gaussian source space, optionally with its
/// (symmetric) Jacobian.
pub trait TransportMap: Send + Sync {
    fn dim(&self) -> usize;

    fn apply(&self, x: &[f64], out: &mut [f64]) -> Result<()>;

    fn provenance(&self) -> Provenance;

    fn has_jacobian(&self) -> bool {
        false
    }

    fn jacobian(&self, _x: &[f64]) -> Result<SymMatrix> {
        Err(Error::MissingJacobian)
    }

    /// Ascending Jacobian eigenvalues.
    fn jacobian_eigenvalues(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.jacobian(x)?.eigenvalues())
    }

    fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.dim()];
        self.apply(x, &mut out)?;
        Ok(out)
    }
}

/// `T(x) = s·x`: identity (`s = 1`), Gaussian rescaling (`s = σ`), the zero
/// map and the anti-monotone double (`s = −1`).
#[derive(Debug, Clone, PartialEq)]
pub struct LinearMap {
    dim: usize,
    scale: f64,
}

impl LinearMap {
    pub fn new(dim: usize, scale: f64) -> Self {
        Self { dim, scale }
    }

    pub fn identity(dim: usize) -> Self {
        Self::new(dim, 1.0)
    }
}

impl TransportMap for LinearMap {
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        out.iter_mut().zip(x).for_each(|(o, v)| *o = self.scale * v);
        Ok(())
    }

    fn provenance(&self) -> Provenance {
        Provenance::Synthetic
    }

    fn has_jacobian(&self) -> bool {
        true
    }

    fn jacobian(&self, _x: &[f64]) -> Result<SymMatrix> {
        Ok(SymMatrix::scaled_identity(self.dim, self.scale))
    }
}

/// `T(x) = |x|^{k−1} x`, the gradient of `|x|^{k+1}/(k+1)`; grows like
/// `|x|^k`. With `k = 3` it is the cubic-growth harness double.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialPowerMap {
    dim: usize,
    exponent: f64,
}

impl RadialPowerMap {
    pub fn new(dim: usize, exponent: f64) -> Self {
        assert!(exponent >= 1.0, "growth exponent must be at least 1");
        Self { dim, exponent }
    }
}

impl TransportMap for RadialPowerMap {
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        let r = norm(x);
        let f = if r == 0.0 { 0.0 } else { pow(r, self.exponent - 1.0) };
        out.iter_mut().zip(x).for_each(|(o, v)| *o = f * v);
        Ok(())
    }

    fn provenance(&self) -> Provenance {
        Provenance::Synthetic
    }

    fn has_jacobian(&self) -> bool {
        true
    }

    fn jacobian(&self, x: &[f64]) -> Result<SymMatrix> {
        let k = self.exponent;
        let r = norm(x);
        if r == 0.0 {
            let v = if k == 1.0 { 1.0 } else { 0.0 };
            return Ok(SymMatrix::scaled_identity(self.dim, v));
        }
        Ok(SymMatrix::identity_plus_rank_one(self.dim, pow(r, k - 1.0), (k - 1.0) * pow(r, k - 3.0), x))
    }
}
