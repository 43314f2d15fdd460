use alloc::vec;
use alloc::vec::Vec;

use libm::{exp, log};

use crate::error::{invalid, Result};
use crate::linalg::norm;
use crate::rng::{stream, unit_vector};
use crate::special::chi_quantile;

/// Chi-distribution levels whose quantiles seed the probe radii.
pub const PROBE_LEVELS: [f64; 12] = [1e-3, 1e-2, 0.1, 0.25, 0.5, 0.75, 0.9, 0.99, 1.0 - 1e-3, 1.0 - 1e-4, 1.0 - 1e-5, 1.0 - 1e-6];
const FAR_RADII: usize = 24;

/// Probe points for growth checks, with the radius beyond which values are
/// extrapolated rather than supported by the source measure.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeSet {
    dim: usize,
    points: Vec<f64>,
    extrapolation_radius: f64,
}

impl ProbeSet {
    /// Gaussian-quantile radii plus `24` log-spaced far radii up to the
    /// `1 − 10⁻⁶` chi quantile, each in `directions` random directions
    /// (`±1` in one dimension).
    pub fn standard(d: usize, directions: usize, seed: u64) -> Result<Self> {
        let r_max = chi_quantile(d, PROBE_LEVELS[PROBE_LEVELS.len() - 1]);
        let mut radii: Vec<f64> = PROBE_LEVELS.iter().map(|&q| chi_quantile(d, q)).collect();
        let (l0, l1) = (log(r_max / 10.0), log(r_max));
        radii.extend((0..FAR_RADII).map(|k| exp(l0 + (l1 - l0) * k as f64 / (FAR_RADII - 1) as f64)));
        radii.sort_by(f64::total_cmp);
        Self::on_radii(d, &radii, directions, seed, r_max)
    }

    /// `count` log-spaced radii on `[r_lo, r_hi]`.
    pub fn log_grid(d: usize, r_lo: f64, r_hi: f64, count: usize, directions: usize, seed: u64) -> Result<Self> {
        if !(r_lo > 0.0 && r_hi > r_lo) || count < 2 {
            return Err(invalid("radii", "need 0 < r_lo < r_hi and at least two radii"));
        }
        let (l0, l1) = (log(r_lo), log(r_hi));
        let radii: Vec<f64> = (0..count).map(|k| exp(l0 + (l1 - l0) * k as f64 / (count - 1) as f64)).collect();
        let r_max = chi_quantile(d, PROBE_LEVELS[PROBE_LEVELS.len() - 1]);
        Self::on_radii(d, &radii, directions, seed, r_max)
    }

    fn on_radii(d: usize, radii: &[f64], directions: usize, seed: u64, extrapolation_radius: f64) -> Result<Self> {
        if d == 0 || directions == 0 {
            return Err(invalid("directions", "dimension and direction count must be positive"));
        }
        let mut rng = stream(seed);
        let mut u = vec![0.0; d];
        let mut points = Vec::new();
        for &r in radii {
            if d == 1 {
                points.extend_from_slice(&[r, -r]);
                continue;
            }
            for _ in 0..directions {
                unit_vector(&mut rng, &mut u);
                points.extend(u.iter().map(|v| r * v));
            }
        }
        Ok(Self { dim: d, points, extrapolation_radius })
    }

    /// Arbitrary points; the extrapolation radius is the `1 − 10⁻⁶` chi quantile.
    pub fn from_points(d: usize, points: Vec<f64>) -> Result<Self> {
        if d == 0 || points.len() % d != 0 {
            return Err(invalid("points", "length must be a multiple of the dimension"));
        }
        Ok(Self { dim: d, points, extrapolation_radius: chi_quantile(d, PROBE_LEVELS[PROBE_LEVELS.len() - 1]) })
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

    pub fn rows(&self) -> core::slice::ChunksExact<'_, f64> {
        self.points.chunks_exact(self.dim)
    }

    pub fn extrapolation_radius(&self) -> f64 {
        self.extrapolation_radius
    }

    pub fn extrapolated_rows(&self) -> usize {
        self.rows().filter(|x| norm(x) > self.extrapolation_radius * (1.0 + 1e-12)).count()
    }
}
