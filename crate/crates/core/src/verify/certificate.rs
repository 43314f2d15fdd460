//! Numerical certificate for the ball argument behind the displacement
//! bound: a ball of radius `2√d` next to `x`, in the direction of `T(x) − x`,
//! carries enough Gaussian mass, and the test function
//! `f(z) = ⟨z − T(x), u⟩ + |z − T(x)|/2` has a very negative target mean.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use libm::{exp, sqrt};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::{dist_sq, dot, norm, norm_sq};
use crate::rng::{derive_seed, fill_normal, stream};
use crate::sampling::SampleBatch;

use super::{BoundReport, WorstCase};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub estimate: f64,
    pub std_error: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FIntegralBranch {
    pub mean_f: f64,
    pub std_error: f64,
    /// `−|T(x)|/8`
    pub bound: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BallCertificate {
    pub x: Vec<f64>,
    pub tx: Vec<f64>,
    pub u: Vec<f64>,
    /// `γ(B(x + 4√d u, 2√d))`
    pub ball_mass: McEstimate,
    /// `e^{−|x|² − 17d}`, possibly subnormal or zero.
    pub ball_threshold: f64,
    pub ball_passed: bool,
    /// `γ(B(0, 2√d))`
    pub origin_mass: McEstimate,
    pub origin_passed: bool,
    /// Run only when `|T(x)| ≥ 8(1 + |x|²)`, `|T(x)| ≥ 6√d` and target
    /// samples are supplied.
    pub f_integral: Option<FIntegralBranch>,
    pub lipschitz_ratio: f64,
    pub lipschitz_passed: bool,
    pub notes: Vec<String>,
}

impl BallCertificate {
    pub fn passed(&self) -> bool {
        self.ball_passed && self.origin_passed && self.lipschitz_passed && self.f_integral.as_ref().map_or(true, |b| b.passed)
    }

    pub fn to_report(&self, seed: u64) -> BoundReport {
        let mut r = BoundReport::new("ball-certificate", "gamma(B(x + 4 sqrt(d) u, 2 sqrt(d))) >= exp(-|x|^2 - 17 d)", 0.0);
        r.passed = self.passed();
        r.seed = Some(seed);
        r.sample_size = self.ball_mass.n;
        r.constant = Some(self.ball_mass.estimate);
        r.worst = Some(WorstCase { point: self.x.clone(), margin: self.ball_mass.estimate - 3.0 * self.ball_mass.std_error - self.ball_threshold });
        r.metric("ball_mass", self.ball_mass.estimate);
        r.metric("ball_mass_std_error", self.ball_mass.std_error);
        r.metric("ball_threshold", self.ball_threshold);
        r.metric("origin_mass", self.origin_mass.estimate);
        r.metric("origin_mass_std_error", self.origin_mass.std_error);
        r.metric("lipschitz_ratio", self.lipschitz_ratio);
        if let Some(b) = &self.f_integral {
            r.metric("mean_f", b.mean_f);
            r.metric("mean_f_bound", b.bound);
        }
        r.notes.extend(self.notes.iter().cloned());
        r
    }
}

/// `γ(B(c, radius))` by importance sampling from `N(c, I)`; plain Monte
/// Carlo when `c = 0`.
fn gaussian_ball_mass(centre: &[f64], radius: f64, n: usize, seed: u64) -> McEstimate {
    let d = centre.len();
    let mut rng = stream(seed);
    let mut z = vec![0.0; d];
    let half_c2 = 0.5 * norm_sq(centre);
    let r2 = radius * radius;
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for _ in 0..n {
        fill_normal(&mut rng, &mut z);
        // z − c ~ N(0, I); the indicator depends only on that offset
        if norm_sq(&z) <= r2 {
            let y_dot_c = dot(&z, centre) + 2.0 * half_c2;
            let w = exp(half_c2 - y_dot_c);
            sum += w;
            sum_sq += w * w;
        }
    }
    let nf = n as f64;
    let estimate = sum / nf;
    let var = (sum_sq / nf - estimate * estimate).max(0.0);
    McEstimate { estimate, std_error: sqrt(var / nf), n }
}

fn f_value(z: &[f64], tx: &[f64], u: &[f64]) -> f64 {
    let diff: Vec<f64> = z.iter().zip(tx).map(|(a, b)| a - b).collect();
    dot(&diff, u) + 0.5 * norm(&diff)
}

pub fn ball_certificate(x: &[f64], tx: &[f64], mc_budget: usize, seed: u64, target: Option<&SampleBatch>) -> Result<BallCertificate> {
    let d = x.len();
    if d == 0 || tx.len() != d {
        return Err(Error::DimensionMismatch { expected: d, got: tx.len() });
    }
    if mc_budget < 2 {
        return Err(invalid("mc_budget", "at least two Monte-Carlo points are needed"));
    }
    let mut notes = Vec::new();
    let mut u: Vec<f64> = tx.iter().zip(x).map(|(a, b)| a - b).collect();
    let gap = norm(&u);
    if gap > 0.0 {
        u.iter_mut().for_each(|v| *v /= gap);
    } else {
        u.iter_mut().enumerate().for_each(|(k, v)| *v = if k == 0 { 1.0 } else { 0.0 });
        notes.push("T(x) = x; direction u set to e1".into());
    }
    let df = d as f64;
    let radius = 2.0 * sqrt(df);
    let centre: Vec<f64> = x.iter().zip(&u).map(|(a, b)| a + 2.0 * radius * b).collect();

    let ball_mass = gaussian_ball_mass(&centre, radius, mc_budget, derive_seed(seed, "ball"));
    let ball_threshold = exp(-norm_sq(x) - 17.0 * df);
    let ball_passed = ball_mass.estimate - 3.0 * ball_mass.std_error > ball_threshold;
    let origin_mass = gaussian_ball_mass(&vec![0.0; d], radius, mc_budget, derive_seed(seed, "origin"));
    let origin_passed = origin_mass.estimate - 3.0 * origin_mass.std_error >= 0.75;

    let size = norm(tx);
    let f_integral = match target {
        None => {
            notes.push("no target samples; f-integral branch skipped".into());
            None
        }
        Some(_) if size < 8.0 * (1.0 + norm_sq(x)) || size < 6.0 * sqrt(df) => {
            notes.push("|T(x)| below 8(1 + |x|^2) or 6 sqrt(d); f-integral branch skipped".into());
            None
        }
        Some(batch) => {
            if batch.dim() != d {
                return Err(Error::DimensionMismatch { expected: d, got: batch.dim() });
            }
            let values: Vec<f64> = batch.rows().map(|z| f_value(z, tx, &u)).collect();
            let nf = values.len() as f64;
            let mean_f = values.iter().sum::<f64>() / nf;
            let var = values.iter().map(|v| (v - mean_f) * (v - mean_f)).sum::<f64>() / nf;
            let std_error = sqrt(var / nf);
            let bound = -size / 8.0;
            Some(FIntegralBranch { mean_f, std_error, bound, passed: mean_f - 3.0 * std_error <= bound })
        }
    };

    // Lipschitz constant of f from random pairs around T(x)
    let mut rng = stream(derive_seed(seed, "lipschitz"));
    let (mut z, mut w) = (vec![0.0; d], vec![0.0; d]);
    let scale = 1.0 + size;
    let mut lipschitz_ratio: f64 = 0.0;
    for _ in 0..10_000 {
        fill_normal(&mut rng, &mut z);
        fill_normal(&mut rng, &mut w);
        for k in 0..d {
            z[k] = tx[k] + scale * z[k];
            w[k] = z[k] + w[k] * scale * 0.1;
        }
        let dz = sqrt(dist_sq(&z, &w));
        if dz > 0.0 {
            lipschitz_ratio = lipschitz_ratio.max((f_value(&z, tx, &u) - f_value(&w, tx, &u)).abs() / dz);
        }
    }
    // the ratio reaches 1.5 exactly when z − T(x) and w − T(x) are parallel to u
    let lipschitz_passed = lipschitz_ratio <= 1.5 + 1e-6;

    Ok(BallCertificate {
        x: x.to_vec(),
        tx: tx.to_vec(),
        u,
        ball_mass,
        ball_threshold,
        ball_passed,
        origin_mass,
        origin_passed,
        f_integral,
        lipschitz_ratio,
        lipschitz_passed,
        notes,
    })
}
