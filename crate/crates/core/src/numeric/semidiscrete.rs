//! Semi-discrete transport from the Gaussian onto a finitely supported
//! measure, solved on the concave dual.
//!
//! The map sends `x` to the support point whose Laguerre cell contains it:
//! `argmin_i |x − y_i|²/2 − w_i`. Weights `w` maximise
//! `Σ m_i w_i + E_γ[min_i(|X − y_i|²/2 − w_i)]`, whose gradient is
//! `m_i − γ(Lag_i)`. Cell masses are Monte-Carlo estimates on one fixed
//! Gaussian sample (common random numbers), so the objective is a
//! deterministic function of `w` and every accepted step increases it.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::{dist_sq, dot, norm_sq};
use crate::map::{Provenance, TransportMap};
use crate::rng::{fill_normal, stream};
use crate::sampling::SampleBatch;

/// Points `y_i ∈ R^d` with positive masses summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteMeasure {
    dim: usize,
    points: Vec<f64>,
    masses: Vec<f64>,
}

impl DiscreteMeasure {
    pub fn new(dim: usize, points: Vec<f64>, masses: Vec<f64>) -> Result<Self> {
        if dim == 0 || points.len() != dim * masses.len() {
            return Err(Error::DimensionMismatch { expected: dim * masses.len(), got: points.len() });
        }
        if masses.is_empty() {
            return Err(invalid("masses", "at least one support point is required"));
        }
        if masses.iter().any(|&m| !(m > 0.0 && m.is_finite())) {
            return Err(invalid("masses", "masses must be positive and finite"));
        }
        let total: f64 = masses.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(invalid("masses", alloc::format!("masses sum to {total}, not 1")));
        }
        if points.iter().any(|v| !v.is_finite()) {
            return Err(invalid("points", "support points must be finite"));
        }
        let masses = masses.iter().map(|m| m / total).collect();
        Ok(Self { dim, points, masses })
    }

    /// Every sample with mass `1/n`.
    pub fn uniform(batch: &SampleBatch) -> Result<Self> {
        let n = batch.len();
        Self::new(batch.dim(), batch.points().to_vec(), vec![1.0 / n as f64; n])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.masses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masses.is_empty()
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }
}

/// Lloyd (k-means) quantisation of a sample into at most `n` support points
/// weighted by cluster sizes. Empty clusters are dropped.
pub fn quantize(batch: &SampleBatch, n: usize, iterations: usize, seed: u64) -> Result<DiscreteMeasure> {
    let d = batch.dim();
    let len = batch.len();
    if n == 0 || len < n {
        return Err(Error::TooFewSamples { needed: n.max(1), got: len });
    }
    let mut rng = stream(seed);
    // seed centres with n distinct sample indices
    let mut idx: Vec<usize> = (0..len).collect();
    for k in 0..n {
        let j = rng.random_range(k..len);
        idx.swap(k, j);
    }
    let mut centres: Vec<f64> = idx[..n].iter().flat_map(|&i| batch.point(i).iter().copied()).collect();
    let mut assign = vec![0usize; len];
    let mut sums = vec![0.0; n * d];
    let mut counts = vec![0usize; n];
    for _ in 0..iterations.max(1) {
        let mut changed = false;
        for (i, x) in batch.rows().enumerate() {
            let mut best = (f64::INFINITY, 0);
            for c in 0..n {
                let dd = dist_sq(x, &centres[c * d..(c + 1) * d]);
                if dd < best.0 {
                    best = (dd, c);
                }
            }
            changed |= assign[i] != best.1;
            assign[i] = best.1;
        }
        sums.iter_mut().for_each(|s| *s = 0.0);
        counts.iter_mut().for_each(|c| *c = 0);
        for (i, x) in batch.rows().enumerate() {
            let c = assign[i];
            counts[c] += 1;
            sums[c * d..(c + 1) * d].iter_mut().zip(x).for_each(|(s, v)| *s += v);
        }
        for c in 0..n {
            if counts[c] > 0 {
                for k in 0..d {
                    centres[c * d + k] = sums[c * d + k] / counts[c] as f64;
                }
            }
        }
        if !changed {
            break;
        }
    }
    let mut points = Vec::with_capacity(n * d);
    let mut masses = Vec::with_capacity(n);
    for c in 0..n {
        if counts[c] > 0 {
            points.extend_from_slice(&centres[c * d..(c + 1) * d]);
            masses.push(counts[c] as f64 / len as f64);
        }
    }
    DiscreteMeasure::new(d, points, masses)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemiDiscreteOptions {
    /// Target for `max_i |γ̂(Lag_i) − m_i|`.
    pub tol: f64,
    /// Number of Gaussian samples used for cell masses.
    pub mc_budget: usize,
    pub max_iters: usize,
    pub seed: u64,
}

impl Default for SemiDiscreteOptions {
    fn default() -> Self {
        Self { tol: 1e-3, mc_budget: 200_000, max_iters: 200, seed: 0 }
    }
}

/// A solved semi-discrete plan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemiDiscretePlan {
    target: DiscreteMeasure,
    /// Dual weights, mean zero.
    weights: Vec<f64>,
    mass_residual: f64,
    mc_budget: usize,
    iterations: usize,
    seed: u64,
    /// Dual objective after every accepted step.
    objective_trace: Vec<f64>,
}

impl SemiDiscretePlan {
    /// Rebuilds a plan from stored parts, e.g. after a CSV round trip.
    pub fn from_parts(target: DiscreteMeasure, weights: Vec<f64>, mass_residual: f64, mc_budget: usize, seed: u64) -> Result<Self> {
        if weights.len() != target.len() {
            return Err(Error::DimensionMismatch { expected: target.len(), got: weights.len() });
        }
        Ok(Self { target, weights, mass_residual, mc_budget, iterations: 0, seed, objective_trace: Vec::new() })
    }

    pub fn target(&self) -> &DiscreteMeasure {
        &self.target
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn mass_residual(&self) -> f64 {
        self.mass_residual
    }

    pub fn mc_budget(&self) -> usize {
        self.mc_budget
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn objective_trace(&self) -> &[f64] {
        &self.objective_trace
    }

    /// Index of the Laguerre cell containing `x`; ties go to the lowest index.
    pub fn cell_of(&self, x: &[f64]) -> usize {
        let mut best = (f64::INFINITY, 0);
        for i in 0..self.target.len() {
            let s = 0.5 * dist_sq(x, self.target.point(i)) - self.weights[i];
            if s < best.0 {
                best = (s, i);
            }
        }
        best.1
    }

    /// Fresh Monte-Carlo estimate of every `γ(Lag_i)`.
    pub fn estimate_masses(&self, n: usize, seed: u64) -> Vec<f64> {
        let d = self.target.dim();
        let mut rng = stream(seed);
        let mut x = vec![0.0; d];
        let mut counts = vec![0usize; self.target.len()];
        for _ in 0..n {
            fill_normal(&mut rng, &mut x);
            counts[self.cell_of(&x)] += 1;
        }
        counts.iter().map(|&c| c as f64 / n as f64).collect()
    }
}

/// `y_{i*}` for the cell containing `x`.
pub fn sd_map_eval<'a>(plan: &'a SemiDiscretePlan, x: &[f64]) -> &'a [f64] {
    plan.target.point(plan.cell_of(x))
}

impl TransportMap for SemiDiscretePlan {
    fn dim(&self) -> usize {
        self.target.dim()
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        out.copy_from_slice(sd_map_eval(self, x));
        Ok(())
    }

    fn provenance(&self) -> Provenance {
        Provenance::SemiDiscrete
    }
}

fn reject_duplicates(target: &DiscreteMeasure) -> Result<()> {
    let mut order: Vec<usize> = (0..target.len()).collect();
    order.sort_by(|&a, &b| {
        let (pa, pb) = (target.point(a), target.point(b));
        pa.iter().zip(pb).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(core::cmp::Ordering::Equal)
    });
    for w in order.windows(2) {
        if target.point(w[0]) == target.point(w[1]) {
            return Err(Error::DuplicatePoint { index: w[0].max(w[1]) });
        }
    }
    Ok(())
}

/// Fixed Gaussian sample and the cached per-sample assignment data.
struct Evaluation {
    objective: f64,
    masses: Vec<f64>,
    best: Vec<u32>,
    second: Vec<u32>,
    gap: Vec<f64>,
}

struct Dual<'a> {
    target: &'a DiscreteMeasure,
    samples: Vec<f64>,
    half_sq_samples: Vec<f64>,
    half_sq_points: Vec<f64>,
}

impl Dual<'_> {
    fn evaluate(&self, w: &[f64]) -> Evaluation {
        let d = self.target.dim();
        let n = self.target.len();
        let m = self.half_sq_samples.len();
        let mut counts = vec![0usize; n];
        let mut best = vec![0u32; m];
        let mut second = vec![0u32; m];
        let mut gap = vec![f64::INFINITY; m];
        let mut total = 0.0;
        let offsets: Vec<f64> = (0..n).map(|i| self.half_sq_points[i] - w[i]).collect();
        for s in 0..m {
            let x = &self.samples[s * d..(s + 1) * d];
            let (mut b1, mut v1) = (0usize, f64::INFINITY);
            let (mut b2, mut v2) = (0usize, f64::INFINITY);
            for i in 0..n {
                let v = offsets[i] - dot(x, self.target.point(i));
                if v < v1 {
                    b2 = b1;
                    v2 = v1;
                    b1 = i;
                    v1 = v;
                } else if v < v2 {
                    b2 = i;
                    v2 = v;
                }
            }
            counts[b1] += 1;
            best[s] = b1 as u32;
            second[s] = b2 as u32;
            gap[s] = v2 - v1;
            total += self.half_sq_samples[s] + v1;
        }
        let inv = 1.0 / m as f64;
        let objective = dot(self.target.masses(), w) + total * inv;
        Evaluation { objective, masses: counts.iter().map(|&c| c as f64 * inv).collect(), best, second, gap }
    }
}

/// Jacobian of the cell masses with respect to `w`, estimated from the
/// density of samples near a cell boundary (top-two score gap below `τ`).
fn mass_jacobian(ev: &Evaluation, masses: &[f64]) -> Vec<f64> {
    let n = masses.len();
    let m = ev.gap.len();
    let mut finite: Vec<f64> = ev.gap.iter().copied().filter(|g| g.is_finite()).collect();
    let mut h = vec![0.0; n * n];
    if finite.is_empty() {
        return h;
    }
    let k = (finite.len() / 10).min(finite.len() - 1);
    let (_, tau, _) = finite.select_nth_unstable_by(k, f64::total_cmp);
    let tau = tau.max(1e-12);
    let unit = 1.0 / (m as f64 * tau);
    for s in 0..m {
        if ev.gap[s] < tau {
            let (a, b) = (ev.best[s] as usize, ev.second[s] as usize);
            h[a * n + a] += unit;
            h[b * n + b] += unit;
            h[a * n + b] -= unit;
            h[b * n + a] -= unit;
        }
    }
    for i in 0..n {
        if h[i * n + i] == 0.0 {
            h[i * n + i] = masses[i] / tau;
        }
    }
    // groups of cells without sampled boundaries to the rest make the
    // estimate singular beyond the constant direction
    let ridge = 1e-4 * (0..n).map(|i| h[i * n + i]).sum::<f64>() / n as f64;
    for i in 0..n {
        h[i * n + i] += ridge;
    }
    h
}

/// Jacobi-preconditioned conjugate gradients for `H x = g` with `H`
/// symmetric positive semi-definite and `g` orthogonal to its kernel.
fn solve_cg(h: &[f64], g: &[f64]) -> Vec<f64> {
    let n = g.len();
    let diag: Vec<f64> = (0..n).map(|i| h[i * n + i].max(1e-300)).collect();
    let matvec = |v: &[f64], out: &mut [f64]| {
        for i in 0..n {
            out[i] = dot(&h[i * n..(i + 1) * n], v);
        }
    };
    let mut x = vec![0.0; n];
    let mut r = g.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&diag).map(|(a, b)| a / b).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let target = 1e-20 * norm_sq(g);
    let mut hp = vec![0.0; n];
    for _ in 0..4 * n {
        if norm_sq(&r) <= target {
            break;
        }
        matvec(&p, &mut hp);
        let php = dot(&p, &hp);
        if !(php > 0.0) {
            break;
        }
        let alpha = rz / php;
        x.iter_mut().zip(&p).for_each(|(a, b)| *a += alpha * b);
        r.iter_mut().zip(&hp).for_each(|(a, b)| *a -= alpha * b);
        z.iter_mut().zip(r.iter().zip(&diag)).for_each(|(a, (b, c))| *a = b / c);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        p.iter_mut().zip(&z).for_each(|(a, b)| *a = b + beta * *a);
    }
    x
}

fn center(w: &mut [f64]) {
    let mean = w.iter().sum::<f64>() / w.len() as f64;
    w.iter_mut().for_each(|v| *v -= mean);
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Damped Newton ascent on the semi-discrete dual.
pub fn semidiscrete_solve(target: &DiscreteMeasure, opts: &SemiDiscreteOptions) -> Result<SemiDiscretePlan> {
    if !(opts.tol > 0.0) {
        return Err(invalid("tol", "mass tolerance must be positive"));
    }
    if opts.mc_budget == 0 || opts.max_iters == 0 {
        return Err(invalid("mc_budget", "budgets must be positive"));
    }
    reject_duplicates(target)?;
    let n = target.len();
    let d = target.dim();
    if n == 1 {
        return Ok(SemiDiscretePlan {
            target: target.clone(),
            weights: vec![0.0],
            mass_residual: 0.0,
            mc_budget: opts.mc_budget,
            iterations: 0,
            seed: opts.seed,
            objective_trace: Vec::new(),
        });
    }

    let mut rng = stream(opts.seed);
    let mut samples = vec![0.0; opts.mc_budget * d];
    fill_normal(&mut rng, &mut samples);
    let dual = Dual {
        target,
        half_sq_samples: samples.chunks_exact(d).map(|x| 0.5 * norm_sq(x)).collect(),
        half_sq_points: (0..n).map(|i| 0.5 * norm_sq(target.point(i))).collect(),
        samples,
    };

    let mut w = vec![0.0; n];
    let mut ev = dual.evaluate(&w);
    let mut residual = max_abs_diff(&ev.masses, target.masses());
    let mut trace = vec![ev.objective];
    let mut iterations = 0;
    while residual > opts.tol {
        if iterations == opts.max_iters {
            return Err(Error::NonConvergence { iterations, residual });
        }
        iterations += 1;
        let mut grad: Vec<f64> = target.masses().iter().zip(&ev.masses).map(|(m, g)| m - g).collect();
        center(&mut grad);
        let h = mass_jacobian(&ev, target.masses());
        let step = solve_cg(&h, &grad);
        let mut eta = 1.0;
        loop {
            let mut trial: Vec<f64> = w.iter().zip(&step).map(|(a, b)| a + eta * b).collect();
            center(&mut trial);
            let next = dual.evaluate(&trial);
            let tol = 1e-13 * (1.0 + ev.objective.abs());
            if next.objective >= ev.objective - tol {
                w = trial;
                ev = next;
                break;
            }
            eta *= 0.5;
            if eta < 1e-10 {
                return Err(Error::NonConvergence { iterations, residual });
            }
        }
        residual = max_abs_diff(&ev.masses, target.masses());
        trace.push(ev.objective);
    }

    Ok(SemiDiscretePlan {
        target: target.clone(),
        weights: w,
        mass_residual: residual,
        mc_budget: opts.mc_budget,
        iterations,
        seed: opts.seed,
        objective_trace: trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn opts() -> SemiDiscreteOptions {
        SemiDiscreteOptions { tol: 2e-3, mc_budget: 100_000, max_iters: 100, seed: 11 }
    }

    #[test]
    fn single_point_takes_everything() {
        let t = DiscreteMeasure::new(3, vec![1.0, 2.0, 3.0], vec![1.0]).unwrap();
        let plan = semidiscrete_solve(&t, &opts()).unwrap();
        assert_eq!(plan.weights(), &[0.0]);
        assert_eq!(sd_map_eval(&plan, &[-5.0, 0.0, 9.0]), &[1.0, 2.0, 3.0]);
    }

    #[test]
    fn uneven_masses_shift_the_boundary() {
        let t = DiscreteMeasure::new(1, vec![-1.0, 1.0], vec![0.25, 0.75]).unwrap();
        let plan = semidiscrete_solve(&t, &opts()).unwrap();
        // cells meet at x = (w₀ − w₁)/2, which must sit at Φ⁻¹(0.25)
        let boundary = (plan.weights()[0] - plan.weights()[1]) / 2.0;
        assert!((boundary + 0.6745).abs() < 0.01, "boundary {boundary}");
        assert!(plan.objective_trace().windows(2).all(|p| p[1] >= p[0] - 1e-12));
    }

    #[test]
    fn duplicates_rejected() {
        let t = DiscreteMeasure::new(2, vec![0.0, 1.0, 2.0, 2.0, 0.0, 1.0], vec![0.3, 0.3, 0.4]).unwrap();
        assert!(matches!(semidiscrete_solve(&t, &opts()), Err(Error::DuplicatePoint { index: 2 })));
    }
}
