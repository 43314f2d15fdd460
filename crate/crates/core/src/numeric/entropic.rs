//! Entropic transport between empirical measures and its barycentric map.

use alloc::vec;
use alloc::vec::Vec;

use libm::{exp, log};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::{dist_sq, SymMatrix};
use crate::map::{Provenance, TransportMap};
use crate::sampling::SampleBatch;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropicOptions {
    pub epsilon: f64,
    pub max_iters: usize,
    /// L¹ marginal violation at which Sinkhorn stops.
    pub tol: f64,
    /// Anneal from a large regularisation down to `epsilon`.
    pub scaling: bool,
}

impl Default for EntropicOptions {
    fn default() -> Self {
        Self { epsilon: 0.05, max_iters: 5000, tol: 1e-4, scaling: true }
    }
}

/// `x ↦ Σ_j π_j(x) y_j` with `π_j(x) ∝ b_j exp((g_j − |x − y_j|²/2)/ε)`.
///
/// This is the gradient of the convex function
/// `ε log Σ_j b_j exp((⟨x, y_j⟩ + g_j − |y_j|²/2)/ε)`, so it is monotone and
/// its Jacobian `Cov_π(x)(y)/ε` is symmetric positive semi-definite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropicMap {
    dim: usize,
    targets: Vec<f64>,
    /// `g_j/ε + ln b_j`
    offsets: Vec<f64>,
    epsilon: f64,
    marginal_error: f64,
    iterations: usize,
}

impl EntropicMap {
    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn marginal_error(&self) -> f64 {
        self.marginal_error
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    fn weights(&self, x: &[f64]) -> Vec<f64> {
        let d = self.dim;
        let mut logits: Vec<f64> = self
            .offsets
            .iter()
            .enumerate()
            .map(|(j, o)| o - 0.5 * dist_sq(x, &self.targets[j * d..(j + 1) * d]) / self.epsilon)
            .collect();
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for l in logits.iter_mut() {
            *l = exp(*l - max);
            total += *l;
        }
        logits.iter_mut().for_each(|l| *l /= total);
        logits
    }

    fn barycentre(&self, w: &[f64], out: &mut [f64]) {
        let d = self.dim;
        out.iter_mut().for_each(|o| *o = 0.0);
        for (j, wj) in w.iter().enumerate() {
            if *wj > 0.0 {
                for k in 0..d {
                    out[k] += wj * self.targets[j * d + k];
                }
            }
        }
    }
}

impl TransportMap for EntropicMap {
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        let w = self.weights(x);
        self.barycentre(&w, out);
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::Unstable("non-finite barycentric projection".into()));
        }
        Ok(())
    }

    fn provenance(&self) -> Provenance {
        Provenance::Entropic
    }

    fn has_jacobian(&self) -> bool {
        true
    }

    fn jacobian(&self, x: &[f64]) -> Result<SymMatrix> {
        let d = self.dim;
        let w = self.weights(x);
        let mut mean = vec![0.0; d];
        self.barycentre(&w, &mut mean);
        let mut jac = SymMatrix::zeros(d);
        for (j, wj) in w.iter().enumerate() {
            if *wj == 0.0 {
                continue;
            }
            let y = &self.targets[j * d..(j + 1) * d];
            for a in 0..d {
                for b in a..d {
                    let v = jac.get(a, b) + wj * (y[a] - mean[a]) * (y[b] - mean[b]) / self.epsilon;
                    jac.set(a, b, v);
                    jac.set(b, a, v);
                }
            }
        }
        Ok(jac)
    }
}

fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + log(values.map(|v| exp(v - max)).sum::<f64>())
}

/// Log-domain Sinkhorn on the quadratic cost `|x − y|²/2` between two
/// uniformly weighted samples, returning the barycentric projection.
pub fn entropic_map(source: &SampleBatch, target: &SampleBatch, opts: &EntropicOptions) -> Result<EntropicMap> {
    let d = source.dim();
    if target.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, got: target.dim() });
    }
    if !(opts.epsilon > 0.0 && opts.epsilon.is_finite()) {
        return Err(invalid("epsilon", "regularisation must be positive and finite"));
    }
    if !(opts.tol > 0.0) {
        return Err(invalid("tol", "marginal tolerance must be positive"));
    }
    let (n, m) = (source.len(), target.len());
    if n == 0 || m == 0 {
        return Err(Error::TooFewSamples { needed: 1, got: n.min(m) });
    }
    let log_a = -log(n as f64);
    let log_b = -log(m as f64);
    let mut cost = vec![0.0; n * m];
    for (i, x) in source.rows().enumerate() {
        for (j, y) in target.rows().enumerate() {
            cost[i * m + j] = 0.5 * dist_sq(x, y);
        }
    }
    let c_max = cost.iter().copied().fold(0.0, f64::max);

    let mut f = vec![0.0; n];
    let mut g = vec![0.0; m];
    let mut eps = if opts.scaling { c_max.max(opts.epsilon) } else { opts.epsilon };
    let mut iterations = 0;
    let mut error = f64::INFINITY;
    let mut col_max = vec![0.0; m];
    let mut col_sum = vec![0.0; m];
    loop {
        let last_stage = eps <= opts.epsilon;
        let stage_tol = if last_stage { opts.tol } else { opts.tol.max(1e-2) };
        let mut stage_iters = 0;
        loop {
            if iterations >= opts.max_iters {
                return Err(Error::NonConvergence { iterations, residual: error });
            }
            iterations += 1;
            stage_iters += 1;
            // f-update; its shift measures the row-marginal violation
            error = 0.0;
            for i in 0..n {
                let row = &cost[i * m..(i + 1) * m];
                let lse = log_sum_exp(row.iter().zip(&g).map(|(c, gj)| (gj - c) / eps + log_b));
                let f_new = -eps * lse;
                if iterations > 1 {
                    error += exp(log_a) * (exp((f[i] - f_new) / eps) - 1.0).abs();
                }
                f[i] = f_new;
            }
            // g-update through column-wise streaming log-sum-exp
            col_max.iter_mut().for_each(|v| *v = f64::NEG_INFINITY);
            for i in 0..n {
                let row = &cost[i * m..(i + 1) * m];
                for j in 0..m {
                    col_max[j] = f64::max(col_max[j], (f[i] - row[j]) / eps);
                }
            }
            col_sum.iter_mut().for_each(|v| *v = 0.0);
            for i in 0..n {
                let row = &cost[i * m..(i + 1) * m];
                for j in 0..m {
                    col_sum[j] += exp((f[i] - row[j]) / eps - col_max[j]);
                }
            }
            for j in 0..m {
                g[j] = -eps * (col_max[j] + log(col_sum[j]) + log_a);
            }
            if f.iter().chain(&g).any(|v| !v.is_finite()) {
                return Err(Error::Unstable(alloc::format!("non-finite dual potential at epsilon = {eps}")));
            }
            if iterations > 1 && error <= stage_tol && stage_iters > 1 {
                break;
            }
        }
        if last_stage {
            break;
        }
        eps = (eps * 0.5).max(opts.epsilon);
    }

    let offsets = g.iter().map(|gj| gj / eps + log_b).collect();
    Ok(EntropicMap { dim: d, targets: target.points().to_vec(), offsets, epsilon: eps, marginal_error: error, iterations })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::{sample_gaussian, SampleProvenance};

    #[test]
    fn large_epsilon_collapses_to_target_mean() {
        let src = sample_gaussian(1, 200, 1).unwrap();
        let tgt = SampleBatch::new(1, (0..200).map(|i| 3.0 + (i as f64 / 199.0 - 0.5)).collect(), 0, SampleProvenance::External).unwrap();
        let map = entropic_map(&src, &tgt, &EntropicOptions { epsilon: 1e4, scaling: false, ..Default::default() }).unwrap();
        for &x in &[-2.0, 0.0, 2.0] {
            assert!((map.eval(&[x]).unwrap()[0] - 3.0).abs() < 1e-3);
        }
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let src = sample_gaussian(2, 300, 2).unwrap();
        let tgt = sample_gaussian(2, 300, 3).unwrap();
        let map = entropic_map(&src, &tgt, &EntropicOptions { epsilon: 0.2, ..Default::default() }).unwrap();
        let x = [0.3, -0.7];
        let jac = map.jacobian(&x).unwrap();
        let h = 1e-5;
        for k in 0..2 {
            let mut xp = x;
            let mut xm = x;
            xp[k] += h;
            xm[k] -= h;
            let (tp, tm) = (map.eval(&xp).unwrap(), map.eval(&xm).unwrap());
            for a in 0..2 {
                let fd = (tp[a] - tm[a]) / (2.0 * h);
                assert!((fd - jac.get(a, k)).abs() < 1e-5 * (1.0 + fd.abs()), "{fd} vs {}", jac.get(a, k));
            }
        }
    }
}
