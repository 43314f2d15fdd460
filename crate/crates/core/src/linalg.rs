//! Small dense symmetric matrices (d ≤ ~10) and the cyclic Jacobi
//! eigenvalue method.

use alloc::vec;
use alloc::vec::Vec;

use libm::sqrt;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![0.0; n * n] }
    }

    pub fn identity(n: usize) -> Self {
        Self::scaled_identity(n, 1.0)
    }

    pub fn scaled_identity(n: usize, s: f64) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.data[i * n + i] = s;
        }
        m
    }

    /// Builds from row-major data; the caller is responsible for symmetry
    /// (see [`SymMatrix::asymmetry`]).
    pub fn from_row_major(n: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), n * n);
        Self { n, data }
    }

    /// `a * I + b * v v^T`.
    pub fn identity_plus_rank_one(n: usize, a: f64, b: f64, v: &[f64]) -> Self {
        let mut m = Self::scaled_identity(n, a);
        for i in 0..n {
            for j in 0..n {
                m.data[i * n + j] += b * v[i] * v[j];
            }
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Largest `|a_ij - a_ji|`.
    pub fn asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.n {
            for j in 0..i {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst
    }

    pub fn mul_vec(&self, v: &[f64], out: &mut [f64]) {
        for i in 0..self.n {
            out[i] = (0..self.n).map(|j| self.data[i * self.n + j] * v[j]).sum();
        }
    }

    pub fn quadratic_form(&self, v: &[f64]) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.n {
            for j in 0..self.n {
                acc += v[i] * self.data[i * self.n + j] * v[j];
            }
        }
        acc
    }

    /// `self * other`, assuming both are symmetric and commute is NOT required;
    /// the result is symmetrised, which is exact for congruences `B A B`.
    pub fn mul(&self, other: &SymMatrix) -> Vec<f64> {
        let n = self.n;
        let mut out = vec![0.0; n * n];
        for i in 0..n {
            for k in 0..n {
                let a = self.data[i * n + k];
                for j in 0..n {
                    out[i * n + j] += a * other.data[k * n + j];
                }
            }
        }
        out
    }

    /// `B A B` for symmetric `B` (`self` is `A`).
    pub fn congruence(&self, b: &SymMatrix) -> SymMatrix {
        let n = self.n;
        let ab = self.mul(b);
        let mut out = SymMatrix::zeros(n);
        for i in 0..n {
            for j in 0..n {
                out.data[i * n + j] = (0..n).map(|k| b.data[i * n + k] * ab[k * n + j]).sum();
            }
        }
        out.symmetrize();
        out
    }

    pub fn symmetrize(&mut self) {
        for i in 0..self.n {
            for j in 0..i {
                let v = 0.5 * (self.get(i, j) + self.get(j, i));
                self.set(i, j, v);
                self.set(j, i, v);
            }
        }
    }

    /// Ascending eigenvalues.
    pub fn eigenvalues(&self) -> Vec<f64> {
        self.eigen().0
    }

    /// Ascending eigenvalues and the matching eigenvectors (columns of the
    /// returned row-major matrix).
    pub fn eigen(&self) -> (Vec<f64>, Vec<f64>) {
        let n = self.n;
        let mut a = self.clone();
        a.symmetrize();
        let mut v = SymMatrix::identity(n).data;
        let a = &mut a.data;
        for _sweep in 0..100 {
            let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| a[i * n + j] * a[i * n + j]).sum();
            let scale: f64 = (0..n).map(|i| a[i * n + i] * a[i * n + i]).sum::<f64>() + off;
            if off <= 1e-30 * scale || off == 0.0 {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    let apq = a[p * n + q];
                    if apq == 0.0 {
                        continue;
                    }
                    let app = a[p * n + p];
                    let aqq = a[q * n + q];
                    let theta = (aqq - app) / (2.0 * apq);
                    let t = if theta >= 0.0 { 1.0 / (theta + sqrt(1.0 + theta * theta)) } else { -1.0 / (-theta + sqrt(1.0 + theta * theta)) };
                    let c = 1.0 / sqrt(1.0 + t * t);
                    let s = t * c;
                    for k in 0..n {
                        let akp = a[k * n + p];
                        let akq = a[k * n + q];
                        a[k * n + p] = c * akp - s * akq;
                        a[k * n + q] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let apk = a[p * n + k];
                        let aqk = a[q * n + k];
                        a[p * n + k] = c * apk - s * aqk;
                        a[q * n + k] = s * apk + c * aqk;
                    }
                    for k in 0..n {
                        let vkp = v[k * n + p];
                        let vkq = v[k * n + q];
                        v[k * n + p] = c * vkp - s * vkq;
                        v[k * n + q] = s * vkp + c * vkq;
                    }
                }
            }
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| a[i * n + i].total_cmp(&a[j * n + j]));
        let values = order.iter().map(|&i| a[i * n + i]).collect();
        let mut vectors = vec![0.0; n * n];
        for (col, &src) in order.iter().enumerate() {
            for k in 0..n {
                vectors[k * n + col] = v[k * n + src];
            }
        }
        (values, vectors)
    }

    /// `f(self)` through the eigendecomposition.
    pub fn map_spectrum(&self, f: impl Fn(f64) -> f64) -> SymMatrix {
        let n = self.n;
        let (vals, vecs) = self.eigen();
        let mut out = SymMatrix::zeros(n);
        for (k, &lam) in vals.iter().enumerate() {
            let fl = f(lam);
            for i in 0..n {
                for j in 0..n {
                    out.data[i * n + j] += fl * vecs[i * n + k] * vecs[j * n + k];
                }
            }
        }
        out.symmetrize();
        out
    }

    /// Product of eigenvalues.
    pub fn determinant(&self) -> f64 {
        self.eigenvalues().iter().product()
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    sqrt(dot(a, a))
}

pub fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

pub fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn jacobi_recovers_known_spectrum() {
        let m = SymMatrix::from_row_major(3, vec![2.0, -1.0, 0.0, -1.0, 2.0, -1.0, 0.0, -1.0, 2.0]);
        let ev = m.eigenvalues();
        let s2 = core::f64::consts::SQRT_2;
        assert_relative_eq!(ev[0], 2.0 - s2, epsilon = 1e-14);
        assert_relative_eq!(ev[1], 2.0, epsilon = 1e-14);
        assert_relative_eq!(ev[2], 2.0 + s2, epsilon = 1e-14);
    }

    #[test]
    fn inverse_square_root_squares_to_inverse() {
        let m = SymMatrix::from_row_major(2, vec![4.0, 1.0, 1.0, 3.0]);
        let r = m.map_spectrum(|l| 1.0 / libm::sqrt(l));
        let back = m.congruence(&r);
        for i in 0..2 {
            for j in 0..2 {
                assert_relative_eq!(back.get(i, j), if i == j { 1.0 } else { 0.0 }, epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn rank_one_update_eigenvalues() {
        let v = [0.6, 0.8];
        let m = SymMatrix::identity_plus_rank_one(2, 2.0, 3.0, &v);
        let ev = m.eigenvalues();
        assert_relative_eq!(ev[0], 2.0, epsilon = 1e-14);
        assert_relative_eq!(ev[1], 5.0, epsilon = 1e-14);
    }
}
