//! Adaptive Gauss–Kronrod (7, 15) quadrature on finite intervals.

use alloc::vec::Vec;

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];

// Gauss weights for the odd-indexed Kronrod nodes (1, 3, 5, 7).
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// One 15-point Kronrod evaluation; returns `(estimate, error estimate)`.
pub fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let pair = f(center - dx) + f(center + dx);
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    (kronrod * half, ((kronrod - gauss) * half).abs())
}

#[derive(Debug, Clone, Copy)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    pub max_intervals: usize,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self { abs: 0.0, rel: 1e-13, max_intervals: 2000 }
    }
}

/// Globally adaptive integration: repeatedly bisects the interval with the
/// largest error estimate until `err <= max(abs, rel * |I|)`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: Tolerance) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let (value, error) = gk15(&f, a, b);
    let mut intervals: Vec<(f64, f64, f64, f64)> = alloc::vec![(a, b, value, error)];
    let mut total = value;
    let mut total_err = error;
    loop {
        let target = tol.abs.max(tol.rel * total.abs());
        if total_err <= target || total_err < 1e-300 {
            return Ok(total);
        }
        if intervals.len() >= tol.max_intervals {
            return Err(Error::Quadrature { lo: a, hi: b, error: total_err });
        }
        let (idx, _) = intervals
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (i, iv)| if iv.3 > best.1 { (i, iv.3) } else { best });
        let (lo, hi, v, e) = intervals.swap_remove(idx);
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            // interval cannot be split further in floating point
            return if total_err <= 1e3 * target {
                Ok(total)
            } else {
                Err(Error::Quadrature { lo: a, hi: b, error: total_err })
            };
        }
        let (v1, e1) = gk15(&f, lo, mid);
        let (v2, e2) = gk15(&f, mid, hi);
        total += v1 + v2 - v;
        total_err += e1 + e2 - e;
        intervals.push((lo, mid, v1, e1));
        intervals.push((mid, hi, v2, e2));
        if total_err < 0.0 {
            total_err = intervals.iter().map(|iv| iv.3).sum();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn polynomial_is_exact() {
        let v = integrate(|x| x.powi(5) - 3.0 * x * x, -1.0, 2.0, Tolerance::default()).unwrap();
        assert_relative_eq!(v, (64.0 - 1.0) / 6.0 - 9.0, epsilon = 1e-13);
    }

    #[test]
    fn laplace_second_moment_is_one() {
        let s2 = core::f64::consts::SQRT_2;
        let f = |t: f64| t * t * (1.0 / s2) * libm::exp(-s2 * t.abs());
        let left = integrate(f, -60.0, 0.0, Tolerance::default()).unwrap();
        let right = integrate(f, 0.0, 60.0, Tolerance::default()).unwrap();
        assert_relative_eq!(left + right, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn reports_failure_on_singularity() {
        let tol = Tolerance { max_intervals: 50, ..Tolerance::default() };
        assert!(integrate(|x: f64| 1.0 / x.abs().sqrt().max(1e-300).powi(3), -1.0, 1.0, tol).is_err());
    }
}
