//! Independent oracles shared by the integration tests. Nothing here calls
//! into the crate's own special functions or quadrature.
#![allow(dead_code)]

use std::f64::consts::SQRT_2;

use statrs::distribution::{ChiSquared, Continuous, ContinuousCDF, Normal};
use statrs::function::erf::erfc;

/// `Φ̄(x)` via the complementary error function.
pub fn normal_sf(x: f64) -> f64 {
    0.5 * erfc(x / SQRT_2)
}

pub fn normal_pdf(x: f64) -> f64 {
    Normal::new(0.0, 1.0).unwrap().pdf(x)
}

/// Closed-form Gaussian-to-Laplace (unit variance) Brenier map,
/// `T(x) = −ln(2Φ̄(x))/√2` for `x ≥ 0`, odd in `x`.
pub fn laplace_map(x: f64) -> f64 {
    let t = -(2.0 * normal_sf(x.abs())).ln() / SQRT_2;
    t.copysign(x)
}

/// `T'(x) = φ(x) / ρ(T(x))` with `ρ(y) = e^{−√2|y|}/√2`.
pub fn laplace_map_derivative(x: f64) -> f64 {
    let y = laplace_map(x);
    normal_pdf(x) / ((-SQRT_2 * y.abs()).exp() / SQRT_2)
}

pub fn laplace_cdf(y: f64) -> f64 {
    if y < 0.0 {
        0.5 * (SQRT_2 * y).exp()
    } else {
        1.0 - 0.5 * (-SQRT_2 * y).exp()
    }
}

pub fn chi_square_cdf(k: f64, x: f64) -> f64 {
    ChiSquared::new(k).unwrap().cdf(x)
}

/// Composite Simpson rule; `n` is rounded up to an even count.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let n = n + n % 2;
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + h * i as f64);
    }
    s * h / 3.0
}

/// Central finite-difference gradient of `f` at `x`.
pub fn fd_gradient(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut y = x.to_vec();
    (0..x.len())
        .map(|i| {
            y[i] = x[i] + h;
            let up = f(&y);
            y[i] = x[i] - h;
            let down = f(&y);
            y[i] = x[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Central finite-difference Jacobian of a vector field, row-major.
pub fn fd_jacobian(f: impl Fn(&[f64]) -> Vec<f64>, x: &[f64], h: f64) -> Vec<f64> {
    let d = x.len();
    let mut y = x.to_vec();
    let mut out = vec![0.0; d * d];
    for j in 0..d {
        y[j] = x[j] + h;
        let up = f(&y);
        y[j] = x[j] - h;
        let down = f(&y);
        y[j] = x[j];
        for i in 0..d {
            out[i * d + j] = (up[i] - down[i]) / (2.0 * h);
        }
    }
    out
}

/// Relative error with an absolute floor, `|a − b| / max(|b|, floor)`.
pub fn rel_err(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / b.abs().max(floor)
}

/// A rotation of `R^d` from a product of Givens rotations with the given
/// angles, applied to `x`.
pub fn rotate(x: &[f64], angles: &[f64]) -> Vec<f64> {
    let d = x.len();
    let mut y = x.to_vec();
    let mut k = 0;
    for i in 0..d {
        for j in (i + 1)..d {
            let t = angles[k % angles.len()];
            k += 1;
            let (c, s) = (t.cos(), t.sin());
            let (a, b) = (y[i], y[j]);
            y[i] = c * a - s * b;
            y[j] = s * a + c * b;
        }
    }
    y
}
