//! Special functions needed by the exact maps: the normal CDF in log space,
//! regularised incomplete gamma functions (for the chi distribution of the
//! Gaussian radius) and a few log-sum-exp helpers.
//!
//! Everything is computed in log space where the tails matter, so that maps
//! can be evaluated far beyond the range where `1 - Φ(x)` underflows.

use core::f64::consts::{LN_2, PI, SQRT_2};

use libm::{erfc, exp, expm1, lgamma, log, log1p, sqrt};

/// `ln(2π) / 2`.
pub const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

pub fn ln_gamma(x: f64) -> f64 {
    lgamma(x)
}

pub fn normal_pdf(x: f64) -> f64 {
    exp(normal_log_pdf(x))
}

pub fn normal_log_pdf(x: f64) -> f64 {
    -0.5 * x * x - LN_SQRT_2PI
}

pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / SQRT_2)
}

/// `ln Φ(x)`, accurate in relative terms over the whole line.
pub fn log_normal_cdf(x: f64) -> f64 {
    if x > 0.0 {
        log1p(-0.5 * erfc(x / SQRT_2))
    } else if x > -37.0 {
        log(0.5 * erfc(-x / SQRT_2))
    } else {
        // Mills-ratio asymptotic series; truncation error below 1e-15 here.
        let z = 1.0 / (x * x);
        let series = 1.0 - z * (1.0 - 3.0 * z * (1.0 - 5.0 * z * (1.0 - 7.0 * z * (1.0 - 9.0 * z))));
        normal_log_pdf(x) - log(-x) + log(series)
    }
}

/// `ln(1 - Φ(x)) = ln Φ(-x)`.
pub fn log_normal_sf(x: f64) -> f64 {
    log_normal_cdf(-x)
}

/// `ln(e^a + e^b)` without overflow; handles `-inf`.
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + log1p(exp(lo - hi))
}

/// `ln(1 - e^a)` for `a <= 0`.
pub fn log1m_exp(a: f64) -> f64 {
    if a > -LN_2 {
        log(-expm1(a))
    } else {
        log1p(-exp(a))
    }
}

const GAMMA_EPS: f64 = 1e-16;
const GAMMA_MAX_ITER: usize = 10_000;

/// Returns `(ln P(a, x), ln Q(a, x))` for the regularised incomplete gamma
/// functions, using the series for `x < a + 1` and Lentz's continued fraction
/// otherwise.
pub fn log_gamma_pq(a: f64, x: f64) -> (f64, f64) {
    debug_assert!(a > 0.0);
    if x <= 0.0 {
        return (f64::NEG_INFINITY, 0.0);
    }
    if x.is_infinite() {
        return (0.0, f64::NEG_INFINITY);
    }
    let prefactor = a * log(x) - x - ln_gamma(a);
    if x < a + 1.0 {
        let mut term = 1.0 / a;
        let mut sum = term;
        let mut ap = a;
        for _ in 0..GAMMA_MAX_ITER {
            ap += 1.0;
            term *= x / ap;
            sum += term;
            if term.abs() < sum.abs() * GAMMA_EPS {
                break;
            }
        }
        let log_p = prefactor + log(sum);
        (log_p, log1m_exp(log_p))
    } else {
        let tiny = 1e-300;
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..GAMMA_MAX_ITER {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < tiny {
                d = tiny;
            }
            c = b + an / c;
            if c.abs() < tiny {
                c = tiny;
            }
            d = 1.0 / d;
            let delta = d * c;
            h *= delta;
            if (delta - 1.0).abs() < GAMMA_EPS {
                break;
            }
        }
        let log_q = prefactor + log(h);
        (log1m_exp(log_q), log_q)
    }
}

/// `(ln P(|X| <= r), ln P(|X| > r))` for `X` standard Gaussian in `R^d`.
pub fn chi_log_cdf_sf(d: usize, r: f64) -> (f64, f64) {
    if r <= 0.0 {
        return (f64::NEG_INFINITY, 0.0);
    }
    log_gamma_pq(0.5 * d as f64, 0.5 * r * r)
}

pub fn chi_cdf(d: usize, r: f64) -> f64 {
    exp(chi_log_cdf_sf(d, r).0)
}

/// Log density of the chi distribution with `d` degrees of freedom.
pub fn chi_log_pdf(d: usize, r: f64) -> f64 {
    if r <= 0.0 {
        return if d == 1 { 0.5 * log(2.0 / PI) } else { f64::NEG_INFINITY };
    }
    let k = d as f64;
    (k - 1.0) * log(r) - 0.5 * r * r - (0.5 * k - 1.0) * LN_2 - ln_gamma(0.5 * k)
}

/// Quantile of the chi distribution, by bisection in log space plus Newton
/// polish. Levels very close to one are resolved through the upper tail.
pub fn chi_quantile(d: usize, level: f64) -> f64 {
    assert!(level > 0.0 && level < 1.0, "chi_quantile level must lie in (0, 1)");
    let upper = level > 0.5;
    let target = if upper { log1p(-level) } else { log(level) };
    let residual = |r: f64| {
        let (lp, lq) = chi_log_cdf_sf(d, r);
        if upper {
            target - lq
        } else {
            lp - target
        }
    };
    // residual is increasing in r
    let mut lo = 0.0;
    let mut hi = sqrt(d as f64) + 1.0;
    while residual(hi) < 0.0 {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if residual(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    0.5 * (lo + hi)
}
