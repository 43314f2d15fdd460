//! Log-space CDF tables for one-dimensional log-concave densities and
//! monotone quantile inversion.
//!
//! A table integrates `exp(log_density)` panel by panel with adaptive
//! Gauss–Kronrod quadrature and stores cumulative masses from both ends in
//! log space, so that `ln F(y)` and `ln(1 - F(y))` are available with full
//! relative accuracy deep into either tail. Partial panels are integrated on
//! demand. Inversion brackets by binary search over the nodes, bisects within
//! the panel to width `1e-8`, then takes two Newton steps.

use alloc::vec::Vec;

use libm::{exp, log};

use crate::error::{Error, Result};
use crate::quad::{integrate, Tolerance};
use crate::special::log_add_exp;

/// Unnormalised log density on the line or the half line.
pub trait LogDensity1d {
    fn log_density(&self, t: f64) -> f64;
}

impl<F: Fn(f64) -> f64> LogDensity1d for F {
    fn log_density(&self, t: f64) -> f64 {
        self(t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Support {
    Line,
    /// `[0, ∞)`
    HalfLine,
}

/// Which tail a log-probability refers to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Tail {
    /// `ln F(y)`
    Lower(f64),
    /// `ln(1 - F(y))`
    Upper(f64),
}

/// Log-density drop (in nats) below the mode at which the table is cut off.
const DROP: f64 = 1500.0;
const BISECTION_WIDTH: f64 = 1e-8;

/// Table resolution: number of equal-width panels and the relative
/// tolerance of the adaptive quadrature inside each panel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Accuracy {
    pub panels: usize,
    pub rel_tol: f64,
}

impl Default for Accuracy {
    fn default() -> Self {
        Self { panels: 4096, rel_tol: 1e-12 }
    }
}

impl Accuracy {
    /// Twice the panels and half the tolerance.
    pub fn doubled(self) -> Self {
        Self { panels: 2 * self.panels, rel_tol: 0.5 * self.rel_tol }
    }

    /// Half the panels and twice the tolerance.
    pub fn halved(self) -> Self {
        Self { panels: (self.panels / 2).max(1), rel_tol: 2.0 * self.rel_tol }
    }
}

#[derive(Debug, Clone)]
pub struct Cdf1d<D> {
    density: D,
    nodes: Vec<f64>,
    /// normalised `ln F` at each node
    log_cdf: Vec<f64>,
    /// normalised `ln(1 - F)` at each node
    log_sf: Vec<f64>,
    log_norm: f64,
    mode: f64,
    accuracy: Accuracy,
}

fn quad_tol(rel: f64) -> Tolerance {
    Tolerance { abs: 0.0, rel, max_intervals: 400 }
}

impl<D: LogDensity1d> Cdf1d<D> {
    /// Builds the table. `breakpoints` are locations where the density is
    /// not smooth (kinks); they become panel boundaries.
    pub fn new(density: D, support: Support, breakpoints: &[f64]) -> Result<Self> {
        Self::with_accuracy(density, support, breakpoints, Accuracy::default())
    }

    pub fn with_accuracy(density: D, support: Support, breakpoints: &[f64], accuracy: Accuracy) -> Result<Self> {
        if accuracy.panels == 0 || !(accuracy.rel_tol > 0.0) {
            return Err(Error::InvalidParameter { name: "accuracy", reason: "need at least one panel and a positive tolerance".into() });
        }
        let panels = accuracy.panels;
        let mode = find_mode(&density, support)?;
        let peak = density.log_density(mode);
        if !peak.is_finite() {
            return Err(Error::Unstable(alloc::format!("log density at mode {mode} is {peak}")));
        }
        let hi = find_cutoff(&density, mode, peak, 1.0);
        let lo = match support {
            Support::HalfLine => 0.0,
            Support::Line => find_cutoff(&density, mode, peak, -1.0),
        };

        let mut nodes: Vec<f64> = (0..=panels).map(|k| lo + (hi - lo) * k as f64 / panels as f64).collect();
        for &b in breakpoints {
            if b > lo && b < hi {
                nodes.push(b);
            }
        }
        nodes.sort_by(f64::total_cmp);
        nodes.dedup();

        let mut log_panels = Vec::with_capacity(nodes.len() - 1);
        for w in nodes.windows(2) {
            log_panels.push(log_integral_with(&density, w[0], w[1], accuracy.rel_tol)?);
        }
        let mut log_cdf = Vec::with_capacity(nodes.len());
        let mut acc = f64::NEG_INFINITY;
        log_cdf.push(acc);
        for &lp in &log_panels {
            acc = log_add_exp(acc, lp);
            log_cdf.push(acc);
        }
        let log_norm = acc;
        let mut log_sf = alloc::vec![f64::NEG_INFINITY; nodes.len()];
        let mut acc = f64::NEG_INFINITY;
        for k in (0..log_panels.len()).rev() {
            acc = log_add_exp(acc, log_panels[k]);
            log_sf[k] = acc;
        }
        log_cdf.iter_mut().for_each(|v| *v -= log_norm);
        log_sf.iter_mut().for_each(|v| *v -= log_norm);
        Ok(Self { density, nodes, log_cdf, log_sf, log_norm, mode, accuracy })
    }

    pub fn density(&self) -> &D {
        &self.density
    }

    pub fn mode(&self) -> f64 {
        self.mode
    }

    /// Table extent; the mass outside is below `e^{-1500}` relative to the peak.
    pub fn range(&self) -> (f64, f64) {
        (self.nodes[0], self.nodes[self.nodes.len() - 1])
    }

    /// Logarithm of the normalising constant `∫ exp(log_density)`.
    pub fn log_normalizer(&self) -> f64 {
        self.log_norm
    }

    pub fn log_pdf(&self, y: f64) -> f64 {
        self.density.log_density(y) - self.log_norm
    }

    pub fn pdf(&self, y: f64) -> f64 {
        exp(self.log_pdf(y))
    }

    fn panel(&self, y: f64) -> usize {
        let last = self.nodes.len() - 2;
        match self.nodes.binary_search_by(|n| n.total_cmp(&y)) {
            Ok(i) => i.min(last),
            Err(i) => i.saturating_sub(1).min(last),
        }
    }

    pub fn log_cdf(&self, y: f64) -> Result<f64> {
        let (lo, hi) = self.range();
        if y <= lo {
            return Ok(if y == lo { self.log_cdf[0] } else { f64::NEG_INFINITY });
        }
        if y >= hi {
            return Ok(0.0);
        }
        let k = self.panel(y);
        let part = log_integral_with(&self.density, self.nodes[k], y, self.accuracy.rel_tol)? - self.log_norm;
        Ok(log_add_exp(self.log_cdf[k], part))
    }

    pub fn log_sf(&self, y: f64) -> Result<f64> {
        let (lo, hi) = self.range();
        if y <= lo {
            return Ok(0.0);
        }
        if y >= hi {
            return Ok(f64::NEG_INFINITY);
        }
        let k = self.panel(y);
        let part = log_integral_with(&self.density, y, self.nodes[k + 1], self.accuracy.rel_tol)? - self.log_norm;
        Ok(log_add_exp(self.log_sf[k + 1], part))
    }

    pub fn cdf(&self, y: f64) -> Result<f64> {
        Ok(exp(self.log_cdf(y)?))
    }

    /// Solves `ln F(y) = p` (or `ln(1 - F(y)) = p`). Targets outside the
    /// tabulated range are clamped to the table ends.
    pub fn quantile(&self, tail: Tail) -> Result<f64> {
        let n = self.nodes.len();
        let k = match tail {
            Tail::Lower(p) => {
                if !(p < 0.0) {
                    return Ok(self.nodes[n - 1]);
                }
                self.log_cdf.partition_point(|&v| v <= p).saturating_sub(1).min(n - 2)
            }
            Tail::Upper(p) => {
                if !(p < 0.0) {
                    return Ok(self.nodes[0]);
                }
                self.log_sf.partition_point(|&v| v > p).saturating_sub(1).min(n - 2)
            }
        };
        // increasing in y, zero at the solution
        let g = |y: f64| -> Result<f64> {
            match tail {
                Tail::Lower(p) => Ok(self.log_cdf(y)? - p),
                Tail::Upper(p) => Ok(p - self.log_sf(y)?),
            }
        };
        let (mut a, mut b) = (self.nodes[k], self.nodes[k + 1]);
        if g(b)? < 0.0 {
            return Ok(b);
        }
        if g(a)? > 0.0 {
            return Ok(a);
        }
        while b - a > BISECTION_WIDTH * (1.0 + a.abs().max(b.abs())) {
            let mid = 0.5 * (a + b);
            if g(mid)? < 0.0 {
                a = mid;
            } else {
                b = mid;
            }
        }
        let mut y = 0.5 * (a + b);
        for _ in 0..2 {
            let value = g(y)?;
            // d/dy ln F = pdf / F, d/dy -ln(1-F) = pdf / (1 - F)
            let slope = match tail {
                Tail::Lower(_) => exp(self.log_pdf(y) - (value + tail_p(tail))),
                Tail::Upper(_) => exp(self.log_pdf(y) - (tail_p(tail) - value)),
            };
            if !(slope > 0.0) || !slope.is_finite() {
                break;
            }
            let next = y - value / slope;
            if next < a - BISECTION_WIDTH || next > b + BISECTION_WIDTH {
                break;
            }
            y = next;
        }
        Ok(y)
    }
}

fn tail_p(t: Tail) -> f64 {
    match t {
        Tail::Lower(p) | Tail::Upper(p) => p,
    }
}

/// `ln ∫_a^b exp(ld(t)) dt`, shifting by the largest sampled log density.
pub fn log_integral<D: LogDensity1d + ?Sized>(density: &D, a: f64, b: f64) -> Result<f64> {
    log_integral_with(density, a, b, Accuracy::default().rel_tol)
}

fn log_integral_with<D: LogDensity1d + ?Sized>(density: &D, a: f64, b: f64, rel: f64) -> Result<f64> {
    if b <= a {
        return Ok(f64::NEG_INFINITY);
    }
    let reference = density
        .log_density(a)
        .max(density.log_density(b))
        .max(density.log_density(0.5 * (a + b)));
    if reference == f64::NEG_INFINITY {
        return Ok(f64::NEG_INFINITY);
    }
    let value = integrate(|t| exp(density.log_density(t) - reference), a, b, quad_tol(rel))?;
    Ok(if value > 0.0 { reference + log(value) } else { f64::NEG_INFINITY })
}

/// `ln ∫ exp(ld)` over the support, truncated where the log density has
/// dropped 80 nats below its peak. Cheaper than building a full table.
pub fn log_total_mass<D: LogDensity1d + ?Sized>(density: &D, support: Support) -> Result<f64> {
    let wrapped = |t: f64| density.log_density(t);
    let mode = find_mode(&wrapped, support)?;
    let peak = wrapped(mode);
    let hi = find_cutoff_with(&wrapped, mode, peak, 1.0, 80.0);
    let lo = match support {
        Support::HalfLine => 0.0,
        Support::Line => find_cutoff_with(&wrapped, mode, peak, -1.0, 80.0),
    };
    const PIECES: usize = 64;
    let mut acc = f64::NEG_INFINITY;
    for k in 0..PIECES {
        let a = lo + (hi - lo) * k as f64 / PIECES as f64;
        let b = lo + (hi - lo) * (k + 1) as f64 / PIECES as f64;
        acc = log_add_exp(acc, log_integral(&wrapped, a, b)?);
    }
    Ok(acc)
}

/// Golden-section search for the maximiser of a unimodal log density.
fn find_mode<D: LogDensity1d>(density: &D, support: Support) -> Result<f64> {
    let ld = |t: f64| density.log_density(t);
    let (mut a, mut b) = match support {
        Support::Line => {
            let (mut a, mut b) = (-1.0, 1.0);
            let mut guard = 0;
            while ld(a) > ld(0.5 * a) || ld(b) > ld(0.5 * b) {
                if ld(a) > ld(0.5 * a) {
                    a *= 2.0;
                }
                if ld(b) > ld(0.5 * b) {
                    b *= 2.0;
                }
                guard += 1;
                if guard > 200 {
                    return Err(Error::Unstable("log density is not unimodal (mode search diverged)".into()));
                }
            }
            (a, b)
        }
        Support::HalfLine => {
            let mut b = 1.0;
            let mut guard = 0;
            while ld(b) > ld(0.5 * b) {
                b *= 2.0;
                guard += 1;
                if guard > 200 {
                    return Err(Error::Unstable("log density is not unimodal (mode search diverged)".into()));
                }
            }
            (0.0, b)
        }
    };
    let phi = 0.5 * (libm::sqrt(5.0) - 1.0);
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    let (mut fc, mut fd) = (ld(c), ld(d));
    for _ in 0..200 {
        if (b - a).abs() < 1e-12 * (1.0 + a.abs() + b.abs()) {
            break;
        }
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = ld(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = ld(d);
        }
    }
    let mut best = 0.5 * (a + b);
    if support == Support::HalfLine && ld(0.0) >= ld(best) {
        best = 0.0;
    }
    Ok(best)
}

/// Point beyond the mode (in direction `sign`) where the log density has
/// dropped by `DROP`.
fn find_cutoff<D: LogDensity1d>(density: &D, mode: f64, peak: f64, sign: f64) -> f64 {
    find_cutoff_with(density, mode, peak, sign, DROP)
}

fn find_cutoff_with<D: LogDensity1d + ?Sized>(density: &D, mode: f64, peak: f64, sign: f64, drop: f64) -> f64 {
    let below = |t: f64| {
        let v = density.log_density(t);
        v.is_nan() || v < peak - drop
    };
    let mut step = 1.0;
    let mut inner = mode;
    let mut outer = mode + sign * step;
    while !below(outer) {
        inner = outer;
        step *= 2.0;
        outer = mode + sign * step;
        if step > 1e12 {
            break;
        }
    }
    for _ in 0..100 {
        let mid = 0.5 * (inner + outer);
        if below(mid) {
            outer = mid;
        } else {
            inner = mid;
        }
        if (outer - inner).abs() < 1e-9 * (1.0 + outer.abs()) {
            break;
        }
    }
    outer
}
