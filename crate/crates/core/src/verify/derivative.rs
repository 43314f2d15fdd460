use alloc::vec;
use alloc::vec::Vec;

use libm::{log, pow, sqrt};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::{norm, norm_sq};
use crate::map::TransportMap;
use crate::rng::{fill_normal, stream};

use super::{fit_top_decade, BoundReport, ProbeSet, WorstCase, EXPONENT_GATE};

/// Largest moment order `p + 2` accepted by [`lp_derivative_norm`].
pub const LP_MAX_ORDER: f64 = 40.0;

/// Direction `e` in `∂²_ee φ(x) = ⟨e, ∇T(x) e⟩`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    Fixed(Vec<f64>),
    /// `x/|x|`
    Radial,
    /// A unit vector orthogonal to `x` (requires `d ≥ 2`).
    Tangential,
}

impl Direction {
    fn at(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        match self {
            Self::Fixed(e) => {
                let n = norm(e);
                out.iter_mut().zip(e).for_each(|(o, v)| *o = v / n);
            }
            Self::Radial | Self::Tangential => {
                let r = norm(x);
                if r == 0.0 {
                    out.iter_mut().enumerate().for_each(|(k, o)| *o = if k == 0 { 1.0 } else { 0.0 });
                    return Ok(());
                }
                if matches!(self, Self::Radial) {
                    out.iter_mut().zip(x).for_each(|(o, v)| *o = v / r);
                } else {
                    // rotate the two largest coordinates of x by a quarter turn
                    let mut idx: Vec<usize> = (0..x.len()).collect();
                    idx.sort_by(|&a, &b| x[b].abs().total_cmp(&x[a].abs()));
                    let (i, j) = (idx[0], idx[1]);
                    out.iter_mut().for_each(|o| *o = 0.0);
                    out[i] = -x[j];
                    out[j] = x[i];
                    let n = norm(out);
                    if n == 0.0 {
                        out[j] = 1.0;
                    } else {
                        out.iter_mut().for_each(|o| *o /= n);
                    }
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpEstimate {
    pub p: f64,
    pub value: f64,
    /// Delta-method standard error of `value`.
    pub std_error: f64,
    pub lower: f64,
    pub upper: f64,
    /// Share of the moment carried by the top 1% of samples.
    pub top_share: f64,
    /// Set when the top 1% carries more than half the moment.
    pub heavy_tail: bool,
    pub n: usize,
    pub seed: u64,
}

/// Monte-Carlo estimate of `‖∂²_ee φ / √(d + |x|²)‖_{p+2, γ}`.
pub fn lp_derivative_norm(map: &dyn TransportMap, direction: &Direction, p: f64, n: usize, seed: u64) -> Result<LpEstimate> {
    let d = map.dim();
    if !map.has_jacobian() {
        return Err(Error::MissingJacobian);
    }
    let q = p + 2.0;
    if !(p >= 0.0) || q > LP_MAX_ORDER {
        return Err(invalid("p", "need 0 <= p and p + 2 <= 40"));
    }
    if n < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: n });
    }
    match direction {
        Direction::Fixed(e) if e.len() != d => return Err(Error::DimensionMismatch { expected: d, got: e.len() }),
        Direction::Fixed(e) if norm(e) == 0.0 => return Err(invalid("direction", "zero vector")),
        Direction::Tangential if d < 2 => return Err(invalid("direction", "tangential directions need d >= 2")),
        _ => {}
    }
    let mut rng = stream(seed);
    let mut x = vec![0.0; d];
    let mut e = vec![0.0; d];
    let mut terms = Vec::with_capacity(n);
    for _ in 0..n {
        fill_normal(&mut rng, &mut x);
        direction.at(&x, &mut e)?;
        let second = map.jacobian(&x)?.quadratic_form(&e).max(0.0);
        terms.push(pow(second / sqrt(d as f64 + norm_sq(&x)), q));
    }
    let nf = n as f64;
    let moment = terms.iter().sum::<f64>() / nf;
    let var = terms.iter().map(|t| (t - moment) * (t - moment)).sum::<f64>() / nf;
    let value = pow(moment, 1.0 / q);
    let std_error = if moment > 0.0 { value * sqrt(var / nf) / (q * moment) } else { 0.0 };
    terms.sort_by(|a, b| b.total_cmp(a));
    let top = terms[..(n / 100).max(1)].iter().sum::<f64>();
    let total = moment * nf;
    let top_share = if total > 0.0 { top / total } else { 0.0 };
    Ok(LpEstimate {
        p,
        value,
        std_error,
        lower: (value - 3.0 * std_error).max(0.0),
        upper: value + 3.0 * std_error,
        top_share,
        heavy_tail: top_share > 0.5,
        n,
        seed,
    })
}

/// `‖∇T(x)‖_op` over the probes, fitted against three envelopes. The gate
/// is the log-log growth exponent, at most [`EXPONENT_GATE`].
pub fn opnorm_growth_check(map: &dyn TransportMap, probes: &ProbeSet, seed: u64) -> Result<BoundReport> {
    let d = map.dim();
    if !map.has_jacobian() {
        return Err(Error::MissingJacobian);
    }
    if probes.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, got: probes.dim() });
    }
    let mut report = BoundReport::new("opnorm-growth", "||DT(x)||_op <= C (d + |x|^2)^2", EXPONENT_GATE - 2.0);
    let df = d as f64;
    let d43 = pow(df, 4.0 / 3.0);
    let (mut c_proved, mut c_strong, mut c_conj) = (0.0_f64, 0.0_f64, 0.0_f64);
    let mut radii = Vec::with_capacity(probes.len());
    let mut norms = Vec::with_capacity(probes.len());
    let mut argmax = Vec::new();
    for x in probes.rows() {
        let ev = map.jacobian_eigenvalues(x)?;
        let op = ev.iter().map(|l| l.abs()).fold(0.0, f64::max);
        let r2 = norm_sq(x);
        let proved = op / ((df + r2) * (df + r2));
        if proved >= c_proved {
            c_proved = proved;
            argmax = x.to_vec();
        }
        c_strong = c_strong.max(op / (d43 + r2));
        c_conj = c_conj.max(op / sqrt(df + r2));
        radii.push(sqrt(r2));
        norms.push(op);
    }
    let fit = fit_top_decade(&radii, &norms, &mut stream(seed));
    report.passed = c_proved.is_finite() && fit.as_ref().map_or(true, |f| f.slope <= EXPONENT_GATE);
    report.constant = Some(c_proved);
    report.metric("c_proved_envelope", c_proved);
    report.metric("c_strong_envelope", c_strong);
    report.metric("c_conjectured_envelope", c_conj);
    if let Some(f) = &fit {
        report.metric("exponent", f.slope);
    }
    report.worst = Some(WorstCase { point: argmax, margin: fit.as_ref().map_or(EXPONENT_GATE, |f| EXPONENT_GATE - f.slope) });
    report.exponent = fit;
    report.sample_size = probes.len();
    report.seed = Some(seed);
    report.extrapolated_rows = probes.extrapolated_rows();
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenLogVariance {
    /// `Var(log λ_i)` for each ascending eigenvalue index.
    pub variances: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub max: f64,
    pub passed: bool,
    pub n: usize,
    pub seed: u64,
}

impl EigenLogVariance {
    pub fn to_report(&self) -> BoundReport {
        let mut r = BoundReport::new("eigen-log-variance", "Var(log lambda_i) <= 4", 0.0);
        r.passed = self.passed;
        r.constant = Some(self.max);
        r.sample_size = self.n;
        r.seed = Some(self.seed);
        for (i, (v, s)) in self.variances.iter().zip(&self.std_errors).enumerate() {
            r.metric(&alloc::format!("var_log_lambda_{}", i + 1), *v);
            r.metric(&alloc::format!("std_error_{}", i + 1), *s);
        }
        r
    }
}

/// Sample variance of `log λ_i(x)`, `x ∼ γ`, per index; passes when each is
/// at most `4` plus three standard errors.
pub fn eigen_log_variance(map: &dyn TransportMap, n: usize, seed: u64) -> Result<EigenLogVariance> {
    let d = map.dim();
    if !map.has_jacobian() {
        return Err(Error::MissingJacobian);
    }
    if n < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: n });
    }
    let mut rng = stream(seed);
    let mut x = vec![0.0; d];
    let mut logs = vec![Vec::with_capacity(n); d];
    for _ in 0..n {
        fill_normal(&mut rng, &mut x);
        let ev = map.jacobian_eigenvalues(&x)?;
        for (i, l) in ev.iter().enumerate() {
            if !(*l > 0.0) {
                return Err(Error::DegenerateEigenvalue { value: *l });
            }
            logs[i].push(log(*l));
        }
    }
    let nf = n as f64;
    let mut variances = Vec::with_capacity(d);
    let mut std_errors = Vec::with_capacity(d);
    let mut passed = true;
    for col in &logs {
        let mean = col.iter().sum::<f64>() / nf;
        let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / nf;
        let m4 = col.iter().map(|v| pow(v - mean, 4.0)).sum::<f64>() / nf;
        let se = sqrt((m4 - var * var).max(0.0) / nf);
        passed &= var <= 4.0 + 3.0 * se;
        variances.push(var);
        std_errors.push(se);
    }
    let max = variances.iter().copied().fold(0.0, f64::max);
    Ok(EigenLogVariance { variances, std_errors, max, passed, n, seed })
}
