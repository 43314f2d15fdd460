//! Experiment configuration: a TOML document with a `[target]` table, a
//! `[map]` table and one `[checks.<name>]` table per check.
//!
//! ```toml
//! seed = 7
//!
//! [target]
//! family = "power"
//! dim = 2
//! p = 1.5
//!
//! [map]
//! method = "exact-radial"
//!
//! [checks.displacement]
//! directions = 16
//!
//! [checks.eigenvar]
//! samples = 100000
//! ```

use std::path::PathBuf;

use brenier_core::verify::ConcentrationKind;
use brenier_core::Potential;
use serde::{Deserialize, Serialize};

use crate::error::{ConfigError, LabError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    pub target: TargetConfig,
    pub map: MapConfig,
    #[serde(default)]
    pub checks: ChecksConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FamilyName {
    Gaussian,
    LaplaceProduct,
    Power,
}

impl FamilyName {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Gaussian => "gaussian",
            Self::LaplaceProduct => "laplace-product",
            Self::Power => "power",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetConfig {
    pub family: FamilyName,
    pub dim: usize,
    /// Gaussian standard deviation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    /// Power-family exponent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
}

impl TargetConfig {
    pub fn build(&self) -> brenier_core::Result<Potential> {
        match self.family {
            FamilyName::Gaussian => Potential::gaussian(self.dim, self.sigma.unwrap_or(1.0)),
            FamilyName::LaplaceProduct => Potential::laplace_product(self.dim),
            FamilyName::Power => Potential::power(self.dim, self.p.unwrap_or(1.5)),
        }
    }

    pub fn is_radial(&self) -> bool {
        !matches!(self.family, FamilyName::LaplaceProduct) || self.dim == 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodName {
    #[serde(rename = "exact-1d")]
    Exact1d,
    ExactRadial,
    SemiDiscrete,
    Entropic,
}

impl MethodName {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Exact1d => "exact-1d",
            Self::ExactRadial => "exact-radial",
            Self::SemiDiscrete => "semi-discrete",
            Self::Entropic => "entropic",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct MapConfig {
    pub method: MethodName,
    /// Semi-discrete: number of support points (k-means of target samples).
    #[serde(default = "defaults::support_points")]
    pub support_points: usize,
    /// Semi-discrete: target samples fed to k-means.
    #[serde(default = "defaults::support_samples")]
    pub support_samples: usize,
    #[serde(default = "defaults::lloyd_iterations")]
    pub lloyd_iterations: usize,
    /// Semi-discrete: max-norm mass tolerance.
    #[serde(default = "defaults::mass_tol")]
    pub mass_tol: f64,
    /// Semi-discrete: Gaussian samples for cell masses.
    #[serde(default = "defaults::mc_budget")]
    pub mc_budget: usize,
    #[serde(default = "defaults::max_iters")]
    pub max_iters: usize,
    /// Entropic: regularisation.
    #[serde(default = "defaults::epsilon")]
    pub epsilon: f64,
    /// Entropic: size of both the source and the target sample.
    #[serde(default = "defaults::entropic_samples")]
    pub samples: usize,
    /// Entropic: L¹ marginal tolerance.
    #[serde(default = "defaults::sinkhorn_tol")]
    pub sinkhorn_tol: f64,
}

impl MapConfig {
    pub fn new(method: MethodName) -> Self {
        Self {
            method,
            support_points: defaults::support_points(),
            support_samples: defaults::support_samples(),
            lloyd_iterations: defaults::lloyd_iterations(),
            mass_tol: defaults::mass_tol(),
            mc_budget: defaults::mc_budget(),
            max_iters: defaults::max_iters(),
            epsilon: defaults::epsilon(),
            samples: defaults::entropic_samples(),
            sinkhorn_tol: defaults::sinkhorn_tol(),
        }
    }
}

mod defaults {
    pub fn support_points() -> usize {
        256
    }
    pub fn support_samples() -> usize {
        20_000
    }
    pub fn lloyd_iterations() -> usize {
        50
    }
    pub fn mass_tol() -> f64 {
        5e-4
    }
    pub fn mc_budget() -> usize {
        400_000
    }
    pub fn max_iters() -> usize {
        200
    }
    pub fn epsilon() -> f64 {
        0.05
    }
    pub fn entropic_samples() -> usize {
        2000
    }
    pub fn sinkhorn_tol() -> f64 {
        1e-4
    }
    pub fn pairs() -> usize {
        10_000
    }
    pub fn directions() -> usize {
        16
    }
    pub fn samples() -> usize {
        100_000
    }
    pub fn residual_points() -> usize {
        1000
    }
    pub fn residual_tol() -> f64 {
        1e-5
    }
    pub fn orders() -> Vec<f64> {
        vec![0.0, 2.0, 4.0, 8.0]
    }
    pub fn lp_samples() -> usize {
        50_000
    }
    pub fn random_directions() -> usize {
        8
    }
    pub fn max_ratio() -> f64 {
        4.0
    }
    pub fn radii() -> usize {
        40
    }
    pub fn ball_budget() -> usize {
        10_000_000
    }
    pub fn gated() -> bool {
        true
    }
    pub fn band_points() -> usize {
        1000
    }
}

/// One optional table per check; present tables run in the order below.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct ChecksConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hessian_band: Option<HessianBandCheck>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub monotonicity: Option<MonotonicityCheck>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub displacement: Option<ProbeCheck>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub concentration_constant: Option<ConcentrationConstantCheck>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub concentration_profile: Option<ConcentrationProfileCheck>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lp_norm: Option<LpNormCheck>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub opnorm: Option<ProbeCheck>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eigenvar: Option<SampledCheck>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ma_residual: Option<ResidualCheck>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ball_certificate: Option<BallCertificateCheck>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pushforward: Option<PushforwardCheck>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct HessianBandCheck {
    #[serde(default = "defaults::band_points")]
    pub points: usize,
    #[serde(default)]
    pub tolerance: f64,
    /// `false` keeps the result in the report without affecting the exit
    /// status, e.g. for targets known to violate the band.
    #[serde(default = "defaults::gated")]
    pub gated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct MonotonicityCheck {
    #[serde(default = "defaults::pairs")]
    pub pairs: usize,
    /// Overrides the documented tolerance of the map's method.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct ProbeCheck {
    #[serde(default = "defaults::directions")]
    pub directions: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct SampledCheck {
    #[serde(default = "defaults::samples")]
    pub samples: usize,
}

/// Without explicit limits the pushforward passes on 4-sigma CLT bands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct PushforwardCheck {
    #[serde(default = "defaults::samples")]
    pub samples: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_mean_error: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_covariance_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct ResidualCheck {
    /// Gaussian evaluation points.
    #[serde(default = "defaults::residual_points")]
    pub samples: usize,
    #[serde(default = "defaults::residual_tol")]
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct ConcentrationConstantCheck {
    pub kind: ConcentrationKind,
    /// Defaults to the constant declared by the target family.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constant: Option<f64>,
    #[serde(default = "defaults::directions")]
    pub directions: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct ConcentrationProfileCheck {
    #[serde(default = "defaults::samples")]
    pub samples: usize,
    #[serde(default = "defaults::directions")]
    pub directions: usize,
    #[serde(default = "defaults::radii")]
    pub radii: usize,
    /// When present, the fitted `β` must fall in `[lo, hi]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expect_beta: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expect_alpha: Option<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct LpNormCheck {
    #[serde(default = "defaults::orders")]
    pub orders: Vec<f64>,
    #[serde(default = "defaults::lp_samples")]
    pub samples: usize,
    /// Random fixed directions on top of `e₁` and, for `d ≥ 2`, the radial
    /// and tangential fields.
    #[serde(default = "defaults::random_directions")]
    pub random_directions: usize,
    /// Largest accepted ratio between the estimates at the largest and the
    /// second smallest order.
    #[serde(default = "defaults::max_ratio")]
    pub max_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct BallCertificateCheck {
    /// Base points `x`; each must have the target dimension.
    pub points: Vec<Vec<f64>>,
    #[serde(default = "defaults::ball_budget")]
    pub mc_budget: usize,
    /// Target samples for the `∫f dμ` branch; `0` skips the branch.
    #[serde(default)]
    pub target_samples: usize,
}

impl ExperimentConfig {
    pub fn new(target: TargetConfig, map: MapConfig) -> Self {
        Self { seed: 0, out_dir: None, target, map, checks: ChecksConfig::default() }
    }

    /// Parses and validates; `source` is used to locate offending lines.
    pub fn from_toml_str(source: &str) -> Result<Self, LabError> {
        let config: Self = toml::from_str(source).map_err(|e| {
            let line = e.span().map(|s| line_of_offset(source, s.start));
            let field = line.and_then(|l| field_at_line(source, l));
            LabError::Config(ConfigError { field, line, message: e.message().to_string() })
        })?;
        config.validate(Some(source))?;
        Ok(config)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("configs always serialize")
    }

    /// Multiplies every Monte-Carlo budget by `factor`, keeping each at
    /// least one.
    pub fn scale_budgets(&mut self, factor: f64) {
        let scale = |n: &mut usize| *n = ((*n as f64 * factor).round() as usize).clamp(1, i64::MAX as usize);
        scale(&mut self.map.mc_budget);
        scale(&mut self.map.support_samples);
        let c = &mut self.checks;
        if let Some(k) = &mut c.hessian_band {
            scale(&mut k.points);
        }
        if let Some(k) = &mut c.monotonicity {
            scale(&mut k.pairs);
        }
        if let Some(k) = &mut c.concentration_profile {
            scale(&mut k.samples);
        }
        if let Some(k) = &mut c.lp_norm {
            scale(&mut k.samples);
        }
        if let Some(k) = &mut c.eigenvar {
            scale(&mut k.samples);
        }
        if let Some(k) = &mut c.ball_certificate {
            scale(&mut k.mc_budget);
            if k.target_samples > 0 {
                scale(&mut k.target_samples);
            }
        }
        if let Some(k) = &mut c.pushforward {
            scale(&mut k.samples);
        }
        if let Some(k) = &mut c.ma_residual {
            scale(&mut k.samples);
        }
    }

    pub fn validate(&self, source: Option<&str>) -> Result<(), LabError> {
        let fail = |section: &str, key: &str, message: String| {
            let line = source.and_then(|s| locate(s, section, key));
            let field = if section.is_empty() { key.to_string() } else { format!("{section}.{key}") };
            Err(LabError::Config(ConfigError { field: Some(field), line, message }))
        };
        if self.seed > i64::MAX as u64 {
            return fail("", "seed", format!("seed must be at most {} (TOML integers are signed 64-bit)", i64::MAX));
        }
        let t = &self.target;
        if t.dim == 0 {
            return fail("target", "dim", "dimension must be at least 1".into());
        }
        match t.family {
            FamilyName::Gaussian => {
                if let Some(s) = t.sigma {
                    if !(s > 0.0 && s.is_finite()) {
                        return fail("target", "sigma", format!("sigma must be positive, got {s}"));
                    }
                }
                if t.p.is_some() {
                    return fail("target", "p", "`p` applies only to the power family".into());
                }
            }
            FamilyName::LaplaceProduct => {
                if t.sigma.is_some() || t.p.is_some() {
                    let key = if t.sigma.is_some() { "sigma" } else { "p" };
                    return fail("target", key, "laplace-product takes no parameters besides `dim`".into());
                }
            }
            FamilyName::Power => {
                if let Some(p) = t.p {
                    if !(p > 1.0 && p <= 2.0) {
                        return fail("target", "p", format!("power exponent must lie in (1, 2], got {p}"));
                    }
                }
                if t.sigma.is_some() {
                    return fail("target", "sigma", "`sigma` applies only to the gaussian family".into());
                }
            }
        }
        let m = &self.map;
        match m.method {
            MethodName::Exact1d if t.dim != 1 => {
                return fail("map", "method", format!("exact-1d requires a one-dimensional target, but target.dim = {}", t.dim));
            }
            MethodName::ExactRadial if !t.is_radial() => {
                return fail("map", "method", format!("exact-radial requires a radial target, but {} with dim {} is not radial", t.family.as_str(), t.dim));
            }
            _ => {}
        }
        for (key, v) in [
            ("support-points", m.support_points),
            ("support-samples", m.support_samples),
            ("lloyd-iterations", m.lloyd_iterations),
            ("mc-budget", m.mc_budget),
            ("max-iters", m.max_iters),
            ("samples", m.samples),
        ] {
            if v == 0 {
                return fail("map", key, "budgets must be positive".into());
            }
        }
        for (key, v) in [("mass-tol", m.mass_tol), ("epsilon", m.epsilon), ("sinkhorn-tol", m.sinkhorn_tol)] {
            if !(v > 0.0 && v.is_finite()) {
                return fail("map", key, format!("must be positive, got {v}"));
            }
        }

        let c = &self.checks;
        let positive = |section: &str, key: &str, v: usize| if v == 0 { fail(section, key, "budgets must be positive".into()) } else { Ok(()) };
        if let Some(k) = &c.hessian_band {
            positive("checks.hessian-band", "points", k.points)?;
            if !(k.tolerance >= 0.0) {
                return fail("checks.hessian-band", "tolerance", "tolerance must be non-negative".into());
            }
        }
        if let Some(k) = &c.monotonicity {
            positive("checks.monotonicity", "pairs", k.pairs)?;
            if k.tolerance.is_some_and(|t| !(t >= 0.0)) {
                return fail("checks.monotonicity", "tolerance", "tolerance must be non-negative".into());
            }
        }
        if let Some(k) = &c.displacement {
            positive("checks.displacement", "directions", k.directions)?;
        }
        if let Some(k) = &c.opnorm {
            positive("checks.opnorm", "directions", k.directions)?;
            self.require_jacobian("checks.opnorm", source)?;
        }
        if let Some(k) = &c.eigenvar {
            positive("checks.eigenvar", "samples", k.samples)?;
            self.require_jacobian("checks.eigenvar", source)?;
        }
        if let Some(k) = &c.ma_residual {
            positive("checks.ma-residual", "samples", k.samples)?;
            if !(k.tolerance > 0.0) {
                return fail("checks.ma-residual", "tolerance", "tolerance must be positive".into());
            }
            self.require_jacobian("checks.ma-residual", source)?;
        }
        if let Some(k) = &c.lp_norm {
            positive("checks.lp-norm", "samples", k.samples)?;
            self.require_jacobian("checks.lp-norm", source)?;
            if k.orders.len() < 2 || k.orders.iter().any(|&p| !(0.0..=38.0).contains(&p)) {
                return fail("checks.lp-norm", "orders", "need at least two orders, each in [0, 38]".into());
            }
        }
        if let Some(k) = &c.concentration_constant {
            positive("checks.concentration-constant", "directions", k.directions)?;
            if k.constant.is_some_and(|v| !(v > 0.0)) {
                return fail("checks.concentration-constant", "constant", "constant must be positive".into());
            }
            if matches!(k.kind, ConcentrationKind::LeeVempala) {
                return fail("checks.concentration-constant", "kind", "lee-vempala has no explicit displacement constant".into());
            }
        }
        if let Some(k) = &c.concentration_profile {
            if k.samples < 10_000 {
                return fail("checks.concentration-profile", "samples", "at least 10000 samples are needed".into());
            }
            positive("checks.concentration-profile", "radii", k.radii)?;
        }
        if let Some(k) = &c.ball_certificate {
            positive("checks.ball-certificate", "mc-budget", k.mc_budget)?;
            if k.points.is_empty() || k.points.iter().any(|p| p.len() != t.dim) {
                return fail("checks.ball-certificate", "points", format!("need at least one point, each of length {}", t.dim));
            }
        }
        if let Some(k) = &c.pushforward {
            positive("checks.pushforward", "samples", k.samples)?;
            for (key, v) in [("max-mean-error", k.max_mean_error), ("max-covariance-error", k.max_covariance_error)] {
                if v.is_some_and(|v| !(v > 0.0)) {
                    return fail("checks.pushforward", key, "limit must be positive".into());
                }
            }
        }
        Ok(())
    }

    fn require_jacobian(&self, section: &str, source: Option<&str>) -> Result<(), LabError> {
        if self.map.method == MethodName::SemiDiscrete {
            let line = source.and_then(|s| locate_section(s, section));
            return Err(LabError::Config(ConfigError {
                field: Some(section.to_string()),
                line,
                message: "semi-discrete maps are piecewise constant and have no Jacobian".into(),
            }));
        }
        Ok(())
    }
}

fn line_of_offset(source: &str, offset: usize) -> usize {
    source[..offset.min(source.len())].matches('\n').count() + 1
}

/// Dotted path of the key assigned on 1-based line `line`, if any.
fn field_at_line(source: &str, line: usize) -> Option<String> {
    let mut section = "";
    for (i, text) in source.lines().enumerate() {
        if let Some(h) = header_name(text) {
            section = h;
        }
        if i + 1 == line {
            let key = text.split_once('=')?.0.trim();
            if key.is_empty() || key.starts_with('[') || key.starts_with('#') {
                return (!section.is_empty()).then(|| section.to_string());
            }
            return Some(if section.is_empty() { key.to_string() } else { format!("{section}.{key}") });
        }
    }
    None
}

fn header_name(line: &str) -> Option<&str> {
    let t = line.trim();
    t.strip_prefix('[').and_then(|r| r.strip_suffix(']')).map(str::trim)
}

fn locate_section(source: &str, section: &str) -> Option<usize> {
    source.lines().position(|l| header_name(l) == Some(section)).map(|i| i + 1)
}

/// 1-based line of `key` inside `[section]` (top level when empty).
fn locate(source: &str, section: &str, key: &str) -> Option<usize> {
    let mut current = "";
    for (i, line) in source.lines().enumerate() {
        if let Some(h) = header_name(line) {
            current = h;
            continue;
        }
        let t = line.trim_start();
        if current == section && t.starts_with(key) && t[key.len()..].trim_start().starts_with('=') {
            return Some(i + 1);
        }
    }
    if section.is_empty() {
        None
    } else {
        locate_section(source, section)
    }
}
