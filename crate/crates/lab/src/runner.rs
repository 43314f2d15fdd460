use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use brenier_core::numeric::{entropic_map, pushforward_test, quantize, semidiscrete_solve, EntropicOptions, SemiDiscreteOptions};
use brenier_core::potential::hessian_band_check;
use brenier_core::rng::derive_seed;
use brenier_core::sampling::{sample_gaussian, sample_mala, sample_target, MalaOptions};
use brenier_core::verify::{
    ball_certificate, concentration_constant_bound_check, concentration_profile, default_radius_grid, displacement_bound_check, eigen_log_variance,
    lp_derivative_norm, monotonicity_check, opnorm_growth_check, BoundReport, ConcentrationKind, ConcentrationSpec, Direction, ProbeSet, WorstCase,
};
use brenier_core::{brenier_1d, brenier_radial, monge_ampere_residual, Potential, SampleBatch, TransportMap};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{ChecksConfig, ExperimentConfig, MapConfig, MethodName, TargetConfig};
use crate::error::LabError;
use crate::io;

pub const SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_OUT_DIR: &str = "brenier-out";

/// Thinning used for MALA target samples that feed the map solvers.
const SOLVER_MALA_THINNING: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapSummary {
    pub method: String,
    pub built: bool,
    pub seed: u64,
    pub wall_clock_ms: f64,
    pub metrics: BTreeMap<String, f64>,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub schema_version: u32,
    pub master_seed: u64,
    pub target: TargetConfig,
    pub map: MapSummary,
    pub checks: Vec<BoundReport>,
    /// Conjunction of the gated checks.
    pub passed: bool,
}

impl ExperimentReport {
    pub fn exit_code(&self) -> i32 {
        if self.passed {
            0
        } else {
            1
        }
    }

    /// `check,constant,exponent,pass`, one row per check, without timings.
    pub fn summary_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["check", "constant", "exponent", "pass"]).expect("in-memory write");
        for r in &self.checks {
            let constant = r.constant.map(|c| c.to_string()).unwrap_or_default();
            let exponent = r.exponent.as_ref().map(|e| e.slope.to_string()).unwrap_or_default();
            w.write_record([r.check.as_str(), &constant, &exponent, if r.passed { "true" } else { "false" }]).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv output is UTF-8")
    }

    /// Human-readable table for the terminal.
    pub fn table(&self) -> String {
        let mut out = String::new();
        for r in &self.checks {
            let status = match (r.gated, r.passed) {
                (true, true) => "PASS",
                (true, false) => "FAIL",
                (false, _) => "info",
            };
            let constant = r.constant.map_or_else(|| "-".into(), |c| format!("{c:.4e}"));
            let exponent = r.exponent.as_ref().map_or_else(|| "-".into(), |e| format!("{:.3}", e.slope));
            let _ = writeln!(out, "{status}  {:<24} constant {constant:<12} exponent {exponent}", r.check);
            for note in r.notes.iter().filter(|_| !r.passed) {
                let _ = writeln!(out, "      {note}");
            }
        }
        let _ = writeln!(out, "{}", if self.passed { "all gated checks passed" } else { "some gated checks failed" });
        out
    }
}

/// A solved map plus the artifacts worth exporting with it.
enum BuiltMap {
    Exact1d(brenier_core::Brenier1d),
    Radial(brenier_core::RadialMap),
    SemiDiscrete(brenier_core::SemiDiscretePlan),
    Entropic(brenier_core::EntropicMap),
}

impl BuiltMap {
    fn as_map(&self) -> &dyn TransportMap {
        match self {
            Self::Exact1d(m) => m,
            Self::Radial(m) => m,
            Self::SemiDiscrete(m) => m,
            Self::Entropic(m) => m,
        }
    }
}

fn build_map(pot: &Potential, cfg: &MapConfig, seed: u64, summary: &mut MapSummary) -> Result<BuiltMap, brenier_core::Error> {
    let d = pot.dim();
    let target_samples = |n: usize, label: &str| -> Result<SampleBatch, brenier_core::Error> {
        let s = derive_seed(seed, label);
        if d == 1 {
            sample_target(pot, n, s)
        } else {
            sample_mala(pot, n, s, &MalaOptions { thinning: SOLVER_MALA_THINNING, ..MalaOptions::default() })
        }
    };
    Ok(match cfg.method {
        MethodName::Exact1d => BuiltMap::Exact1d(brenier_1d(pot)?),
        MethodName::ExactRadial => BuiltMap::Radial(brenier_radial(pot)?),
        MethodName::SemiDiscrete => {
            let samples = target_samples(cfg.support_samples, "support-samples")?;
            let support = quantize(&samples, cfg.support_points, cfg.lloyd_iterations, derive_seed(seed, "quantize"))?;
            let opts = SemiDiscreteOptions { tol: cfg.mass_tol, mc_budget: cfg.mc_budget, max_iters: cfg.max_iters, seed: derive_seed(seed, "solve") };
            let plan = semidiscrete_solve(&support, &opts)?;
            summary.metrics.insert("mass_residual".into(), plan.mass_residual());
            summary.metrics.insert("iterations".into(), plan.iterations() as f64);
            summary.metrics.insert("support_points".into(), support.len() as f64);
            BuiltMap::SemiDiscrete(plan)
        }
        MethodName::Entropic => {
            let source = sample_gaussian(d, cfg.samples, derive_seed(seed, "source"))?;
            let target = target_samples(cfg.samples, "target")?;
            let opts = EntropicOptions { epsilon: cfg.epsilon, tol: cfg.sinkhorn_tol, max_iters: cfg.max_iters.max(EntropicOptions::default().max_iters), ..EntropicOptions::default() };
            let map = entropic_map(&source, &target, &opts)?;
            summary.metrics.insert("marginal_error".into(), map.marginal_error());
            summary.metrics.insert("iterations".into(), map.iterations() as f64);
            BuiltMap::Entropic(map)
        }
    })
}

const CHECK_NAMES: [&str; 11] = [
    "hessian-band",
    "monotonicity",
    "displacement",
    "concentration-constant",
    "concentration-profile",
    "lp-norm",
    "opnorm",
    "eigenvar",
    "ma-residual",
    "ball-certificate",
    "pushforward",
];

fn reference(check: &str) -> &'static str {
    match check {
        "hessian-band" => "c1 Id >= Hess V(x) >= c2/(d+|x|) Id",
        "monotonicity" => "<T(y) - T(x), y - x> >= 0",
        "displacement" => "|T(x)| <= C (d + |x|^2)",
        "concentration-constant" => "|T(x)| <= max(12/alpha, 8) (|x|^2 + 17 d) or max(12 beta^(-1/2), 8) sqrt(|x|^2 + 17 d)",
        "concentration-profile" => "mu(f >= E f + r) <= exp(-beta r^2 / 2)",
        "lp-norm" => "||D2_ee phi / sqrt(d + |x|^2)||_(p+2) <= C (1 + p)",
        "opnorm" => "||DT(x)||_op <= C (d + |x|^2)^2",
        "eigenvar" => "Var(log lambda_i) <= 4",
        "ma-residual" => "-|x|^2/2 = -V(T(x)) + log det DT(x) + const",
        "ball-certificate" => "gamma(B(x + 4 sqrt(d) u, 2 sqrt(d))) >= exp(-|x|^2 - 17 d)",
        "pushforward" => "T # gamma = mu",
        _ => "",
    }
}

fn enabled(checks: &ChecksConfig) -> Vec<&'static str> {
    let present = [
        checks.hessian_band.is_some(),
        checks.monotonicity.is_some(),
        checks.displacement.is_some(),
        checks.concentration_constant.is_some(),
        checks.concentration_profile.is_some(),
        checks.lp_norm.is_some(),
        checks.opnorm.is_some(),
        checks.eigenvar.is_some(),
        checks.ma_residual.is_some(),
        checks.ball_certificate.is_some(),
        checks.pushforward.is_some(),
    ];
    CHECK_NAMES.iter().zip(present).filter_map(|(n, p)| p.then_some(*n)).collect()
}

fn in_range(v: Option<f64>, range: Option<[f64; 2]>) -> bool {
    match range {
        None => true,
        Some([lo, hi]) => v.is_some_and(|v| lo <= v && v <= hi),
    }
}

fn run_check(name: &str, cfg: &ExperimentConfig, pot: &Potential, map: Option<&dyn TransportMap>, seed: u64) -> Result<BoundReport, LabError> {
    let c = &cfg.checks;
    let d = pot.dim();
    let map = || map.ok_or_else(|| LabError::Core(brenier_core::Error::Unstable("the transport map could not be built".into())));
    let mut report = match name {
        "hessian-band" => {
            let k = c.hessian_band.as_ref().expect("enabled");
            let mut r = hessian_band_check(pot, &sample_gaussian(d, k.points, seed)?, k.tolerance)?;
            r.gated = k.gated;
            r
        }
        "monotonicity" => {
            let k = c.monotonicity.as_ref().expect("enabled");
            monotonicity_check(map()?, k.pairs, seed, k.tolerance)?
        }
        "displacement" => {
            let k = c.displacement.as_ref().expect("enabled");
            displacement_bound_check(map()?, &ProbeSet::standard(d, k.directions, seed)?, seed)?
        }
        "concentration-constant" => {
            let k = c.concentration_constant.as_ref().expect("enabled");
            let declared = match k.kind {
                ConcentrationKind::Exponential => pot.metadata().alpha,
                ConcentrationKind::Gaussian => pot.metadata().beta,
                ConcentrationKind::LeeVempala => None,
            };
            let constant = k.constant.or(declared).ok_or_else(|| {
                brenier_core::Error::UnsupportedKind(format!("{} declares no {:?} concentration constant", cfg.target.family.as_str(), k.kind))
            })?;
            let spec = ConcentrationSpec::new(k.kind, constant, d)?;
            concentration_constant_bound_check(map()?, &spec, &ProbeSet::standard(d, k.directions, seed)?)?
        }
        "concentration-profile" => {
            let k = c.concentration_profile.as_ref().expect("enabled");
            let samples = sample_target(pot, k.samples, derive_seed(seed, "samples"))?;
            let radii = default_radius_grid(&samples, k.radii);
            let profile = concentration_profile(&samples, k.directions, &radii, seed)?;
            let mut r = profile.to_report();
            r.seed = Some(seed);
            if k.expect_alpha.is_some() || k.expect_beta.is_some() {
                r.gated = true;
                r.passed = in_range(profile.alpha, k.expect_alpha) && in_range(profile.beta, k.expect_beta);
                if k.expect_alpha.is_some() && k.expect_beta.is_none() {
                    r.constant = profile.alpha;
                }
            }
            r
        }
        "lp-norm" => lp_norm_report(cfg, map()?, seed)?,
        "opnorm" => {
            let k = c.opnorm.as_ref().expect("enabled");
            opnorm_growth_check(map()?, &ProbeSet::standard(d, k.directions, seed)?, seed)?
        }
        "eigenvar" => {
            let k = c.eigenvar.as_ref().expect("enabled");
            eigen_log_variance(map()?, k.samples, seed)?.to_report()
        }
        "ma-residual" => {
            let k = c.ma_residual.as_ref().expect("enabled");
            let points = sample_gaussian(d, k.samples, seed)?;
            let stats = monge_ampere_residual(map()?, pot, &points)?;
            let mut r = BoundReport::new("ma-residual", reference(name), k.tolerance);
            r.passed = stats.max_abs_centered <= k.tolerance;
            r.constant = Some(stats.max_abs_centered);
            r.worst = Some(WorstCase { point: stats.worst_point.clone(), margin: k.tolerance - stats.max_abs_centered });
            r.sample_size = stats.count;
            r.seed = Some(seed);
            r.metric("median", stats.median);
            r.metric("max_abs_centered", stats.max_abs_centered);
            r
        }
        "ball-certificate" => {
            let k = c.ball_certificate.as_ref().expect("enabled");
            let m = map()?;
            let target = if k.target_samples > 0 { Some(sample_target(pot, k.target_samples, derive_seed(seed, "target"))?) } else { None };
            let mut r = BoundReport::new("ball-certificate", reference(name), 0.0);
            r.passed = true;
            r.seed = Some(seed);
            let mut worst: Option<WorstCase> = None;
            for (i, x) in k.points.iter().enumerate() {
                let tx = m.eval(x)?;
                let cert = ball_certificate(x, &tx, k.mc_budget, derive_seed(seed, &format!("point-{i}")), target.as_ref())?;
                let sub = cert.to_report(seed);
                r.passed &= sub.passed;
                r.sample_size += sub.sample_size;
                r.constant = Some(r.constant.map_or(cert.ball_mass.estimate, |c: f64| c.min(cert.ball_mass.estimate)));
                for (key, v) in &sub.metrics {
                    r.metric(&format!("x{i}_{key}"), *v);
                }
                r.notes.extend(sub.notes.iter().map(|n| format!("x{i}: {n}")));
                if let Some(w) = sub.worst {
                    if worst.as_ref().map_or(true, |cur| w.margin < cur.margin) {
                        worst = Some(w);
                    }
                }
            }
            r.worst = worst;
            r
        }
        "pushforward" => {
            let k = c.pushforward.as_ref().expect("enabled");
            let pf = pushforward_test(map()?, pot, k.samples, seed)?;
            let mut r = BoundReport::new("pushforward", reference(name), 0.0);
            let mean_limit = k.max_mean_error.unwrap_or(pf.mean_threshold);
            let cov_limit = k.max_covariance_error.unwrap_or(pf.covariance_threshold);
            let ks_ok = k.max_mean_error.is_some() || k.max_covariance_error.is_some() || pf.ks.map_or(true, |(s, crit)| s <= crit);
            r.passed = pf.mean_error <= mean_limit && pf.covariance_error <= cov_limit && ks_ok;
            r.constant = Some(pf.covariance_error);
            r.sample_size = pf.n;
            r.seed = Some(seed);
            r.metric("mean_error", pf.mean_error);
            r.metric("mean_limit", mean_limit);
            r.metric("covariance_error", pf.covariance_error);
            r.metric("covariance_limit", cov_limit);
            if let Some((s, crit)) = pf.ks {
                r.metric("ks_statistic", s);
                r.metric("ks_critical_99", crit);
            }
            r
        }
        other => unreachable!("unknown check {other}"),
    };
    report.check = name.to_string();
    Ok(report)
}

fn lp_norm_report(cfg: &ExperimentConfig, map: &dyn TransportMap, seed: u64) -> Result<BoundReport, LabError> {
    let k = cfg.checks.lp_norm.as_ref().expect("enabled");
    let d = map.dim();
    let mut directions: Vec<(String, Direction)> = Vec::new();
    let mut e1 = vec![0.0; d];
    e1[0] = 1.0;
    directions.push(("e1".into(), Direction::Fixed(e1)));
    if d >= 2 {
        directions.push(("radial".into(), Direction::Radial));
        directions.push(("tangential".into(), Direction::Tangential));
    }
    let mut rng = brenier_core::rng::stream(derive_seed(seed, "directions"));
    for i in 0..k.random_directions {
        let mut u = vec![0.0; d];
        brenier_core::rng::unit_vector(&mut rng, &mut u);
        directions.push((format!("random-{i}"), Direction::Fixed(u)));
    }
    let mut orders = k.orders.clone();
    orders.sort_by(f64::total_cmp);
    orders.dedup();
    let (p_hi, p_ref) = (orders[orders.len() - 1], orders[1]);

    let mut r = BoundReport::new("lp-norm", reference("lp-norm"), k.max_ratio);
    r.seed = Some(seed);
    r.passed = true;
    let mut worst_ratio: f64 = 0.0;
    let mut largest: f64 = 0.0;
    for (label, dir) in &directions {
        let mut at_ref = f64::NAN;
        let mut at_hi = f64::NAN;
        for &p in &orders {
            let est = lp_derivative_norm(map, dir, p, k.samples, derive_seed(seed, &format!("{label}/{p}")))?;
            r.passed &= est.value.is_finite();
            r.sample_size += est.n;
            largest = largest.max(est.value);
            r.metric(&format!("{label}_p{p}"), est.value);
            if est.heavy_tail {
                r.note(format!("{label}, p = {p}: top 1% of samples carry {:.0}% of the moment", 100.0 * est.top_share));
            }
            if p == p_ref {
                at_ref = est.value;
            }
            if p == p_hi {
                at_hi = est.value;
            }
        }
        let ratio = at_hi / at_ref;
        r.metric(&format!("{label}_ratio"), ratio);
        worst_ratio = worst_ratio.max(ratio);
        r.passed &= ratio <= k.max_ratio;
    }
    r.constant = Some(largest);
    r.metric("worst_ratio", worst_ratio);
    r.worst = Some(WorstCase { point: Vec::new(), margin: k.max_ratio - worst_ratio });
    Ok(r)
}

/// Runs every enabled check and returns the report without touching disk.
pub fn execute(cfg: &ExperimentConfig) -> Result<(ExperimentReport, Option<Artifact>), LabError> {
    cfg.validate(None)?;
    let pot = cfg.target.build()?;
    let map_seed = derive_seed(cfg.seed, "map");
    let mut summary = MapSummary {
        method: cfg.map.method.as_str().into(),
        built: false,
        seed: map_seed,
        wall_clock_ms: 0.0,
        metrics: BTreeMap::new(),
        notes: Vec::new(),
    };
    let start = Instant::now();
    let built = match build_map(&pot, &cfg.map, map_seed, &mut summary) {
        Ok(m) => {
            summary.built = true;
            Some(m)
        }
        Err(e) => {
            summary.notes.push(format!("map construction failed: {e}"));
            None
        }
    };
    summary.wall_clock_ms = start.elapsed().as_secs_f64() * 1e3;
    let map = built.as_ref().map(BuiltMap::as_map);

    let names = enabled(&cfg.checks);
    let checks: Vec<BoundReport> = names
        .par_iter()
        .map(|&name| {
            let seed = derive_seed(cfg.seed, name);
            let start = Instant::now();
            let mut report = run_check(name, cfg, &pot, map, seed).unwrap_or_else(|e| {
                let mut r = BoundReport::failed(name, reference(name), format!("check failed to run: {e}"));
                r.seed = Some(seed);
                r
            });
            report.wall_clock_ms = Some(start.elapsed().as_secs_f64() * 1e3);
            report
        })
        .collect();
    let passed = summary.built && checks.iter().all(|r| !r.gated || r.passed);
    let artifact = built.and_then(|m| match m {
        BuiltMap::Radial(m) => Some(Artifact::Profile(m)),
        BuiltMap::SemiDiscrete(p) => Some(Artifact::Plan(p)),
        _ => None,
    });
    let report = ExperimentReport { schema_version: SCHEMA_VERSION, master_seed: cfg.seed, target: cfg.target.clone(), map: summary, checks, passed };
    Ok((report, artifact))
}

/// Map data exported alongside the reports.
pub enum Artifact {
    Profile(brenier_core::RadialMap),
    Plan(brenier_core::SemiDiscretePlan),
}

/// Result of [`run_experiment`].
pub struct RunOutcome {
    pub report: ExperimentReport,
    pub out_dir: PathBuf,
    pub exit_code: i32,
}

/// Executes `cfg` and writes `report.json`, `summary.csv` and `config.echo`
/// (plus `profile.csv` or `plan.csv`/`plan.json` for maps that have them)
/// into the configured output directory.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunOutcome, LabError> {
    let out_dir = cfg.out_dir.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR));
    let (report, artifact) = execute(cfg)?;
    fs::create_dir_all(&out_dir).map_err(|e| LabError::io(&out_dir, e))?;
    let write = |name: &str, contents: &str| -> Result<(), LabError> {
        let path = out_dir.join(name);
        fs::write(&path, contents).map_err(|e| LabError::io(path, e))
    };
    write("report.json", &(serde_json::to_string_pretty(&report).expect("reports serialize") + "\n"))?;
    write("summary.csv", &report.summary_csv())?;
    write("config.echo", &cfg.to_toml_string())?;
    match &artifact {
        Some(Artifact::Profile(m)) => io::write_profile_csv(&out_dir.join("profile.csv"), m.profile())?,
        Some(Artifact::Plan(p)) => io::write_plan(&out_dir.join("plan.csv"), p)?,
        None => {}
    }
    let exit_code = report.exit_code();
    Ok(RunOutcome { report, out_dir, exit_code })
}

/// Reads, validates and optionally overrides a config file.
pub fn load_config(path: &Path) -> Result<ExperimentConfig, LabError> {
    let text = fs::read_to_string(path).map_err(|e| LabError::io(path, e))?;
    ExperimentConfig::from_toml_str(&text)
}
