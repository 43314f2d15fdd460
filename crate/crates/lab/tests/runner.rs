use std::fs;
use std::path::Path;

use brenier_lab::runner::{execute, run_experiment, ExperimentReport, SCHEMA_VERSION};
use brenier_lab::ExperimentConfig;

fn config(source: &str, out: &Path) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::from_toml_str(source).unwrap();
    cfg.out_dir = Some(out.to_path_buf());
    cfg
}

fn check<'a>(report: &'a ExperimentReport, name: &str) -> &'a brenier_core::verify::BoundReport {
    report.checks.iter().find(|c| c.check == name).unwrap_or_else(|| panic!("no {name} row"))
}

#[test]
fn gaussian_line_monotonicity_passes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("[target]\nfamily = \"gaussian\"\ndim = 1\n[map]\nmethod = \"exact-1d\"\n[checks.monotonicity]\n", dir.path());
    let out = run_experiment(&cfg).unwrap();
    assert_eq!(out.exit_code, 0);
    assert!(check(&out.report, "monotonicity").passed);
    for file in ["report.json", "summary.csv", "config.echo"] {
        assert!(dir.path().join(file).is_file(), "{file} missing");
    }
}

#[test]
fn planar_power_exact_radial_passes_every_check() {
    let dir = tempfile::tempdir().unwrap();
    let src = "seed = 11\n[target]\nfamily = \"power\"\ndim = 2\np = 1.5\n[map]\nmethod = \"exact-radial\"\n\
               [checks.displacement]\n[checks.opnorm]\n[checks.eigenvar]\n[checks.ma-residual]\n";
    let out = run_experiment(&config(src, dir.path())).unwrap();
    assert_eq!(out.exit_code, 0, "{}", out.report.table());
    let names: Vec<&str> = out.report.checks.iter().map(|c| c.check.as_str()).collect();
    assert_eq!(names, ["displacement", "opnorm", "eigenvar", "ma-residual"]);
    assert!(out.report.checks.iter().all(|c| c.passed && c.gated));
    assert!(check(&out.report, "opnorm").exponent.as_ref().unwrap().slope <= 2.1);
    assert!(check(&out.report, "eigenvar").constant.unwrap() < 4.0);
    assert!(dir.path().join("profile.csv").is_file());
}

#[test]
fn summary_csv_is_byte_identical_across_runs() {
    let src = "seed = 5\n[target]\nfamily = \"power\"\ndim = 2\n[map]\nmethod = \"entropic\"\nsamples = 300\n\
               [checks.monotonicity]\npairs = 2000\n[checks.displacement]\n[checks.eigenvar]\nsamples = 2000\n";
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run_experiment(&config(src, a.path())).unwrap();
    run_experiment(&config(src, b.path())).unwrap();
    let csv_a = fs::read(a.path().join("summary.csv")).unwrap();
    assert_eq!(csv_a, fs::read(b.path().join("summary.csv")).unwrap());
    assert!(String::from_utf8(csv_a.clone()).unwrap().starts_with("check,constant,exponent,pass\n"));

    let mut other = config(src, a.path());
    other.seed = 6;
    let (report, _) = execute(&other).unwrap();
    assert_ne!(report.summary_csv().into_bytes(), csv_a);
}

#[test]
fn adding_a_check_leaves_other_rows_untouched() {
    let base = "seed = 9\n[target]\nfamily = \"gaussian\"\ndim = 3\n[map]\nmethod = \"exact-radial\"\n[checks.monotonicity]\npairs = 500\n";
    let (small, _) = execute(&ExperimentConfig::from_toml_str(base).unwrap()).unwrap();
    let (large, _) = execute(&ExperimentConfig::from_toml_str(&format!("{base}[checks.eigenvar]\nsamples = 500\n")).unwrap()).unwrap();
    assert_eq!(check(&small, "monotonicity").constant, check(&large, "monotonicity").constant);
    assert_eq!(check(&small, "monotonicity").seed, check(&large, "monotonicity").seed);
}

#[test]
fn exit_status_is_the_conjunction_of_gated_checks() {
    let src = "[target]\nfamily = \"laplace-product\"\ndim = 1\n[map]\nmethod = \"exact-1d\"\n[checks.displacement]\n[checks.hessian-band]\npoints = 200\n";
    let (report, _) = execute(&ExperimentConfig::from_toml_str(src).unwrap()).unwrap();
    assert!(!check(&report, "hessian-band").passed);
    assert_eq!(report.exit_code(), 1);

    let (report, _) = execute(&ExperimentConfig::from_toml_str(&format!("{src}gated = false\n")).unwrap()).unwrap();
    assert!(!check(&report, "hessian-band").passed);
    assert!(check(&report, "displacement").passed);
    assert_eq!(report.exit_code(), 0);
}

#[test]
fn a_failing_check_is_recorded_and_the_run_continues() {
    // the power family declares no Gaussian concentration constant
    let src = "[target]\nfamily = \"power\"\ndim = 2\n[map]\nmethod = \"exact-radial\"\n\
               [checks.concentration-constant]\nkind = \"gaussian\"\n[checks.displacement]\n";
    let (report, _) = execute(&ExperimentConfig::from_toml_str(src).unwrap()).unwrap();
    let failed = check(&report, "concentration-constant");
    assert!(!failed.passed && failed.gated);
    assert!(failed.notes.iter().any(|n| n.contains("failed to run")), "{:?}", failed.notes);
    assert!(check(&report, "displacement").passed);
    assert_eq!(report.exit_code(), 1);
}

#[test]
fn solver_failure_is_recorded_for_every_check() {
    let dir = tempfile::tempdir().unwrap();
    let src = "[target]\nfamily = \"power\"\ndim = 2\n[map]\nmethod = \"semi-discrete\"\nsupport-points = 16\nsupport-samples = 2000\n\
               mc-budget = 5000\nmass-tol = 1e-12\nmax-iters = 1\n[checks.monotonicity]\n[checks.displacement]\n";
    let out = run_experiment(&config(src, dir.path())).unwrap();
    assert!(!out.report.map.built);
    assert!(out.report.map.notes[0].contains("map construction failed"));
    assert_eq!(out.report.checks.len(), 2);
    assert!(out.report.checks.iter().all(|c| !c.passed));
    assert_eq!(out.exit_code, 1);
    assert!(dir.path().join("report.json").is_file());
}

#[test]
fn report_json_is_versioned_and_carries_references() {
    let dir = tempfile::tempdir().unwrap();
    let src = "[target]\nfamily = \"gaussian\"\ndim = 2\n[map]\nmethod = \"exact-radial\"\n[checks.monotonicity]\npairs = 100\n\
               [checks.ball-certificate]\npoints = [[0.0, 0.0], [2.0, 0.0]]\nmc-budget = 20000\n[checks.lp-norm]\nsamples = 2000\n";
    run_experiment(&config(src, dir.path())).unwrap();
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(json["schema_version"], SCHEMA_VERSION);
    let checks = json["checks"].as_array().unwrap();
    assert_eq!(checks.len(), 3);
    for c in checks {
        assert!(!c["reference"].as_str().unwrap().is_empty());
    }
    let parsed: ExperimentReport = serde_json::from_value(json).unwrap();
    assert_eq!(parsed.checks.len(), 3);

    let echo = fs::read_to_string(dir.path().join("config.echo")).unwrap();
    let echoed = ExperimentConfig::from_toml_str(&echo).unwrap();
    assert_eq!(echoed, config(src, dir.path()));
}
