use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use markovianity_cli::{build_scenario, parse_config, run_scenario, CliError};

fn scenario_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_markovianity"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn csv_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    out.sort();
    out
}

#[test]
fn runs_are_byte_identical_and_rows_match_grid() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let config = scenario_path("dephasing_sin.json");
    for dir in [&a, &b] {
        let out = cli(&["run", config.to_str().unwrap(), "--out", dir.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let (fa, fb) = (csv_files(&a), csv_files(&b));
    assert!(fa.len() > 20);
    assert_eq!(fa, fb);
    for (name, body) in &fa {
        let text = String::from_utf8(body.clone()).unwrap();
        assert!(!text.contains('\r'));
        assert_eq!(text.lines().count() - 1, 2001, "{name}");
    }
    assert_eq!(fs::read(a.join("summary.json")).unwrap(), fs::read(b.join("summary.json")).unwrap());
}

#[test]
fn summary_fields() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = parse_config(&fs::read_to_string(scenario_path("dephasing_sin.json")).unwrap()).unwrap();
    let scenario = build_scenario(&cfg, &[]).unwrap();
    let outcome = run_scenario(&scenario, tmp.path(), None).unwrap();
    assert_eq!(outcome.verdict, "non_markovian");
    let s = &outcome.summary;
    for key in ["verdict", "g_max", "worst_choi_eigenvalue", "violation_intervals", "seed", "tolerances"] {
        assert!(s.get(key).is_some(), "{key}");
    }
    assert_eq!(s["seed"], 42);
    let iv = s["divisibility_violation_intervals"][0].as_array().unwrap();
    let (lo, hi) = (iv[0].as_f64().unwrap(), iv[1].as_f64().unwrap());
    let h = 2.0 * std::f64::consts::PI / 2000.0;
    assert!((lo - std::f64::consts::PI).abs() <= 2.0 * h);
    assert!((hi - 2.0 * std::f64::consts::PI).abs() <= 2.0 * h);
    assert!(tmp.path().join("trace_distance.gp").exists());
}

#[test]
fn markovian_scenario() {
    let tmp = tempfile::tempdir().unwrap();
    let config = scenario_path("dephasing_markovian.json");
    let out = cli(&[
        "run",
        config.to_str().unwrap(),
        "--out",
        tmp.path().to_str().unwrap(),
        "--fail-on-nonmarkovian",
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("verdict: markovian"));
}

#[test]
fn fail_on_nonmarkovian_exit_code() {
    let tmp = tempfile::tempdir().unwrap();
    let config = scenario_path("microscopic_zz.json");
    let out = cli(&[
        "run",
        config.to_str().unwrap(),
        "--out",
        tmp.path().to_str().unwrap(),
        "--fail-on-nonmarkovian",
    ]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn validate_reports_column() {
    let out = cli(&["validate", scenario_path("bad_expression.json").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("column 5"), "{err}");

    let ok = cli(&["validate", scenario_path("weyl_qutrit.json").to_str().unwrap()]);
    assert_eq!(ok.status.code(), Some(0));
}

#[test]
fn empty_criteria_writes_validity_only() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = parse_config(
        r#"{"schema_version": 1, "dimension": 2,
            "generator": {"class": "dephasing", "gamma": "1"},
            "grid": {"t_end": 1.0, "n_steps": 10}, "criteria": []}"#,
    )
    .unwrap();
    let outcome = run_scenario(&build_scenario(&cfg, &[]).unwrap(), tmp.path(), None).unwrap();
    assert_eq!(outcome.verdict, "not_evaluated");
    let mut names: Vec<_> = outcome
        .files
        .iter()
        .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
        .collect();
    names.sort();
    assert_eq!(names, vec!["family_validity.csv", "summary.json"]);
    let body = fs::read_to_string(tmp.path().join("family_validity.csv")).unwrap();
    assert_eq!(body.lines().count(), 12);
}

#[test]
fn config_errors() {
    let base = |generator: &str, extra: &str| {
        format!(r#"{{"schema_version": 1, "dimension": 2, "generator": {generator}, "grid": {{"t_end": 1.0}}{extra}}}"#)
    };
    let bad_version = base(r#"{"class": "dephasing", "gamma": "1"}"#, "").replace("\"schema_version\": 1", "\"schema_version\": 2");
    assert!(matches!(parse_config(&bad_version), Err(CliError::Config(_))));

    let unknown_ident = parse_config(&base(r#"{"class": "dephasing", "gamma": "sin(x)"}"#, "")).unwrap();
    let err = build_scenario(&unknown_ident, &[]).err().unwrap();
    assert!(err.to_string().contains("column"), "{err}");
    assert_eq!(err.exit_code(), 2);

    let cfg = parse_config(&base(r#"{"class": "dephasing", "gamma": "1"}"#, "")).unwrap();
    assert!(build_scenario(&cfg, &[("nonsense".into(), 1.0)]).is_err());
    assert!(build_scenario(&cfg, &[("divisibility".into(), 1e-7)]).is_ok());

    let unknown_criterion = base(r#"{"class": "dephasing", "gamma": "1"}"#, r#", "criteria": [{"name": "magic"}]"#);
    assert!(parse_config(&unknown_criterion).is_err());

    let bad_alpha = parse_config(&base(
        r#"{"class": "dephasing", "gamma": "1"}"#,
        r#", "criteria": [{"name": "relative_entropy", "kind": "renyi", "alpha": 3}]"#,
    ))
    .unwrap();
    assert!(build_scenario(&bad_alpha, &[]).is_err());

    let precondition = parse_config(&base(
        r#"{"class": "from_map_family", "n": [["1 + t", "1"], ["1", "1"]]}"#,
        "",
    ))
    .unwrap();
    assert!(build_scenario(&precondition, &[]).err().unwrap().to_string().contains("t = "));

    let out = cli(&["run", scenario_path("dephasing_sin.json").to_str().unwrap(), "--tol-override", "cp"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn numeric_failure_names_time() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = parse_config(
        r#"{"schema_version": 1, "dimension": 2,
            "generator": {"class": "dephasing", "gamma": "1/(t - 0.5)"},
            "grid": {"t_end": 1.0, "n_steps": 4}}"#,
    )
    .unwrap();
    let err = run_scenario(&build_scenario(&cfg, &[]).unwrap(), tmp.path(), None).unwrap_err();
    assert_eq!(err.exit_code(), 3);
    assert!(err.to_string().contains("t = 0.5"), "{err}");
}
