use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ldtsm_core::validation::ValidationReport;

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("scenarios")
        .join(format!("{name}.json"))
}

fn ldtsm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ldtsm"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn s(p: &Path) -> String {
    p.to_string_lossy().into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn read(path: &Path) -> (String, Vec<Vec<f64>>) {
    let text = fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    let mut lines = text.lines();
    let header = lines.next().expect("header row").to_string();
    let rows = lines
        .map(|l| {
            l.split(',')
                .map(|v| v.parse().expect("numeric field"))
                .collect()
        })
        .collect();
    (header, rows)
}

fn write_config(dir: &Path, json: serde_json::Value) -> PathBuf {
    let p = dir.join("scenario.json");
    fs::write(&p, json.to_string()).unwrap();
    p
}

#[test]
fn curve_for_every_sample_scenario() {
    let tmp = tempfile::tempdir().unwrap();
    for name in [
        "cauchy",
        "stable",
        "cauchy_gauss",
        "gamma",
        "vasicek",
        "qtsm",
        "shirakawa",
    ] {
        let out = tmp.path().join(name);
        let o = ldtsm(&["curve", "--config", &s(&scenario(name)), "--out", &s(&out)]);
        assert!(o.status.success(), "{name}: {}", stderr(&o));
        let (header, rows) = read(&out.join("curve_0.csv"));
        assert_eq!(header, "T,P,forward_rate", "{name}");
        assert!(!rows.is_empty(), "{name}");
        for r in &rows {
            assert!(
                r[1] > 0.0 && r[1].is_finite() && r[2].is_finite(),
                "{name}: {r:?}"
            );
        }
    }
}

#[test]
fn curve_prices_mature_at_one() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(
        tmp.path(),
        serde_json::json!({
            "model": {"kind": "ldtsm", "family": "cauchy", "theta": 1.0, "lambda": {"times": [0.0], "values": [1.0]}},
            "grid": {"horizon": 2.0, "step": 0.5},
            "evaluation": {"times": [0.0, 1.0], "maturities": [0.5, 1.0, 1.5], "state": [0.3]},
        }),
    );
    let o = ldtsm(&["curve", "--config", &s(&config), "--out", &s(tmp.path())]);
    assert!(o.status.success(), "{}", stderr(&o));
    let (_, at_zero) = read(&tmp.path().join("curve_0.csv"));
    let (_, at_one) = read(&tmp.path().join("curve_1.csv"));
    assert_eq!(at_zero.len(), 3);
    // maturities before the valuation time are skipped
    assert_eq!(
        at_one.iter().map(|r| r[0]).collect::<Vec<_>>(),
        vec![1.0, 1.5]
    );
    assert_eq!(at_one[0][1], 1.0);
    // P_0^{0.5} = p(1.5, 0) / p(1, 0) for the standard Cauchy driver
    assert!((at_zero[0][1] - 1.0 / 1.5).abs() < 1e-15);
}

#[test]
fn simulate_writes_headers_per_model() {
    let tmp = tempfile::tempdir().unwrap();
    for (name, path_header) in [
        ("cauchy_gauss", "t,Z1,Z2,Z3"),
        ("vasicek", "t,W"),
        ("qtsm", "t,W1,W2"),
        ("shirakawa", "t,W,N"),
    ] {
        let out = tmp.path().join(name);
        let o = ldtsm(&[
            "simulate",
            "--config",
            &s(&scenario(name)),
            "--out",
            &s(&out),
            "--paths",
            "64",
            "--seed",
            "5",
        ]);
        assert!(o.status.success(), "{name}: {}", stderr(&o));
        let (header, rows) = read(&out.join("path_0.csv"));
        assert_eq!(header, path_header, "{name}");
        assert_eq!(rows[0][0], 0.0);
        assert_eq!(read(&out.join("curve_evolution_0.csv")).0, "t,T,P");
        let (header, summary) = read(&out.join("summary.csv"));
        assert_eq!(header, "t,T,mean_P,std_error");
        assert!(summary.iter().all(|r| r[3] >= 0.0));
        assert_eq!(
            out.join("jumps_0.csv").exists(),
            name == "shirakawa",
            "{name}"
        );
    }
    let (header, _) = read(&tmp.path().join("shirakawa/jumps_0.csv"));
    assert_eq!(header, "time,mark_index,mark");
}

#[test]
fn simulate_steps_override_sets_the_grid() {
    let tmp = tempfile::tempdir().unwrap();
    let o = ldtsm(&[
        "simulate",
        "--config",
        &s(&scenario("vasicek")),
        "--out",
        &s(tmp.path()),
        "--paths",
        "4",
        "--steps",
        "40",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let (_, rows) = read(&tmp.path().join("path_0.csv"));
    assert_eq!(rows.len(), 41);
}

#[test]
fn numbers_carry_seventeen_significant_digits() {
    let tmp = tempfile::tempdir().unwrap();
    let o = ldtsm(&[
        "curve",
        "--config",
        &s(&scenario("cauchy")),
        "--out",
        &s(tmp.path()),
    ]);
    assert!(o.status.success());
    let text = fs::read_to_string(tmp.path().join("curve_0.csv")).unwrap();
    for field in text.lines().skip(1).flat_map(|l| l.split(',')) {
        let mantissa = field.split('e').next().unwrap().replace(['-', '.'], "");
        assert_eq!(mantissa.len(), 17, "{field}");
    }
}

#[test]
fn validate_scenario_only_reports_json_lines() {
    let tmp = tempfile::tempdir().unwrap();
    let o = ldtsm(&[
        "validate",
        "--config",
        &s(&scenario("cauchy")),
        "--out",
        &s(tmp.path()),
        "--paths",
        "10000",
        "--scenario-only",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let jsonl = fs::read_to_string(tmp.path().join("validation.jsonl")).unwrap();
    let reports: Vec<ValidationReport> = jsonl
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert!(!reports.is_empty());
    assert!(reports
        .iter()
        .all(|r| r.pass && r.test.starts_with("martingale")));
    let table = fs::read_to_string(tmp.path().join("validation_summary.txt")).unwrap();
    assert!(table.contains("PASS"));
}

#[test]
fn failed_validation_exits_with_one() {
    // away from the coincidence point the one-sided Gamma driver misses the
    // martingale target by many standard errors
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(
        tmp.path(),
        serde_json::json!({
            "model": {"kind": "ldtsm", "family": "gamma", "a": 1.0, "b": 1.0, "z0": [2.0],
                      "lambda": {"times": [0.0], "values": [1.0]}},
            "grid": {"horizon": 2.0, "step": 0.5},
            "evaluation": {"maturities": [2.0]},
        }),
    );
    let o = ldtsm(&[
        "validate",
        "--config",
        &s(&config),
        "--out",
        &s(tmp.path()),
        "--paths",
        "10000",
        "--scenario-only",
    ]);
    assert_eq!(
        o.status.code(),
        Some(1),
        "{}",
        String::from_utf8_lossy(&o.stdout)
    );
    assert!(String::from_utf8_lossy(&o.stdout).contains("FAIL"));
}

#[test]
fn validate_rejects_small_samples() {
    let tmp = tempfile::tempdir().unwrap();
    let o = ldtsm(&["validate", "--out", &s(tmp.path()), "--paths", "100"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn density_output() {
    let tmp = tempfile::tempdir().unwrap();
    let o = ldtsm(&[
        "density",
        "--config",
        &s(&scenario("stable")),
        "--out",
        &s(tmp.path()),
        "--points",
        "11",
        "--x-min",
        "-5",
        "--x-max",
        "5",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let (header, rows) = read(&tmp.path().join("density.csv"));
    assert_eq!(header, "x,p");
    assert_eq!(rows.len(), 11);
    assert_eq!(rows[0][0], -5.0);
    assert!(rows.iter().all(|r| r[1] > 0.0));
    // symmetric driver
    assert!((rows[3][1] - rows[7][1]).abs() < 1e-10);

    let o = ldtsm(&[
        "density",
        "--config",
        &s(&scenario("stable")),
        "--out",
        &s(tmp.path()),
        "--method",
        "closed",
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn configuration_errors_name_the_field() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(
        tmp.path(),
        serde_json::json!({
            "model": {"kind": "ldtsm", "family": "stable", "alpha": 2.5, "theta": 1.0,
                      "lambda": {"times": [0.0], "values": [1.0]}},
            "evaluation": {"maturities": [1.0]},
        }),
    );
    let o = ldtsm(&["curve", "--config", &s(&config), "--out", &s(tmp.path())]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("model.alpha"), "{}", stderr(&o));

    let o = ldtsm(&["curve", "--config", &s(&tmp.path().join("missing.json"))]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn calibrate_needs_a_curve() {
    let tmp = tempfile::tempdir().unwrap();
    let o = ldtsm(&[
        "calibrate",
        "--config",
        &s(&scenario("cauchy")),
        "--out",
        &s(tmp.path()),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("curve"), "{}", stderr(&o));
}

#[test]
fn calibrate_writes_schedule_and_residuals() {
    let tmp = tempfile::tempdir().unwrap();
    // Cauchy θ = 1, z0 = 0, λ_0 = 1: P_0^1 = 1/2 needs λ_1 = 1
    fs::write(tmp.path().join("target.csv"), "T,price\n1.0,0.5\n").unwrap();
    let config = write_config(
        tmp.path(),
        serde_json::json!({
            "model": {"kind": "ldtsm", "family": "cauchy", "theta": 1.0, "lambda": {"times": [0.0], "values": [1.0]}},
            "evaluation": {"maturities": [1.0]},
            "calibration": {"curve": "target.csv"},
        }),
    );
    let o = ldtsm(&[
        "calibrate",
        "--config",
        &s(&config),
        "--out",
        &s(tmp.path()),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let lambda: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("lambda.json")).unwrap()).unwrap();
    assert!((lambda["values"][1].as_f64().unwrap() - 1.0).abs() < 1e-10);
    let (header, rows) = read(&tmp.path().join("residuals.csv"));
    assert_eq!(header, "T,target,fitted,lambda,rel_error");
    assert_eq!(rows.len(), 1);

    fs::write(tmp.path().join("target.csv"), "T,price\n1.0,5.0\n").unwrap();
    let o = ldtsm(&[
        "calibrate",
        "--config",
        &s(&config),
        "--out",
        &s(tmp.path()),
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn worker_override_is_validated() {
    let o = Command::new(env!("CARGO_BIN_EXE_ldtsm"))
        .args(["curve", "--config", &s(&scenario("cauchy"))])
        .env("LDTSM_WORKERS", "0")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("LDTSM_WORKERS"));
}

#[test]
fn help_documents_defaults() {
    let o = ldtsm(&["--help"]);
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stdout).contains("LDTSM_WORKERS"));
    let o = ldtsm(&["validate", "--help"]);
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.contains("[default: 100000]"), "{text}");
}
