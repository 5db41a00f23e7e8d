use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn mixgof(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mixgof"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn column(values: impl IntoIterator<Item = f64>) -> String {
    values.into_iter().map(|v| format!("{v}\n")).collect()
}

struct Files {
    _dir: TempDir,
    x: String,
    v: String,
    pairs: String,
    null: String,
    nan: String,
    negative: String,
}

fn files() -> Files {
    let dir = tempfile::tempdir().unwrap();
    let x = write(dir.path(), "x.csv", &format!("x\n{}", column((1..=25).map(|k| (k as f64 * 0.37).fract() * 3.0))));
    let v = write(dir.path(), "v.csv", &column((1..=20).map(|k| (k as f64 * 0.61).fract() * 2.5)));
    let pairs: String = (1..=25)
        .map(|k| format!("{},{}\n", (k as f64 * 0.37).fract(), (k as f64 * 0.73).fract()))
        .collect();
    let pairs = write(dir.path(), "pairs.csv", &pairs);
    let null = write(
        dir.path(),
        "null.json",
        r#"{"generator": {"family": "exponential", "params": ["1 + 1/i"]}}"#,
    );
    let nan = write(dir.path(), "nan.csv", "1\nNaN\n2\n");
    let negative = write(dir.path(), "neg.csv", "-1\n-2\n-3\n");
    let s = |p: PathBuf| p.to_string_lossy().into_owned();
    Files {
        x: s(x),
        v: s(v),
        pairs: s(pairs),
        null: s(null),
        nan: s(nan),
        negative: s(negative),
        _dir: dir,
    }
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn gof_prints_a_test_result() {
    let f = files();
    let o = mixgof(&["gof", "--data", &f.x, "--null", &f.null, "--alpha", "0.05", "--B", "99", "--seed", "42"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    for key in ["statistic_ks", "statistic_cvm", "critical_ks", "critical_cvm", "p_ks", "p_cvm", "reject_ks", "reject_cvm"] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
    assert_eq!(v["B"], 99);
    assert_eq!(v["seed"], 42);
}

#[test]
fn identical_command_lines_give_identical_bytes() {
    let f = files();
    let runs: Vec<Vec<&str>> = vec![
        vec!["gof", "--data", &f.x, "--null", &f.null, "--B", "50", "--seed", "3"],
        vec!["gof-family", "--data", &f.x, "--family", "exp-shifted", "--shift", "1/sqrt(i)", "--B", "30"],
        vec!["homogeneity", "--x", &f.x, "--v", &f.v, "--B", "50", "--weights", "linear"],
        vec!["symmetry", "--data", &f.x, "--B", "50", "--format", "csv"],
        vec!["independence", "--data", &f.pairs, "--split", "1", "--B", "50"],
    ];
    for args in runs {
        let first = mixgof(&args);
        assert_eq!(first.status.code(), Some(0), "{args:?}: {}", String::from_utf8_lossy(&first.stderr));
        let mut threaded = args.clone();
        threaded.extend(["--threads", "2"]);
        assert_eq!(first.stdout, mixgof(&args).stdout, "{args:?}");
        assert_eq!(first.stdout, mixgof(&threaded).stdout, "{args:?} with 2 threads");
    }
}

#[test]
fn family_result_reports_the_estimate() {
    let f = files();
    let o = mixgof(&["gof-family", "--data", &f.x, "--family", "exp-shifted", "--B", "20"]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(v["theta_hat"][0].as_f64().unwrap() > 0.0);
    let o = mixgof(&["gof-family", "--data", &f.x, "--family", "normal", "--B", "20"]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["theta_hat"].as_array().unwrap().len(), 2);
}

#[test]
fn out_flag_writes_a_file() {
    let f = files();
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.csv");
    let o = mixgof(&["symmetry", "--data", &f.x, "--B", "20", "--format", "csv", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(o.stdout.is_empty());
    let text = std::fs::read_to_string(out).unwrap();
    assert!(text.starts_with("statistic_ks,statistic_cvm,"));
    assert_eq!(text.lines().count(), 2);
}

#[test]
fn exit_codes() {
    let f = files();
    let usage = mixgof(&["gof", "--data", "/no/such/file.csv", "--null", &f.null]);
    assert_eq!(usage.status.code(), Some(2));
    let err: serde_json::Value = serde_json::from_slice(usage.stderr.trim_ascii_end()).unwrap();
    assert_eq!(err["error"], "usage");
    assert_eq!(mixgof(&["gof", "--bogus"]).status.code(), Some(2));
    assert_eq!(mixgof(&["simulate", "--table", "2"]).status.code(), Some(2));
    assert_eq!(mixgof(&[]).status.code(), Some(2));

    let data = mixgof(&["symmetry", "--data", &f.nan]);
    assert_eq!(data.status.code(), Some(3));
    let err: serde_json::Value = serde_json::from_slice(data.stderr.trim_ascii_end()).unwrap();
    assert_eq!(err["error"], "data");
    assert_eq!(mixgof(&["independence", "--data", &f.x]).status.code(), Some(3));
    assert_eq!(mixgof(&["gof", "--data", &f.pairs, "--null", &f.null]).status.code(), Some(3));

    let numerical = mixgof(&["gof-family", "--data", &f.negative, "--family", "exp-shifted"]);
    assert_eq!(numerical.status.code(), Some(4));
    let err: serde_json::Value = serde_json::from_slice(numerical.stderr.trim_ascii_end()).unwrap();
    assert_eq!(err["error"], "numerical");
}

#[test]
fn validate_prints_weight_diagnostics() {
    let o = mixgof(&["validate", "--weights", "linear", "--n", "3"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("kappa_hat = 1.1667"), "{}", stdout(&o));
    let f = files();
    let o = mixgof(&["validate", "--null", &f.null, "--n", "25", "--format", "json"]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["kappa_hat"], 1.0);
    assert_eq!(v["null_components"], 25);
    assert_eq!(mixgof(&["validate"]).status.code(), Some(3));
}

#[test]
fn help_lists_flags_with_defaults() {
    for (sub, flags) in [
        ("gof", &["--data", "--null", "--alpha", "--B", "--seed", "--threads", "--weights", "--format"][..]),
        ("gof-family", &["--family", "--shift", "--inverse-gaussian-order"][..]),
        ("homogeneity", &["--x", "--v", "--weights-v"][..]),
        ("symmetry", &["--data"][..]),
        ("independence", &["--split"][..]),
        ("simulate", &["--table", "--meta", "--B", "--export-configs", "--config"][..]),
        ("validate", &["--weights", "--n", "--null"][..]),
    ] {
        let o = mixgof(&[sub, "--help"]);
        assert_eq!(o.status.code(), Some(0));
        let text = stdout(&o);
        for flag in flags {
            assert!(text.contains(flag), "{sub} --help lacks {flag}");
        }
        assert!(text.contains("[default:"), "{sub} --help shows no defaults");
    }
}

#[test]
fn simulate_writes_the_table_schema() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("t1.csv");
    let args = ["simulate", "--table", "1", "--meta", "3", "--B", "9", "--seed", "7", "--n", "25"];
    let mut with_out = args.to_vec();
    with_out.extend(["--out", out.to_str().unwrap()]);
    assert_eq!(mixgof(&with_out).status.code(), Some(0));
    let text = std::fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("table,scenario,n,alpha,ks_rate,cvm_rate,meta,B,seed"));
    assert_eq!(lines.count(), 6 * 3);
    assert_eq!(mixgof(&args).stdout, text.as_bytes());

    // An exported cell config reproduces its rows when run alone.
    let configs = dir.path().join("configs");
    let mut export = args.to_vec();
    export.extend(["--export-configs", configs.to_str().unwrap()]);
    assert_eq!(mixgof(&export).status.code(), Some(0));
    let cell = configs.join("table1_1.4_n25.json");
    let alone = mixgof(&["simulate", "--config", cell.to_str().unwrap()]);
    assert_eq!(alone.status.code(), Some(0), "{}", String::from_utf8_lossy(&alone.stderr));
    let alone = stdout(&alone);
    let mut alone_lines = alone.lines();
    alone_lines.next();
    for line in alone_lines {
        assert!(text.lines().any(|l| l == line), "{line}");
    }
}
