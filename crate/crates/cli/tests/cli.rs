use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use gbpf_core::presets::preset;
use tempfile::TempDir;

fn gbpf(args: &[&str], threads: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_gbpf"));
    cmd.args(args);
    if let Some(t) = threads {
        cmd.env("GBPF_THREADS", t);
    }
    cmd.output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap_or(-1)
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|rec| rec.unwrap().iter().map(|v| if v.is_empty() { f64::NAN } else { v.parse::<f64>().unwrap() }).collect())
        .collect();
    (header, rows)
}

#[test]
fn check_exit_codes() {
    let tmp = TempDir::new().unwrap();
    let dyadic = write_config(
        tmp.path(),
        "dyadic.json",
        r#"{"p": 0.5, "horizon": 10, "covariance": {"family": "tabulated", "values": [0.05, 0.025], "tail": "geometric"}}"#,
    );
    let o = gbpf(&["check", "--config", &dyadic], None);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));

    let small = write_config(
        tmp.path(),
        "small.json",
        r#"{"p": 0.258, "covariance": {"family": "exponential", "c": 0.2, "theta": 0.1}}"#,
    );
    let o = gbpf(&["check", "--config", &small], None);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stdout).contains("C2TooSmall"));

    let bad = write_config(
        tmp.path(),
        "bad.json",
        r#"{"p": 0.5, "covariance": {"family": "gaussian", "c": 0.1}}"#,
    );
    assert_eq!(code(&gbpf(&["check", "--config", &bad], None)), 2);
    assert_eq!(code(&gbpf(&["check", "--preset", "no-such-preset"], None)), 2);
}

#[test]
fn process_runs_are_byte_identical() {
    let tmp = TempDir::new().unwrap();
    let mut outputs = Vec::new();
    for (k, threads) in ["1", "4", "4"].iter().enumerate() {
        let dir = tmp.path().join(format!("run{k}"));
        let o = gbpf(
            &["simulate-process", "--preset", "exp-lrd-6.1", "--seed", "42", "--out", dir.to_str().unwrap()],
            Some(threads),
        );
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        outputs.push((fs::read(dir.join("process.csv")).unwrap(), fs::read(dir.join("process_stats.csv")).unwrap()));
    }
    assert!(outputs.windows(2).all(|w| w[0] == w[1]));
    let text = String::from_utf8(outputs[0].0.clone()).unwrap();
    assert_eq!(text.lines().count(), 2001);
    assert!(text.contains("\r\n"));
}

#[test]
fn field_run_and_analysis_grid() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path().join("field");
    let d = dir.to_str().unwrap();
    let o = gbpf(&["simulate-field", "--preset", "gauss-field-6.3", "--seed", "3", "--out", d], None);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let field = dir.join("field.csv");
    let (_, rows) = read_csv(&field);
    assert_eq!(rows.len(), 10_000);
    let adir = tmp.path().join("analysis");
    let o = gbpf(
        &[
            "analyze",
            "--input",
            field.to_str().unwrap(),
            "--window",
            "25,25",
            "--out",
            adir.to_str().unwrap(),
        ],
        None,
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let (header, rows) = read_csv(&adir.join("analysis.csv"));
    assert_eq!(rows.len(), 51 * 51);
    assert_eq!(&header[..2], &["s1", "s2"]);
}

#[test]
fn analysis_overlay_is_the_theoretical_covariance() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path().join("sim");
    let o = gbpf(
        &["simulate-process", "--preset", "uniform-5.9i", "--seed", "9", "--out", dir.to_str().unwrap()],
        None,
    );
    assert_eq!(code(&o), 0);
    let input = dir.join("process.csv");
    let adir = tmp.path().join("an");
    let o = gbpf(
        &[
            "analyze",
            "--preset",
            "uniform-5.9i",
            "--input",
            input.to_str().unwrap(),
            "--max-lag",
            "20",
            "--out",
            adir.to_str().unwrap(),
        ],
        None,
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let (header, rows) = read_csv(&adir.join("analysis.csv"));
    let col = header.iter().position(|h| h == "theoretical").unwrap();
    let spec = preset("uniform-5.9i").unwrap().process().unwrap().clone();
    assert_eq!(rows.len(), 21);
    for row in rows {
        let k = row[0] as u64;
        let want = spec.cov_at_lag(k).unwrap()[0][0];
        assert!((row[col] - want).abs() <= 1e-15 * want.abs().max(1.0));
    }

    let o = gbpf(
        &["analyze", "--input", input.to_str().unwrap(), "--max-lag", "500", "--out", adir.to_str().unwrap()],
        None,
    );
    assert_eq!(code(&o), 2);
    let stripped = tmp.path().join("nox.csv");
    fs::write(&stripped, "i,y\r\n1,0.5\r\n").unwrap();
    let o = gbpf(&["analyze", "--input", stripped.to_str().unwrap(), "--out", adir.to_str().unwrap()], None);
    assert_eq!(code(&o), 2);
}

#[test]
fn bivariate_gate() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path().join("b");
    let o = gbpf(&["simulate-process", "--preset", "bivariate-gauss-6.2", "--seed", "1", "--out", d.to_str().unwrap()], None);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("C2TooSmall"));
    let o = gbpf(
        &["simulate-process", "--preset", "bivariate-gauss-6.2", "--seed", "1", "--unchecked", "--out", d.to_str().unwrap()],
        None,
    );
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).to_lowercase().contains("negative gap"));
}

#[test]
fn gbp_run_writes_bits_and_stats() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "g.json",
        r#"{"p": 0.5, "n": 4000, "seed": 5, "covariance": {"family": "tabulated", "values": [0.05, 0.025], "tail": "geometric"}}"#,
    );
    let d = tmp.path().join("g");
    let o = gbpf(&["simulate-gbp", "--config", &cfg, "--out", d.to_str().unwrap()], None);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let (header, rows) = read_csv(&d.join("gbp.csv"));
    assert_eq!(header, ["i", "xi"]);
    assert_eq!(rows.len(), 4000);
    assert!(rows.iter().all(|r| r[1] == 0.0 || r[1] == 1.0));
    assert!(d.join("gbp_stats.csv").exists());
}
