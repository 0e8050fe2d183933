use std::path::Path;
use std::process::Command;

fn arrest(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_arrest")).args(args).output().unwrap()
}

fn read_all(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

#[test]
fn run_is_byte_identical_without_timestamp() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("scenario.json");
    std::fs::write(&cfg, r#"{"world":{"slots":40,"leader":{"v_l_max":2.0}}}"#).unwrap();
    let mut dirs = Vec::new();
    for name in ["a", "b"] {
        let out = tmp.path().join(name);
        let o = arrest(&[
            "run",
            "--config",
            cfg.to_str().unwrap(),
            "--seed",
            "7",
            "--episodes",
            "3",
            "--no-timestamp",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        assert!(String::from_utf8_lossy(&o.stdout).starts_with("P(d<=5)"));
        dirs.push(out);
    }
    let a = read_all(&dirs[0]);
    assert_eq!(a, read_all(&dirs[1]));
    let names: Vec<&str> = a.iter().map(|f| f.0.as_str()).collect();
    assert!(names.contains(&"metrics.json") && names.contains(&"episode_0002.csv") && names.contains(&"cdf_distance.csv"));
    assert!(!names.iter().any(|n| n.ends_with(".tmp")));
}

#[test]
fn timestamp_header_is_on_by_default() {
    let tmp = tempfile::tempdir().unwrap();
    let o = arrest(&["sampling-rate", "--trials", "20", "--out", tmp.path().to_str().unwrap()]);
    assert!(o.status.success());
    let text = std::fs::read_to_string(tmp.path().join("sampling_rate.csv")).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# generated "));
    assert!(lines.next().unwrap().starts_with("rate,angle_error_deg"));
}

#[test]
fn gains_prints_residuals() {
    let tmp = tempfile::tempdir().unwrap();
    let o = arrest(&["gains", "--out", tmp.path().to_str().unwrap()]);
    assert!(o.status.success());
    let line = String::from_utf8(o.stdout).unwrap();
    assert!(line.contains("residuals") && line.contains("spectral radius"));
    let json: serde_json::Value = serde_json::from_slice(&std::fs::read(tmp.path().join("gains.json")).unwrap()).unwrap();
    assert!(json["control_residual"].as_f64().unwrap() < 1e-9);
}

#[test]
fn failures_have_distinct_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().to_str().unwrap();
    assert_eq!(arrest(&["run", "--bogus"]).status.code(), Some(2));
    assert_eq!(arrest(&["gains", "--config", "/no/such/file.json", "--out", out]).status.code(), Some(3));
    let bad = tmp.path().join("bad.json");
    std::fs::write(&bad, r#"{"world":{"d_th":-1}}"#).unwrap();
    assert_eq!(arrest(&["gains", "--config", bad.to_str().unwrap(), "--out", out]).status.code(), Some(3));
    let base = tmp.path().join("baseline.json");
    std::fs::write(&base, r#"{"policy":{"strategy":"baseline"}}"#).unwrap();
    assert_eq!(arrest(&["gains", "--config", base.to_str().unwrap(), "--out", out]).status.code(), Some(3));
}
