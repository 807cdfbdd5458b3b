use std::path::Path;
use std::process::Command;

fn locq(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_locq"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p.display().to_string()
}

const MAGIC: &str = r#"{"schema_version": 1, "seed": 5,
  "experiment": {"kind": "magic-scan", "params": {"ns": [6], "alphas": [0.0, 0.78], "n_a": 2, "cliffords": 4}}}"#;

#[test]
fn malformed_config_exits_2_without_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = write(
        dir.path(),
        "bad.json",
        &MAGIC.replace("\"cliffords\"", "\"clifords\""),
    );
    let o = locq(&[
        "magic-scan",
        "--config",
        &cfg,
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(
        err.contains("bad.json") && err.contains("clifords"),
        "{err}"
    );
    assert!(!out.exists());

    let cfg = write(dir.path(), "trunc.json", "{\"schema_version\": 1,");
    assert_eq!(
        locq(&[
            "magic-scan",
            "--config",
            &cfg,
            "--out",
            out.to_str().unwrap()
        ])
        .status
        .code(),
        Some(2)
    );
    assert!(!out.exists());
}

#[test]
fn wrong_subcommand_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "m.json", MAGIC);
    let o = locq(&[
        "certify",
        "--config",
        &cfg,
        "--out",
        dir.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("experiment.kind"));
}

#[test]
fn zero_gap_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "z.json",
        r#"{"schema_version": 1, "experiment": {"kind": "certify", "params": {
            "target": {"family": "zero", "n": 3}, "a": [0, 1], "oracle": {"kind": "separable", "cut": [0]}}}}"#,
    );
    let out = dir.path().join("o");
    let o = locq(&["certify", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("experiment.params"));
    assert!(!out.exists());
}

#[test]
fn reruns_are_byte_identical_across_worker_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "m.json", MAGIC);
    let run = |name: &str, workers: &str| {
        let out = dir.path().join(name);
        let o = locq(&[
            "magic-scan",
            "--config",
            &cfg,
            "--out",
            out.to_str().unwrap(),
            "--workers",
            workers,
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        out
    };
    let (a, b) = (run("a", "1"), run("b", "3"));
    for f in ["magic_scan.csv", "magic_summary.csv"] {
        let x = std::fs::read(a.join(f)).unwrap();
        assert_eq!(x, std::fs::read(b.join(f)).unwrap(), "{f}");
        assert!(String::from_utf8(x).unwrap().starts_with("# locq "));
    }
    let strip = |p: &Path| {
        let mut v: serde_json::Value =
            serde_json::from_slice(&std::fs::read(p.join("summary.json")).unwrap()).unwrap();
        locq::runner::strip_wall_time(&mut v);
        v
    };
    let s = strip(&a);
    assert_eq!(s, strip(&b));
    assert!(s["config_digest"].as_str().unwrap().starts_with("sha256:"));
    assert_eq!(s["locq"], locq::VERSION);
}

#[test]
fn seed_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "m.json", MAGIC);
    let read = |seed: &str| {
        let out = dir.path().join(format!("s{seed}"));
        assert!(locq(&[
            "magic-scan",
            "--config",
            &cfg,
            "--out",
            out.to_str().unwrap(),
            "--seed",
            seed
        ])
        .status
        .success());
        let v: serde_json::Value =
            serde_json::from_slice(&std::fs::read(out.join("summary.json")).unwrap()).unwrap();
        (v["seed"].as_u64().unwrap(), v["config_digest"].clone())
    };
    let (s1, d1) = read("1");
    let (s2, d2) = read("2");
    assert_eq!((s1, s2), (1, 2));
    assert_ne!(d1, d2);
}

#[test]
fn verify_reports_and_rejects_unknown_suites() {
    let o = locq(&["verify", "stabilizer-counts", "ghz-degenerate"]);
    assert!(o.status.success());
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(
        text.contains("[PASS]  7 stabilizer-counts") && text.contains("2 of 2 suites passed"),
        "{text}"
    );
    assert_eq!(locq(&["verify", "no-such-suite"]).status.code(), Some(2));
}
