use std::path::Path;
use std::process::{Command, Output};

use zcrit::report::Report;

fn zcrit(args: &[&str], workers: Option<usize>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_zcrit"));
    cmd.args(args);
    match workers {
        Some(w) => cmd.env("ZCRIT_WORKERS", w.to_string()),
        None => cmd.env_remove("ZCRIT_WORKERS"),
    };
    cmd.output().expect("binary runs")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

const SMALL_TUYNMAN: &str = "verb = \"tuynman\"\nks = [4]\n[model]\nkind = \"fubini-study\"\nn = 1\nlevel = 12\n";

#[test]
fn unknown_key_exits_with_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "verb = \"bergman\"\n[model]\nlevle = 3\n").unwrap();
    let out = zcrit(&["bergman", path(&cfg), "--out", path(&dir.path().join("o"))], None);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("levle"), "{err}");
    assert!(err.contains("line 3"), "{err}");
}

#[test]
fn verb_mismatch_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("t.toml");
    std::fs::write(&cfg, SMALL_TUYNMAN).unwrap();
    let out = zcrit(&["bergman", path(&cfg), "--out", path(&dir.path().join("o"))], None);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn golden_survives_worker_and_output_changes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("t.toml");
    std::fs::write(&cfg, SMALL_TUYNMAN).unwrap();
    let golden = dir.path().join("golden.json");

    let missing = zcrit(
        &["tuynman", path(&cfg), "--out", path(&dir.path().join("m")), "--golden", path(&golden)],
        None,
    );
    assert_eq!(missing.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("--update-golden"));

    let first = zcrit(
        &[
            "tuynman",
            path(&cfg),
            "--out",
            path(&dir.path().join("a")),
            "--golden",
            path(&golden),
            "--update-golden",
        ],
        Some(1),
    );
    assert!(first.status.success());
    let second = zcrit(
        &["tuynman", path(&cfg), "--out", path(&dir.path().join("b")), "--golden", path(&golden)],
        Some(3),
    );
    assert!(second.status.success(), "{}", String::from_utf8_lossy(&second.stdout));
    let a = std::fs::read(dir.path().join("a/report.json")).unwrap();
    let b = std::fs::read(dir.path().join("b/report.json")).unwrap();
    assert_eq!(a, b);
    let ca = std::fs::read(dir.path().join("a/tuynman.csv")).unwrap();
    let cb = std::fs::read(dir.path().join("b/tuynman.csv")).unwrap();
    assert_eq!(ca, cb);
}

#[test]
fn golden_flags_a_quadrature_change() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("t.toml");
    std::fs::write(&cfg, SMALL_TUYNMAN).unwrap();
    let golden = dir.path().join("golden.json");
    let first = zcrit(
        &[
            "tuynman",
            path(&cfg),
            "--out",
            path(&dir.path().join("a")),
            "--golden",
            path(&golden),
            "--update-golden",
        ],
        None,
    );
    assert!(first.status.success());
    let changed = dir.path().join("t2.toml");
    std::fs::write(&changed, SMALL_TUYNMAN.replace("level = 12", "level = 5")).unwrap();
    let out = zcrit(
        &["tuynman", path(&changed), "--out", path(&dir.path().join("b")), "--golden", path(&golden)],
        None,
    );
    assert_eq!(out.status.code(), Some(1));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("drifting"), "{text}");
    assert!(text.contains("config_hash"), "{text}");
}

#[test]
fn reports_use_seventeen_significant_digits() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("t.toml");
    std::fs::write(&cfg, SMALL_TUYNMAN).unwrap();
    let o = dir.path().join("o");
    assert!(zcrit(&["tuynman", path(&cfg), "--out", path(&o)], None).status.success());
    let text = std::fs::read_to_string(o.join("report.json")).unwrap();
    let json: serde_json::Value = serde_json::from_str(&text).unwrap();
    let v = json["checks"][0]["value"].to_string();
    let mantissa = v.split('e').next().unwrap().replace(['-', '.'], "");
    assert_eq!(mantissa.len(), 17, "{v}");
    let report = Report::load(&o.join("report.json")).unwrap();
    assert_eq!(report.to_json_string(), text);

    let summary = zcrit(&["report", path(&o.join("report.json"))], None);
    assert!(summary.status.success());
    assert!(String::from_utf8_lossy(&summary.stdout).contains("PASS"));
}
