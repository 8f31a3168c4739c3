use std::path::Path;
use std::process::{Command, Output};

fn msa(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_msa"))
        .args(args)
        .output()
        .unwrap()
}

fn recipe() -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../recipes/d1-strong-disorder.json")
        .to_string_lossy()
        .into_owned()
}

#[test]
fn probe_subcommand_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = msa(&["reduce", "--samples", "3", "--out", out]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    assert!(dir.path().join("reduce.csv").exists());
    assert!(dir.path().join("reduce.summary.json").exists());
    let manifest = std::fs::read_to_string(dir.path().join("manifest.json")).unwrap();
    assert!(manifest.contains("\"seeds.samples=3\""));
}

#[test]
fn run_with_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = msa(&[
        "run",
        &recipe(),
        "--seed",
        "11",
        "--samples",
        "2",
        "--override",
        "probes=[\"shell\",\"certify\"]",
        "--out",
        out,
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    assert!(dir.path().join("shell.csv").exists());
    assert!(dir.path().join("certify.csv").exists());
    assert!(!dir.path().join("dynamics.csv").exists());
}

#[test]
fn config_errors_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\"schema_version\": 1, \"name\": 3}").unwrap();
    for args in [
        vec!["run", bad.to_str().unwrap(), "--out", out],
        vec!["run", "/nonexistent/config.json", "--out", out],
        vec!["reduce", "--override", "msa.bogus=1", "--out", out],
        vec!["reduce", "--override", "novalue", "--out", out],
    ] {
        let o = msa(&args);
        assert_eq!(
            o.status.code(),
            Some(2),
            "{args:?}: {}",
            String::from_utf8_lossy(&o.stderr)
        );
        assert!(!o.stderr.is_empty());
    }
}

#[test]
fn probe_errors_exit_with_3() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = msa(&[
        "reduce",
        "--samples",
        "2",
        "--override",
        "reduce.scales=[3]",
        "--out",
        out,
    ]);
    assert_eq!(
        o.status.code(),
        Some(3),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    assert!(dir.path().join("manifest.json").exists());
}

#[test]
fn repeated_runs_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let o = msa(&[
            "shell",
            "--samples",
            "4",
            "--out",
            d.path().to_str().unwrap(),
        ]);
        assert_eq!(o.status.code(), Some(0));
    }
    for f in ["shell.csv", "shell.summary.json"] {
        assert_eq!(
            std::fs::read(a.path().join(f)).unwrap(),
            std::fs::read(b.path().join(f)).unwrap()
        );
    }
}
