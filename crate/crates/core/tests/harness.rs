use msa_core::harness::config::{apply_override, parse_override};
use msa_core::harness::{
    run_experiment, ExperimentConfig, ProbeKind, ProbeStatus, Verdict, MANIFEST_FILE,
};
use msa_core::stats::wilson;
use msa_core::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

const RECIPE: &str = include_str!("../../../recipes/d1-strong-disorder.json");

fn recipe_value() -> Value {
    serde_json::from_str(RECIPE).unwrap()
}

fn config_field(err: Error) -> String {
    match err {
        Error::Config { field, .. } => field,
        other => panic!("expected a config error, got {other}"),
    }
}

#[test]
fn recipe_parses_and_validates() {
    let c = ExperimentConfig::from_json_str(RECIPE).unwrap();
    c.validate().unwrap();
    assert_eq!(c.probes.len(), ProbeKind::ALL.len());
    assert!(c.ledger().is_ok());
}

#[test]
fn unknown_field_is_reported_with_its_path() {
    let mut v = recipe_value();
    v["msa"]["mm"] = json!(1.0);
    let field = config_field(ExperimentConfig::from_value(v).unwrap_err());
    assert!(field.starts_with("msa"), "{field}");
}

#[test]
fn wrong_type_is_reported_with_its_path() {
    let mut v = recipe_value();
    v["reduce"]["scales"] = json!("many");
    assert_eq!(
        config_field(ExperimentConfig::from_value(v).unwrap_err()),
        "reduce.scales"
    );
}

#[test]
fn schema_version_is_checked() {
    let mut v = recipe_value();
    v["schema_version"] = json!(99);
    assert_eq!(
        config_field(ExperimentConfig::from_value(v).unwrap_err()),
        "schema_version"
    );
    let mut v = recipe_value();
    v.as_object_mut().unwrap().remove("schema_version");
    assert_eq!(
        config_field(ExperimentConfig::from_value(v).unwrap_err()),
        "schema_version"
    );
}

#[test]
fn semantic_errors_name_the_field() {
    let mut v = recipe_value();
    v["interval"] = json!({"lo": 1.0, "hi": -1.0});
    assert_eq!(
        config_field(ExperimentConfig::from_value(v).unwrap_err()),
        "interval"
    );

    let mut v = recipe_value();
    v["ledger"]["rho"] = json!(0.1);
    assert!(config_field(ExperimentConfig::from_value(v).unwrap_err()).starts_with("ledger"));
}

#[test]
fn malformed_json_is_a_config_error() {
    assert!(matches!(
        ExperimentConfig::from_json_str("{ nope"),
        Err(Error::Config { .. })
    ));
}

#[test]
fn overrides_apply_dotted_paths() {
    let c = ExperimentConfig::from_json_str(RECIPE).unwrap();
    let o = c
        .with_overrides(&[
            parse_override("seeds.samples=7").unwrap(),
            parse_override("ledger.theta=0.2").unwrap(),
            parse_override("probes=[\"reduce\"]").unwrap(),
        ])
        .unwrap();
    assert_eq!(o.seeds.samples, 7);
    assert_eq!(o.ledger.theta, Some(0.2));
    assert_eq!(o.probes, vec![ProbeKind::Reduce]);
    assert_ne!(o.hash(), c.hash());
}

#[test]
fn bad_overrides_are_rejected() {
    assert!(parse_override("no-equals").is_err());
    let mut v = recipe_value();
    assert!(apply_override(&mut v, "msa.nothing.deeper", "1").is_err());
    assert!(apply_override(&mut v, "seeds.master.x", "1").is_err());
    let c = ExperimentConfig::from_json_str(RECIPE).unwrap();
    assert!(c
        .with_overrides(&[("seeds.samples".into(), "-3".into())])
        .is_err());
}

#[test]
fn manifest_lists_every_desk_override() {
    let c = ExperimentConfig::from_json_str(RECIPE).unwrap();
    let names: Vec<String> = c.desk_overrides().into_iter().map(|o| o.name).collect();
    for expected in [
        "ledger.theta",
        "ledger.j",
        "ledger.n2",
        "keythm.c",
        "msa.fraction",
    ] {
        assert!(
            names.iter().any(|n| n == expected),
            "{expected} missing from {names:?}"
        );
    }

    // every override key must be a settable config field (unknown fields are rejected)
    for o in c.desk_overrides() {
        let back = c.with_overrides(&[(o.name.clone(), o.value.to_string())]);
        assert!(
            back.is_ok(),
            "{} is not a config field: {:?}",
            o.name,
            back.err()
        );
    }

    let dir = tempfile::tempdir().unwrap();
    let small = c
        .with_overrides(&[
            ("seeds.samples".into(), "2".into()),
            ("probes".into(), "[\"reduce\"]".into()),
        ])
        .unwrap();
    let m = run_experiment(&small, dir.path(), &["seeds.samples=2".into()]).unwrap();
    let on_disk: Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join(MANIFEST_FILE)).unwrap())
            .unwrap();
    assert_eq!(on_disk["config_sha256"], json!(small.hash()));
    assert_eq!(
        on_disk["overrides"].as_array().unwrap().len(),
        m.overrides.len()
    );
    assert_eq!(on_disk["cli_overrides"], json!(["seeds.samples=2"]));
    assert!(on_disk["ledger"]["n1"].is_u64());
}

#[test]
fn probe_failure_is_recorded_and_others_continue() {
    let c = ExperimentConfig::from_json_str(RECIPE)
        .unwrap()
        .with_overrides(&[
            ("seeds.samples".into(), "2".into()),
            ("probes".into(), "[\"reduce\", \"shell\"]".into()),
            ("reduce.scales".into(), "[3]".into()),
        ])
        .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let m = run_experiment(&c, dir.path(), &[]).unwrap();
    assert!(m.failed());
    assert_eq!(m.probes[0].status, ProbeStatus::Error);
    assert!(m.probes[0].message.is_some());
    assert_eq!(m.probes[1].status, ProbeStatus::Ok);
    assert!(dir.path().join("shell.csv").exists());
    assert!(!dir.path().join("reduce.csv").exists());
}

#[test]
fn csv_headers_are_stable() {
    let c = ExperimentConfig::from_json_str(RECIPE)
        .unwrap()
        .with_overrides(&[("seeds.samples".into(), "2".into())])
        .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let m = run_experiment(&c, dir.path(), &[]).unwrap();
    assert!(!m.failed(), "{:?}", m.probes);
    for kind in ProbeKind::ALL {
        let text =
            std::fs::read_to_string(dir.path().join(format!("{}.csv", kind.name()))).unwrap();
        let header = text.lines().next().unwrap();
        assert!(
            header.starts_with("seed") || header.contains(','),
            "{kind:?}: {header}"
        );
        let summary: Value = serde_json::from_str(
            &std::fs::read_to_string(dir.path().join(format!("{}.summary.json", kind.name())))
                .unwrap(),
        )
        .unwrap();
        assert!(summary.is_object());
    }
}

/// Synthetic certification: draw Bernoulli streams with a known success
/// probability and check how often the Wilson verdict points the wrong way.
#[test]
fn certificate_calibration() {
    let mut rng = ChaCha8Rng::seed_from_u64(4242);
    let target = 0.9;
    let n = 400;
    for (truth, wrong) in [
        (0.93, Verdict::Fail),
        (0.87, Verdict::Pass),
        (0.9, Verdict::Pass),
        (0.9, Verdict::Fail),
    ] {
        let mut errors = 0;
        for _ in 0..1000 {
            let k = (0..n).filter(|_| rng.random_bool(truth)).count();
            if Verdict::from_interval(&wilson(k, n, 0.95), target) == wrong {
                errors += 1;
            }
        }
        assert!(
            errors <= 50,
            "truth {truth}: {errors}/1000 verdicts read {wrong:?}"
        );
    }
}
