//! File-format and CLI contracts: the JSON map catalogue, experiment configs,
//! CSV shapes, and the end-to-end reproducibility of the binary.

use evlab::cli::{ExperimentConfig, ExperimentKind};
use evlab::maps::{doubling, Dynamics, MapSpec};
use std::path::Path;
use std::process::Command;

#[test]
fn map_catalogue_json_round_trips() {
    let spec = MapSpec::of(&doubling());
    let text = serde_json::to_string(&spec).unwrap();
    assert!(text.contains(r#""type":"piecewise_affine""#), "{text}");
    assert!(text.contains(r#""slope":"2""#), "{text}");
    let back: MapSpec = serde_json::from_str(&text).unwrap();
    let Dynamics::Piecewise(map) = back.build().unwrap() else {
        panic!("wrong dynamics");
    };
    assert_eq!(map.step(0.3).unwrap().0, doubling().step(0.3).unwrap().0);
}

#[test]
fn external_map_documents_parse() {
    // rationals as strings "p/q", the documented wire format
    let text = r#"{
        "type": "piecewise_affine",
        "branches": [
            {"a": "0", "b": "1/2", "slope": "2", "intercept": "0"},
            {"a": "1/2", "b": "1", "slope": "2", "intercept": "-1"}
        ],
        "topology": "circle"
    }"#;
    let spec: MapSpec = serde_json::from_str(text).unwrap();
    assert!(matches!(spec.build().unwrap(), Dynamics::Piecewise(_)));

    let torus = r#"{"type": "torus_linear", "matrix": [[2, 1], [1, 1]]}"#;
    let spec: MapSpec = serde_json::from_str(torus).unwrap();
    assert!(matches!(spec.build().unwrap(), Dynamics::Torus(_)));
}

fn small_config(kind: &str) -> String {
    format!(
        r#"{{
        "kind": "{kind}",
        "map": {{
            "type": "piecewise_affine",
            "branches": [
                {{"a": "0", "b": "1/2", "slope": "2", "intercept": "0"}},
                {{"a": "1/2", "b": "1", "slope": "2", "intercept": "-1"}}
            ],
            "topology": "circle",
            "name": "doubling"
        }},
        "zeta": "1/3",
        "tau": 2.0,
        "n": 2000,
        "trials": 400,
        "seed": 11
    }}"#
    )
}

#[test]
fn config_defaults_and_required_fields() {
    let cfg = ExperimentConfig::from_json(&small_config("ei")).unwrap();
    assert_eq!(cfg.kind, ExperimentKind::Ei);
    assert_eq!(cfg.options.kmax, 12);
    assert_eq!(cfg.options.ulam_k, vec![1024, 4096, 16384]);
    // seed is mandatory: no wall-clock defaults anywhere
    let no_seed = small_config("ei").replace(r#""seed": 11"#, r#""seed2": 11"#);
    assert!(ExperimentConfig::from_json(&no_seed).is_err());
}

fn run_cli(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_evlab"))
        .args(args)
        .output()
        .expect("binary runs")
}

#[test]
fn cli_ei_run_is_reproducible_byte_for_byte() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("cfg.json");
    std::fs::write(&cfg_path, small_config("ei")).unwrap();
    let out1 = dir.path().join("a");
    let out2 = dir.path().join("b");
    for out in [&out1, &out2] {
        let r = run_cli(&[
            "ei",
            "--config",
            cfg_path.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(r.status.success(), "stderr: {}", String::from_utf8_lossy(&r.stderr));
    }
    let strip = |p: &Path| {
        std::fs::read_to_string(p.join("report.json"))
            .unwrap()
            .lines()
            .filter(|l| !l.contains("wall_ms"))
            .collect::<Vec<_>>()
            .join("\n")
    };
    assert_eq!(strip(&out1), strip(&out2));
    assert_eq!(
        std::fs::read(out1.join("estimates.csv")).unwrap(),
        std::fs::read(out2.join("estimates.csv")).unwrap()
    );
    // headered CSV with the documented columns
    let csv = std::fs::read_to_string(out1.join("estimates.csv")).unwrap();
    assert!(csv.starts_with("estimator,value,se\n"), "{csv}");
}

#[test]
fn cli_seed_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("cfg.json");
    std::fs::write(&cfg_path, small_config("ei")).unwrap();
    let out1 = dir.path().join("a");
    let out2 = dir.path().join("b");
    run_cli(&["ei", "--config", cfg_path.to_str().unwrap(), "--out", out1.to_str().unwrap()]);
    run_cli(&[
        "ei",
        "--config",
        cfg_path.to_str().unwrap(),
        "--seed",
        "12",
        "--out",
        out2.to_str().unwrap(),
    ]);
    let hash = |p: &Path| {
        let v: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(p.join("report.json")).unwrap()).unwrap();
        v["config_hash"].as_str().unwrap().to_string()
    };
    assert_ne!(hash(&out1), hash(&out2));
}

#[test]
fn cli_rejects_bad_configs_with_a_path() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("cfg.json");
    std::fs::write(&cfg_path, small_config("ei").replace(r#""1/3""#, r#""third""#)).unwrap();
    let r = run_cli(&["ei", "--config", cfg_path.to_str().unwrap()]);
    assert_eq!(r.status.code(), Some(2));
    let err = String::from_utf8_lossy(&r.stderr);
    assert!(err.contains("config.zeta"), "{err}");
}

#[test]
fn cli_classify_prints_the_exact_law() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("cfg.json");
    // the boundary-return map's discontinuity target
    let cfg = r#"{
        "kind": "classify",
        "map": {
            "type": "piecewise_affine",
            "branches": [
                {"a": "0", "b": "1/2", "slope": "-2", "intercept": "1"},
                {"a": "1/2", "b": "5/6", "slope": "2", "intercept": "-2/3"},
                {"a": "5/6", "b": "1", "slope": "2", "intercept": "-5/3"}
            ],
            "topology": "circle"
        },
        "zeta": "0",
        "seed": 0
    }"#;
    std::fs::write(&cfg_path, cfg).unwrap();
    let out = dir.path().join("o");
    let r = run_cli(&["classify", "--config", cfg_path.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(r.status.success());
    let stdout = String::from_utf8_lossy(&r.stdout);
    assert!(stdout.contains("SinglyReturning"), "{stdout}");
    assert!(stdout.contains("3/4"), "{stdout}");
}

#[test]
fn cli_dichotomy_writes_the_three_row_table() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("cfg.json");
    let cfg = small_config("dichotomy").replace(r#""zeta": "1/3","#, r#""zetas": ["0", "1/3"],"#);
    std::fs::write(&cfg_path, cfg).unwrap();
    let out = dir.path().join("o");
    let r = run_cli(&["dichotomy", "--config", cfg_path.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(r.status.success(), "stderr: {}", String::from_utf8_lossy(&r.stderr));
    let csv = std::fs::read_to_string(out.join("dichotomy.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "zeta,theta_logratio,theta_annulus,theta_cluster,theory");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("0,"));
    assert!(lines[2].starts_with("1/3,"));
}
