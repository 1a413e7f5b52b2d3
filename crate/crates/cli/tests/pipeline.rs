//! End-to-end pipeline tests on the bundled nine-node demonstration
//! dataset: full command chain, byte-level determinism, artifact schemas,
//! and config round-tripping.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use mfa_cli::commands::{self, InferSelection};
use mfa_cli::config;

fn toy_config_path() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data/toy/config.toml")
}

fn load_toy(out: &Path) -> config::RunConfig {
    let mut cfg = config::load(&toy_config_path()).unwrap();
    cfg.out_dir = out.to_path_buf();
    cfg
}

fn run_pipeline(out: &Path) {
    let cfg = load_toy(out);
    commands::cmd_enumerate(&cfg).unwrap();
    commands::cmd_infer(&cfg, InferSelection::All, Some(2)).unwrap();
    commands::cmd_select(&cfg).unwrap();
    commands::cmd_average(&cfg).unwrap();
    commands::cmd_impact(&cfg).unwrap();
    commands::cmd_decide(&cfg).unwrap();
}

fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut map = BTreeMap::new();
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.is_file() {
            map.insert(
                path.file_name().unwrap().to_string_lossy().into_owned(),
                std::fs::read(&path).unwrap(),
            );
        }
    }
    map
}

#[test]
fn toy_pipeline_end_to_end_and_byte_reproducible() {
    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    run_pipeline(dir_a.path());
    run_pipeline(dir_b.path());

    let a = snapshot(dir_a.path());
    let b = snapshot(dir_b.path());
    assert_eq!(
        a.keys().collect::<Vec<_>>(),
        b.keys().collect::<Vec<_>>(),
        "artifact sets differ"
    );
    for (name, bytes) in &a {
        assert_eq!(bytes, &b[name], "artifact {name} differs between reruns");
    }

    // The expected artifact set exists.
    for name in [
        "structures.csv",
        "ensemble_0.csv",
        "ensemble_0.json",
        "ensemble_1.csv",
        "ensemble_1.json",
        "posterior.csv",
        "ratios.csv",
        "qoi_summary.csv",
        "sankey.json",
        "ei_total.csv",
        "eii_n4.csv",
        "eii_n5.csv",
        "eii_n9.csv",
        "decision.csv",
        "decision.txt",
    ] {
        assert!(a.contains_key(name), "missing artifact {name}");
    }
}

#[test]
fn toy_selection_favors_structure_without_passthrough() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = load_toy(dir.path());
    commands::cmd_infer(&cfg, InferSelection::All, Some(2)).unwrap();
    commands::cmd_select(&cfg).unwrap();
    let rows = mfa_cli::artifacts::read_posterior(dir.path()).unwrap();
    assert_eq!(rows.len(), 2);
    let p0 = rows.iter().find(|r| r.code == "0").unwrap().posterior;
    let p1 = rows.iter().find(|r| r.code == "1").unwrap().posterior;
    assert!(p0 > 0.99, "synthetic data should pick structure 0, got {p0}");
    assert!((p0 + p1 - 1.0).abs() < 1e-10);

    // Decision options cover exactly the three consumption nodes.
    commands::cmd_average(&cfg).unwrap();
    commands::cmd_impact(&cfg).unwrap();
    commands::cmd_decide(&cfg).unwrap();
    let decision = std::fs::read_to_string(dir.path().join("decision.csv")).unwrap();
    for option in ["Node 4", "Node 5", "Node 9"] {
        assert!(decision.contains(option), "missing option {option}");
    }
}

#[test]
fn emitted_csvs_parse_back_under_their_schemas() {
    let dir = tempfile::tempdir().unwrap();
    run_pipeline(dir.path());
    for entry in std::fs::read_dir(dir.path()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().map(|e| e == "csv").unwrap_or(false) {
            let mut reader = csv::Reader::from_path(&path).unwrap();
            let headers = reader.headers().unwrap().clone();
            assert!(!headers.is_empty());
            let mut rows = 0;
            for row in reader.records() {
                let row = row.unwrap();
                assert_eq!(row.len(), headers.len(), "ragged row in {}", path.display());
                rows += 1;
            }
            assert!(rows > 0, "{} is empty", path.display());
        }
    }
    // The Sankey document deserializes and validates.
    let sankey: mfa_cli::sankey::SankeyDocument =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("sankey.json")).unwrap())
            .unwrap();
    sankey.validate().unwrap();
}

#[test]
fn config_round_trips_through_toml() {
    let file = config::ConfigFile::from_path(&toy_config_path()).unwrap();
    let serialized = toml::to_string(&file).unwrap();
    let back: config::ConfigFile = toml::from_str(&serialized).unwrap();
    assert_eq!(file, back);
}

#[test]
fn config_errors_are_collected_not_first_only() {
    let dir = tempfile::tempdir().unwrap();
    let bad = r#"
[run]
seed = 1

[data]
records = "records.csv"
emissions = "emissions.csv"

[inputs]
nodes = ["ghost"]

[[nodes]]
id = "a"
name = "A"
class = "proces"

[[edges]]
from = "a"
to = "nowhere"

[[targeted]]
from = "a"
to = "also_nowhere"
p_exist = 1.5
"#;
    std::fs::write(dir.path().join("config.toml"), bad).unwrap();
    std::fs::write(dir.path().join("records.csv"), "description,type,value,source\n").unwrap();
    std::fs::write(dir.path().join("emissions.csv"), "node,intensity,note\n").unwrap();
    let Err(err) = config::load(&dir.path().join("config.toml")) else {
        panic!("invalid config must not load");
    };
    let text = err.to_string();
    for needle in ["proces", "nowhere", "also_nowhere", "p_exist", "ghost"] {
        assert!(text.contains(needle), "error text should mention {needle}: {text}");
    }
}

#[test]
fn missing_upstream_artifacts_name_the_producer() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = load_toy(dir.path());
    let err = commands::cmd_select(&cfg).unwrap_err();
    assert!(matches!(err, mfa_cli::CliError::MissingArtifact(_)));
    assert!(err.to_string().contains("mfa infer"), "{err}");
    assert_eq!(err.exit_code() as u8, 4);

    let err = commands::cmd_decide(&cfg).unwrap_err();
    assert!(err.to_string().contains("mfa impact"), "{err}");
}

#[test]
fn single_structure_infer_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = load_toy(dir.path());
    commands::cmd_infer(&cfg, InferSelection::One("0".into()), None).unwrap();
    let first = std::fs::read(dir.path().join("ensemble_0.csv")).unwrap();
    commands::cmd_infer(&cfg, InferSelection::One("0".into()), None).unwrap();
    let second = std::fs::read(dir.path().join("ensemble_0.csv")).unwrap();
    assert_eq!(first, second);
}
