//! End-to-end tests of the command-line interface: exit codes, seeding, and
//! the stats round trip.

use std::path::Path;
use std::process::{Command, Output};

fn isca2g(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_isca2g"))
        .args(args)
        .current_dir(dir)
        .output()
        .unwrap()
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("config.json");
    std::fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

const SMALL: &str = r#"{
  "environment": "Suburban",
  "realizations": 3,
  "abs_height_m": [120.0, 120.0],
  "master_seed": 11
}"#;

#[test]
fn unknown_preset_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), r#"{"environment": "Atlantis"}"#);
    let out = isca2g(&["simulate", "--config", &config], dir.path());
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn malformed_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "{ not json");
    let out = isca2g(&["simulate", "--config", &config], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unknown_config_field_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), r#"{"environment": "Suburban", "warp_factor": 9}"#);
    let out = isca2g(&["simulate", "--config", &config], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_results_dir_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = isca2g(&["stats", "--results", "does-not-exist"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn malformed_layout_geojson_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("layout.geojson"), "{\"type\": \"Banana\"}").unwrap();
    let out = isca2g(
        &["losmap", "--layout", "layout.geojson", "--abs-x", "500", "--abs-y", "500"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn validate_clean_exits_0_and_injected_flip_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let clean = isca2g(
        &["validate", "--scenes", "2", "--samples-per-meter", "1"],
        dir.path(),
    );
    assert_eq!(clean.status.code(), Some(0), "{}", String::from_utf8_lossy(&clean.stderr));
    let stdout = String::from_utf8_lossy(&clean.stdout);
    assert!(stdout.contains("mismatches 0"), "{stdout}");

    let flipped = isca2g(
        &["validate", "--scenes", "2", "--samples-per-meter", "1", "--inject-flip"],
        dir.path(),
    );
    assert_eq!(flipped.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&flipped.stdout).contains("mismatches 2"));
}

#[test]
fn same_seed_is_byte_identical_and_seed_override_changes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), SMALL);
    for out_dir in ["a", "b"] {
        let out = isca2g(&["simulate", "--config", &config, "--out", out_dir], dir.path());
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let a = std::fs::read(dir.path().join("a/summary.json")).unwrap();
    let b = std::fs::read(dir.path().join("b/summary.json")).unwrap();
    assert_eq!(a, b);

    let out = isca2g(
        &["simulate", "--config", &config, "--out", "c", "--seed", "99"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0));
    let c = std::fs::read(dir.path().join("c/summary.json")).unwrap();
    assert_ne!(a, c);
}

#[test]
fn stats_round_trip_reproduces_summary() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), SMALL);
    let out = isca2g(
        &["simulate", "--config", &config, "--out", "run", "--verbose"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let out = isca2g(&["stats", "--results", "run", "--out", "re"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let original = std::fs::read(dir.path().join("run/summary.json")).unwrap();
    let recomputed = std::fs::read(dir.path().join("re/summary.json")).unwrap();
    assert_eq!(original, recomputed);
}

#[test]
fn partial_results_warn_but_summarize() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), SMALL);
    let out = isca2g(
        &["simulate", "--config", &config, "--out", "run", "--verbose"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0));
    let jsonl = dir.path().join("run/realizations.jsonl");
    let text = std::fs::read_to_string(&jsonl).unwrap();
    let first: String = text.lines().take(2).collect::<Vec<_>>().join("\n");
    std::fs::write(&jsonl, first).unwrap();
    let out = isca2g(&["stats", "--results", "run", "--out", "re"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stderr).contains("2 of 3 realizations"));
}

#[test]
fn generate_env_then_losmap_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let out = isca2g(&["generate-env", "--out", "env"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let out = isca2g(
        &[
            "losmap",
            "--layout",
            "env/layout.geojson",
            "--abs-x",
            "500",
            "--abs-y",
            "500",
            "--abs-height",
            "120",
            "--out",
            "map",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("P_LOS"), "{stdout}");
    assert!(dir.path().join("map/losmap.geojson").exists());
}

#[test]
fn single_realization_produces_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), SMALL);
    let out = isca2g(
        &["simulate", "--config", &config, "--realizations", "1", "--out", "one"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["summary.json", "cdf_nlos.csv", "cdf_los.csv", "cdf_channel.csv", "cdf_outage.csv"] {
        assert!(dir.path().join("one").join(f).exists(), "{f} missing");
    }
}

#[test]
fn radiomap_writes_raster() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), SMALL);
    let out = isca2g(
        &[
            "radiomap",
            "--config",
            &config,
            "--abs-x",
            "500",
            "--abs-y",
            "500",
            "--spacing",
            "5",
            "--out",
            "rm",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("rm/radiomap.csv")).unwrap();
    assert!(csv.lines().count() > 10);
}
