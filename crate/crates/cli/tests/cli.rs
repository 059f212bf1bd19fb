//! The `isogloss` binary: outputs on disk and exit codes.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn isogloss(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_isogloss"))
        .args(args)
        .current_dir(cwd)
        .env_remove("ISOGLOSS_OUT")
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn synth_then_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let o = isogloss(
        &[
            "synth",
            "--kind",
            "planar",
            "--n",
            "120",
            "--seed",
            "4",
            "--output",
            "planar.csv",
        ],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).contains("value_policy = fraction"));

    let o = isogloss(
        &[
            "pipeline",
            "--input",
            "planar.csv",
            "--out",
            "out",
            "--set",
            "grid=80",
            "--set",
            "n_paths=10",
            "--set",
            "value_policy=fraction",
        ],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let out = dir.path().join("out");
    for f in [
        "config.txt",
        "dataset.json",
        "localities.geojson",
        "comparison.csv",
        "comparison.txt",
        "report.json",
    ] {
        assert!(out.join(f).is_file(), "{f}");
    }
    for f in ["contours.geojson", "paths_n10.geojson", "front_n10.json"] {
        assert!(out.join("synthetic").join(f).is_file(), "{f}");
    }
    assert!(!out.join("error.json").exists());
    let table = String::from_utf8(o.stdout).unwrap();
    assert!(table.contains("synthetic"), "{table}");

    let front = json(&out.join("synthetic/front_n10.json"));
    let w = front["linear"]["derived"]["w_fit"].as_f64().unwrap();
    assert!((w - 1.0 / 0.07).abs() < 0.05 / 0.07, "{w}");
}

#[test]
fn unreadable_input_is_an_ingest_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = isogloss(
        &["pipeline", "--input", "missing.csv", "--out", "out"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(2));
    let err = json(&dir.path().join("out/error.json"));
    assert_eq!(err["stage"], "ingest");
    assert_eq!(err["kind"], "input");
    assert!(stderr(&o).contains("missing.csv"));
}

#[test]
fn malformed_table_is_an_ingest_error() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("bad.csv"),
        "id,lon,lat,f\nA,11.0,46.0,0.5\nB,not-a-number,46.1,1\n",
    )
    .unwrap();
    let o = isogloss(
        &["pipeline", "--input", "bad.csv", "--out", "out"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert_eq!(json(&dir.path().join("out/error.json"))["stage"], "ingest");
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let o = isogloss(&["pipeline", "--set", "bogus=1"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("bogus"));
    let o = isogloss(&["pipeline", "--out", "out"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(json(&dir.path().join("out/error.json"))["stage"], "config");
    let o = isogloss(&["pipeline", "--no-such-flag"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn empty_scenario_is_nothing_to_simulate() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("empty.toml"), "# nothing here\n").unwrap();
    let o = isogloss(&["simulate", "empty.toml", "--out", "run"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("nothing to simulate"), "{}", stderr(&o));
}

#[test]
fn small_scenario_writes_frames() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = r#"
        nx = 10
        ny = 8
        t_end = 4.0
        snapshot_times = [0.0, 2.0, 4.0]
        bbox = { xmin = 0, ymin = 0, xmax = 10, ymax = 8 }
        diffusivity = { kind = "constant", eta = 1.0 }
        tidal = { edges = ["north"] }
    "#;
    fs::write(dir.path().join("tiny.toml"), scenario).unwrap();
    let o = isogloss(
        &["--sequential", "simulate", "tiny.toml", "--out", "run"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let m = json(&dir.path().join("run/manifest.json"));
    let frames = m["frames"].as_array().unwrap();
    assert_eq!(frames.len(), 3);
    for f in frames {
        let bytes = fs::read(dir.path().join("run").join(f["file"].as_str().unwrap())).unwrap();
        assert_eq!(bytes.len(), 10 * 8 * 4);
    }
}

#[test]
fn evolve_writes_profiles() {
    let dir = tempfile::tempdir().unwrap();
    let o = isogloss(
        &[
            "evolve",
            "--model",
            "erfc",
            "--times",
            "250,500,1000",
            "--lambda",
            "50",
            "--law",
            "linear",
            "--out",
            "out",
        ],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(dir.path().join("out/evolve/profiles.csv")).unwrap();
    let mut lines = csv.lines();
    let header = lines.next().unwrap();
    assert_eq!(header, "t,s,g");
    assert_eq!(lines.count(), 3 * 401);
    let j = json(&dir.path().join("out/evolve/profiles.json"));
    let crossings: Vec<f64> = j["profiles"]
        .as_array()
        .unwrap()
        .iter()
        .map(|p| p["half_crossing"].as_f64().unwrap())
        .collect();
    // Linear convection moves the front by λ over τ.
    assert!(
        (crossings[2] - crossings[0] - 37.5).abs() < 0.05,
        "{crossings:?}"
    );

    let o = isogloss(
        &["evolve", "--model", "erfc", "--times", "1", "--law", "warp"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn export_writes_the_raster() {
    let dir = tempfile::tempdir().unwrap();
    let o = isogloss(
        &["synth", "--kind", "erfc", "--n", "80", "--output", "e.csv"],
        dir.path(),
    );
    assert!(o.status.success());
    let o = isogloss(
        &[
            "export",
            "--input",
            "e.csv",
            "--out",
            "out",
            "--feature",
            "synthetic",
            "--set",
            "grid=30",
            "--set",
            "value_policy=fraction",
        ],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let d = dir.path().join("out/export/synthetic");
    let meta = json(&d.join("surface.json"));
    assert_eq!(
        (meta["nx"].as_u64(), meta["ny"].as_u64()),
        (Some(30), Some(30))
    );
    assert_eq!(fs::read(d.join("surface.bin")).unwrap().len(), 30 * 30 * 4);
    assert!(d.join("contours.geojson").is_file());

    let o = isogloss(
        &[
            "export",
            "--input",
            "e.csv",
            "--out",
            "out",
            "--feature",
            "nope",
            "--set",
            "value_policy=fraction",
        ],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(2));
}
