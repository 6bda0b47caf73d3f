//! End-to-end checks of the command bodies and the binary's exit codes:
//! bundles land on disk complete, the config echo re-parses and re-runs
//! identically, errors map to their documented codes, and the bundled
//! example configs all run clean.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use observer_cli::{
    cmd_check_geometry, cmd_gain, cmd_lemmas, cmd_simulate, CliError, GeometryParams, LemmaParams,
    ScenarioConfig,
};

const SHORT_RUN: &str = r#"{
  "leader": "vdp",
  "leaderInit": [1.0, 0.5],
  "graph": { "nodes": 3, "arcs": ["1 -> 2", "2 -> 3", "3 -> 1"], "pinned": [1] },
  "observerInit": { "radius": 1.0 },
  "gain": { "c": 10.0 },
  "dt": 0.001,
  "horizon": 2.0,
  "seed": 21,
  "mode": "observer-only"
}"#;

fn write_json(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

fn bundled_config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)
}

#[test]
fn simulate_writes_the_advertised_bundle() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_json(dir.path(), "run.json", SHORT_RUN);
    let out = dir.path().join("out");
    let manifest = cmd_simulate(&config, &out).unwrap();

    assert!(!manifest.diverged);
    assert_eq!(manifest.command, "simulate");
    assert!(manifest.files.contains(&"manifest.json".to_string()));
    for name in &manifest.files {
        assert!(out.join(name).exists(), "listed file {name} is missing");
    }

    let metrics = fs::read_to_string(out.join("metrics.txt")).unwrap();
    assert!(metrics.contains("mode=observer-only"));
    assert!(metrics.contains("initial_error_norm="));
    assert!(metrics.contains("decay_rate="));

    let plot = fs::read_to_string(out.join("plot.gp")).unwrap();
    assert!(plot.contains("trajectory.csv"));
    assert!(plot.contains("column(\"e_norm[0]\")"));
    assert!(plot.contains("column(\"e_norm[2]\")"));
}

#[test]
fn config_echo_reparses_and_reruns_identically() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_json(dir.path(), "run.json", SHORT_RUN);
    let out1 = dir.path().join("first");
    let manifest = cmd_simulate(&config, &out1).unwrap();

    let parsed: ScenarioConfig = serde_json::from_str(SHORT_RUN).unwrap();
    let echoed: ScenarioConfig = serde_json::from_value(manifest.config_echo.clone()).unwrap();
    assert_eq!(parsed, echoed, "echo must re-parse to the same config");

    let echo_text = serde_json::to_string(&manifest.config_echo).unwrap();
    let config2 = write_json(dir.path(), "echo.json", &echo_text);
    let out2 = dir.path().join("second");
    cmd_simulate(&config2, &out2).unwrap();

    let a = fs::read(out1.join("trajectory.csv")).unwrap();
    let b = fs::read(out2.join("trajectory.csv")).unwrap();
    assert_eq!(a, b, "the echoed config must reproduce the run byte for byte");
}

#[test]
fn mistakes_map_to_the_documented_buckets() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");

    let unknown = SHORT_RUN.replace("\"vdp\"", "\"volterra\"");
    let path = write_json(dir.path(), "unknown.json", &unknown);
    let err = cmd_simulate(&path, &out).unwrap_err();
    assert!(matches!(err, CliError::Config(_)), "{err}");
    assert_eq!(err.exit_code(), 2);

    let unreachable = SHORT_RUN.replace(
        r#""arcs": ["1 -> 2", "2 -> 3", "3 -> 1"]"#,
        r#""arcs": ["1 -> 2"]"#,
    );
    let path = write_json(dir.path(), "unreachable.json", &unreachable);
    let err = cmd_simulate(&path, &out).unwrap_err();
    assert!(
        err.to_string().contains("Assumption 2"),
        "unreachable graphs must carry the reachability diagnostic, got: {err}"
    );
    assert_eq!(err.exit_code(), 2);

    let contradictory = SHORT_RUN.replace(
        r#""gain": { "c": 10.0 }"#,
        r#""gain": { "c": 10.0, "cMultiplier": 2.0 }"#,
    );
    let path = write_json(dir.path(), "contradictory.json", &contradictory);
    let err = cmd_simulate(&path, &out).unwrap_err();
    assert_eq!(err.exit_code(), 2);

    let err = cmd_simulate(&dir.path().join("missing.json"), &out).unwrap_err();
    assert!(matches!(err, CliError::Io(_)), "{err}");
    assert_eq!(err.exit_code(), 4);

    let bad_arc = SHORT_RUN.replace("\"3 -> 1\"", "\"3 to 1\"");
    let path = write_json(dir.path(), "badarc.json", &bad_arc);
    let err = cmd_simulate(&path, &out).unwrap_err();
    assert!(err.to_string().contains("must look like"), "{err}");
}

#[test]
fn lemma_bundles_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let params = LemmaParams {
        trials: 64,
        dim: 4,
        mu: 2.0,
        seed: 9,
        jobs: None,
    };
    let out1 = dir.path().join("a");
    let out2 = dir.path().join("b");
    let manifest = cmd_lemmas(&params, &out1).unwrap();
    cmd_lemmas(&params, &out2).unwrap();

    for name in &manifest.files {
        assert!(out1.join(name).exists(), "listed file {name} is missing");
        if name.ends_with(".csv") {
            let a = fs::read(out1.join(name)).unwrap();
            let b = fs::read(out2.join(name)).unwrap();
            assert_eq!(a, b, "{name} must be byte-identical across reruns");
        }
    }

    let summary = fs::read_to_string(out1.join("summary.txt")).unwrap();
    assert!(summary.contains("product_bound_corrected_violations=0"));
    assert!(summary.contains("lyapunov_abscissa_violations=0"));
    assert!(summary.contains("lyapunov_symmetric_violations=0"));

    let serial = LemmaParams {
        jobs: Some(1),
        ..params
    };
    let out3 = dir.path().join("c");
    cmd_lemmas(&serial, &out3).unwrap();
    let a = fs::read(out1.join("product_bound.csv")).unwrap();
    let c = fs::read(out3.join("product_bound.csv")).unwrap();
    assert_eq!(a, c, "the thread cap must not move the records");
}

#[test]
fn geometry_reports_pass_and_scaled_tau_fails() {
    let dir = tempfile::tempdir().unwrap();
    for (model, samples) in [("vdp", 6), ("esslm", 2), ("example1", 3)] {
        let params = GeometryParams {
            model: model.into(),
            tau_scale: 1.0,
            samples: Some(samples),
            tol: 1e-5,
            seed: 0,
        };
        let out = dir.path().join(model);
        cmd_check_geometry(&params, &out).unwrap();
        let report = fs::read_to_string(out.join("report.txt")).unwrap();
        assert!(report.contains("overall=pass"), "{model}: {report}");
    }

    let params = GeometryParams {
        model: "vdp".into(),
        tau_scale: 2.0,
        samples: Some(4),
        tol: 1e-5,
        seed: 0,
    };
    let out = dir.path().join("scaled");
    let err = cmd_check_geometry(&params, &out).unwrap_err();
    assert_eq!(err.exit_code(), 3);
    let report = fs::read_to_string(out.join("report.txt")).unwrap();
    assert!(report.contains("normalization=fail"), "{report}");
    assert!(report.contains("observability=pass"), "{report}");
}

#[test]
fn gain_report_certifies_the_bundled_ring() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("gain");
    let manifest = cmd_gain(&bundled_config("gain_vdp.json"), &out).unwrap();
    for name in &manifest.files {
        assert!(out.join(name).exists(), "listed file {name} is missing");
    }
    let report = fs::read_to_string(out.join("gain.txt")).unwrap();
    assert!(report.contains("network_hurwitz=true"), "{report}");
    assert!(report.contains("certificate_sufficient=true"), "{report}");
    assert!(report.contains("f_row_2="), "{report}");
}

#[test]
fn bundled_scenarios_run_clean() {
    let dir = tempfile::tempdir().unwrap();
    for name in [
        "vdp_observer.json",
        "vdp_mixed.json",
        "esslm_observer.json",
        "esslm_tracking.json",
        "example1_baseline.json",
    ] {
        let out = dir.path().join(name.trim_end_matches(".json"));
        let manifest = cmd_simulate(&bundled_config(name), &out)
            .unwrap_or_else(|e| panic!("{name} failed: {e}"));
        assert!(!manifest.diverged, "{name} diverged");
    }
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_observer-cli"))
}

#[test]
fn binary_exit_codes_follow_the_contract() {
    let dir = tempfile::tempdir().unwrap();

    let ok = bin()
        .args(["lemmas", "--trials", "8", "--dim", "3"])
        .arg("--out")
        .arg(dir.path().join("ok"))
        .output()
        .unwrap();
    assert_eq!(ok.status.code(), Some(0), "{ok:?}");

    let bad = write_json(dir.path(), "bad.json", "{ not json");
    let parse = bin()
        .arg("simulate")
        .arg("--config")
        .arg(&bad)
        .arg("--out")
        .arg(dir.path().join("x"))
        .output()
        .unwrap();
    assert_eq!(parse.status.code(), Some(2), "{parse:?}");

    let missing = bin()
        .arg("simulate")
        .arg("--config")
        .arg(dir.path().join("absent.json"))
        .arg("--out")
        .arg(dir.path().join("x"))
        .output()
        .unwrap();
    assert_eq!(missing.status.code(), Some(4), "{missing:?}");

    let unreachable = write_json(
        dir.path(),
        "unreachable.json",
        &SHORT_RUN.replace(
            r#""arcs": ["1 -> 2", "2 -> 3", "3 -> 1"]"#,
            r#""arcs": ["1 -> 2"]"#,
        ),
    );
    let graph = bin()
        .arg("simulate")
        .arg("--config")
        .arg(&unreachable)
        .arg("--out")
        .arg(dir.path().join("x"))
        .output()
        .unwrap();
    assert_eq!(graph.status.code(), Some(2), "{graph:?}");
    let stderr = String::from_utf8_lossy(&graph.stderr);
    assert!(stderr.contains("Assumption 2"), "{stderr}");

    let diverging = write_json(
        dir.path(),
        "diverging.json",
        r#"{
          "leader": "vdp",
          "leaderInit": [1.0, 0.5],
          "graph": { "nodes": 1, "arcs": [], "pinned": [1] },
          "followers": [
            { "model": "zero_dyn", "init": [0.0, 30.0, 0.0], "poles": [-2.0, -6.0] }
          ],
          "observerInit": "exact",
          "gain": { "c": 10.0 },
          "dt": 0.001,
          "horizon": 0.5,
          "seed": 1,
          "mode": "distributed-control"
        }"#,
    );
    let run_dir = dir.path().join("diverged");
    let diverged = bin()
        .arg("simulate")
        .arg("--config")
        .arg(&diverging)
        .arg("--out")
        .arg(&run_dir)
        .output()
        .unwrap();
    assert_eq!(diverged.status.code(), Some(5), "{diverged:?}");
    let manifest = fs::read_to_string(run_dir.join("manifest.json")).unwrap();
    assert!(manifest.contains("\"diverged\": true"), "{manifest}");

    let scaled = write_json(
        dir.path(),
        "scaled_tau.json",
        r#"{ "model": "vdp", "tauScale": 2.0, "samples": 4 }"#,
    );
    let geometry = bin()
        .arg("check-geometry")
        .arg("--config")
        .arg(&scaled)
        .arg("--out")
        .arg(dir.path().join("geo"))
        .output()
        .unwrap();
    assert_eq!(geometry.status.code(), Some(3), "{geometry:?}");
}
