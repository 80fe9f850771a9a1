use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use driftscape::cli::{parse_trajectories, EXIT_DATA, EXIT_USAGE};
use driftscape::estimate::{fit, Method, OptimizerConfig};
use driftscape::simbench::{run_study, simulate, Scenario, StudyConfig};
use serde_json::Value;

fn driftscape(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_driftscape"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = driftscape(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn shipped_data() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data/default_k2_dt1.csv")
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn missing_data_is_a_usage_error() {
    let out = driftscape(&["fit", "--method", "euler"]);
    assert_eq!(out.status.code(), Some(EXIT_USAGE));
    assert!(!out.stderr.is_empty());
}

#[test]
fn unreadable_data_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "track_id,t,x,y\na,1,0,0\na,0,1,1\n").unwrap();
    let out = driftscape(&["fit", "--method", "euler", "--data", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(EXIT_DATA));
}

#[test]
fn shipped_data_fit_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let data = shipped_data();
    let run = |name: &str| {
        let out = dir.path().join(name);
        ok(&[
            "fit", "--method", "euler", "--data", data.to_str().unwrap(), "--seed", "1", "--restarts", "2", "--max-evals",
            "500", "--out", out.to_str().unwrap(),
        ]);
        std::fs::read(out).unwrap()
    };
    assert_eq!(run("a.json"), run("b.json"));
}

#[test]
fn kessler_fit_reports_skips_and_self_comparison_matches() {
    let dir = tempfile::tempdir().unwrap();
    let data = shipped_data();
    let fit_path = dir.path().join("kessler.json");
    let out = ok(&[
        "fit", "--method", "kessler", "--data", data.to_str().unwrap(), "--restarts", "1", "--max-evals", "500", "--out",
        fit_path.to_str().unwrap(),
    ]);
    let summary = String::from_utf8_lossy(&out.stdout);
    assert!(summary.contains("kessler"), "{summary}");
    let doc = json(&fit_path);
    assert!(doc["skipped_fraction"].is_number());
    assert_eq!(doc["schema_version"], 1);

    let cmp_path = dir.path().join("compare.json");
    let f = fit_path.to_str().unwrap();
    ok(&["compare", "--fits", f, f, "--data", data.to_str().unwrap(), "--mc", "10", "--out", cmp_path.to_str().unwrap()]);
    let cmp = json(&cmp_path);
    let segments = parse_trajectories(&data).unwrap().n_segments() as f64;
    let columns: Vec<String> = serde_json::from_value(cmp["matrix"]["columns"].clone()).unwrap();
    let col = columns.iter().position(|c| c == "kessler").unwrap();
    let row = &cmp["matrix"]["values"][0];
    assert_eq!(row.as_array().unwrap().len(), 4);
    let value = row[col].as_f64().unwrap();
    let objective = doc["objective"].as_f64().unwrap();
    assert!((value * segments - objective).abs() < 1e-9 * objective.abs());
}

#[test]
fn simulate_then_fit_matches_study() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("sim.csv");
    ok(&[
        "simulate", "--scenario", "default-k2", "--dt", "1", "--g", "2", "--n", "50", "--seed", "11", "--out",
        data.to_str().unwrap(),
    ]);
    let fit_path = dir.path().join("fit.json");
    ok(&[
        "fit", "--method", "ozaki", "--data", data.to_str().unwrap(), "--seed", "11", "--restarts", "1", "--max-evals", "300",
        "--out", fit_path.to_str().unwrap(),
    ]);
    let scenario = Scenario {
        g: 2,
        n: 50,
        seed: 11,
        replications: 1,
        ..Scenario::default_k2(1.0)
    };
    let cfg = StudyConfig {
        optimizer: OptimizerConfig {
            restarts: 1,
            max_evals: 300,
            seed: 11,
            ..OptimizerConfig::default()
        },
        ..StudyConfig::default()
    };
    let report = run_study(&scenario, &[Method::Ozaki], &cfg).unwrap();
    let from_study = report.rows[0].fit.as_ref().unwrap();
    let from_cli: driftscape::FitResult = serde_json::from_value(json(&fit_path)).unwrap();
    assert_eq!(from_cli.theta_hat, from_study.theta_hat);
    assert_eq!(from_cli.objective, from_study.objective);

    // The CSV written by simulate holds the same data as the library.
    let direct = simulate(&scenario, 0).unwrap();
    assert_eq!(parse_trajectories(&data).unwrap(), direct);
    let lib = fit(Method::Ozaki, &direct, 2, &cfg.optimizer).unwrap();
    assert_eq!(lib.theta_hat, from_cli.theta_hat);
}

#[test]
fn three_tracks_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("three.csv");
    std::fs::write(
        &src,
        "# three short tracks\ntrack_id,t,x,y\na,0,0.5,1.25\na,1.5,0.75,1\nb,0,-2,3\nb,0.25,-2.5,3.125\nb,2,-1,0\nc,10,0,0\nc,11,1e-3,-4\n",
    )
    .unwrap();
    let data = parse_trajectories(&src).unwrap();
    assert_eq!(data.tracks().len(), 3);
    assert_eq!(data.n_segments(), 4);
    let text = data.to_csv_string();
    let copy = dir.path().join("copy.csv");
    std::fs::write(&copy, &text).unwrap();
    let again = parse_trajectories(&copy).unwrap();
    assert_eq!(again, data);
    assert_eq!(again.to_csv_string(), text);
}
