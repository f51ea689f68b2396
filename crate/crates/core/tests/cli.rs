use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::{json, Value};
use tempfile::TempDir;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_photon-moments"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).unwrap()
}

fn write_json(dir: &Path, name: &str, value: &Value) -> String {
    let path = dir.join(name);
    fs::write(&path, serde_json::to_string_pretty(value).unwrap()).unwrap();
    path.to_str().unwrap().to_string()
}

fn scenario(trials: u64) -> Value {
    json!({
        "schema_version": 1,
        "source": {"variant": "measured", "mean": 1.07, "g": [0.184, 0.04], "n_max": 3},
        "overlap": 0.71,
        "grid": {"mean": [1.3, 1.6, 1.9]},
        "detector": {"bins": 8, "eta": 0.08},
        "trials": trials,
        "seed": 11,
        "m_max": 3
    })
}

#[test]
fn curves_default_grid() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().to_str().unwrap();
    let res = run(&["curves", "--out", out, "--svg"]);
    assert!(res.status.success(), "{}", stderr(&res));
    let mut rdr = csv::Reader::from_path(dir.path().join("curves.csv")).unwrap();
    let headers = rdr.headers().unwrap().clone();
    assert_eq!(
        headers.iter().collect::<Vec<_>>(),
        [
            "b",
            "mean",
            "ideal_g2",
            "ideal_g3",
            "ideal_g4",
            "no_overlap_g2",
            "no_overlap_g3",
            "no_overlap_g4"
        ]
    );
    let mut saw_peak = false;
    for rec in rdr.records() {
        let row: Vec<f64> = rec.unwrap().iter().map(|v| v.parse().unwrap()).collect();
        if row[1] == 3.0 {
            assert!((row[2] - 4.0 / 3.0).abs() < 1e-12);
            saw_peak = true;
        }
        assert!(row[5..].iter().all(|&g| g <= 1.0 + 1e-12));
    }
    assert!(saw_peak);
    let svg = fs::read_to_string(dir.path().join("curves.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.contains("polyline"));
}

#[test]
fn curves_json_and_usage_errors() {
    let res = run(&["curves", "--grid", "0,0.5", "--m-max", "2", "--format", "json"]);
    assert!(res.status.success());
    let v: Value = serde_json::from_str(&stdout(&res)).unwrap();
    assert_eq!(v[1]["ideal"][0].as_f64().unwrap(), 1.0);

    assert_eq!(run(&["curves", "--grid", ""]).status.code(), Some(1));
    assert_eq!(run(&["curves", "--grid", "-1"]).status.code(), Some(1));
    assert_eq!(run(&["curves", "--m-max", "1"]).status.code(), Some(1));
    assert_eq!(run(&["curves", "--svg"]).status.code(), Some(1));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn simulate_is_reproducible() {
    let dir = TempDir::new().unwrap();
    let mut sc = scenario(200_000);
    sc["twin_beam"] = json!({"squeeze": 0.3, "eta_signal": 0.3, "eta_herald": 0.5, "trials": 100000});
    let path = write_json(dir.path(), "scenario.json", &sc);
    let a = run(&["simulate", &path]);
    assert!(a.status.success(), "{}", stderr(&a));
    let b = run(&["simulate", &path]);
    assert_eq!(a.stdout, b.stdout);
    let c = run(&["simulate", &path, "--seed", "12"]);
    assert_ne!(a.stdout, c.stdout);

    let v: Value = serde_json::from_str(&stdout(&a)).unwrap();
    assert_eq!(v["seed"], 11);
    let points = v["points"].as_array().unwrap();
    assert_eq!(points.len(), 3);
    for p in points {
        let cal = p["mean_calibrated"].as_f64().unwrap();
        let model = p["mean_model"].as_f64().unwrap();
        assert!((cal - model).abs() < 0.1 * model, "{cal} vs {model}");
        for g in p["g"].as_array().unwrap() {
            let (s, e, x) = (
                g["sampled"].as_f64().unwrap(),
                g["stderr"].as_f64().unwrap(),
                g["exact_estimator"].as_f64().unwrap(),
            );
            assert!((s - x).abs() < 5.0 * e, "{g}");
        }
    }
    assert!(v["klyshko"]["efficiency"].as_f64().is_some());

    let out_dir = dir.path().join("out");
    let res = run(&["simulate", &path, "--format", "csv", "--out", out_dir.to_str().unwrap()]);
    assert!(res.status.success());
    let text = fs::read_to_string(out_dir.join("simulate.csv")).unwrap();
    assert_eq!(text.lines().count(), 1 + 3 * 2);
}

#[test]
fn simulate_rejects_bad_scenarios() {
    let dir = TempDir::new().unwrap();
    let zero = write_json(dir.path(), "zero.json", &scenario(0));
    let res = run(&["simulate", &zero]);
    assert_eq!(res.status.code(), Some(1));
    assert!(stderr(&res).contains("trials"));

    let mut sc = scenario(10);
    sc["detector"]["eta"] = json!("high");
    let res = run(&["simulate", &write_json(dir.path(), "bad.json", &sc)]);
    assert_eq!(res.status.code(), Some(1));
    assert!(stderr(&res).contains("detector"), "{}", stderr(&res));

    let mut sc = scenario(10);
    sc["schema_version"] = json!(7);
    assert_eq!(
        run(&["simulate", &write_json(dir.path(), "v7.json", &sc)])
            .status
            .code(),
        Some(1)
    );

    let mut sc = scenario(10);
    sc["grid"] = json!({"disp_sq": []});
    assert_eq!(
        run(&["simulate", &write_json(dir.path(), "empty.json", &sc)])
            .status
            .code(),
        Some(1)
    );

    // Ten trials at 8 % efficiency leave some bins without a click.
    let sc = scenario(10);
    assert_eq!(
        run(&["simulate", &write_json(dir.path(), "few.json", &sc)])
            .status
            .code(),
        Some(2)
    );
}

fn reconstruct(dir: &Path, moments: Value, extra: &[&str]) -> Value {
    let path = write_json(dir, "moments.json", &moments);
    let mut args = vec!["reconstruct", path.as_str(), "--format", "json"];
    args.extend_from_slice(extra);
    let res = run(&args);
    assert!(res.status.success(), "{}", stderr(&res));
    serde_json::from_str(&stdout(&res)).unwrap()
}

#[test]
fn reconstruct_cases() {
    let dir = TempDir::new().unwrap();

    let v = reconstruct(dir.path(), json!({"mean": 1.0, "g": [0.0, 0.0]}), &[]);
    let probs: Vec<f64> = serde_json::from_value(v["probs"].clone()).unwrap();
    assert_eq!(probs.len(), 4);
    assert!((probs[1] - 1.0).abs() < 1e-15 && probs[0].abs() < 1e-15 && probs[2].abs() < 1e-15);
    assert_eq!(v["physical"], true);

    let (mean, g3, g4) = (1.3f64, 0.7, 0.4);
    let v = reconstruct(dir.path(), json!({"mean": mean, "g": [0.9, g3, g4]}), &[]);
    let probs: Vec<f64> = serde_json::from_value(v["probs"].clone()).unwrap();
    assert!((probs[4] - mean.powi(4) / 24.0 * g4).abs() < 1e-12);
    assert!((probs[3] - mean.powi(3) / 6.0 * (g3 - g4 * mean)).abs() < 1e-12);

    let v = reconstruct(dir.path(), json!({"mean": mean, "g": [0.9, g3, 10.0 * g4]}), &[]);
    assert_eq!(v["physical"], false);
    assert!(!v["violations"].as_array().unwrap().is_empty());

    // --mean overrides the file and --m-max truncates.
    let v = reconstruct(
        dir.path(),
        json!({"mean": 9.0, "g": [0.9, g3, g4]}),
        &["--mean", "1.3", "--m-max", "3"],
    );
    assert_eq!(v["m_max"], 3);
    assert_eq!(v["mean"], 1.3);

    let path = write_json(dir.path(), "m.json", &json!({"mean": 1.0, "g": [0.5]}));
    assert_eq!(run(&["reconstruct", &path, "--mean", "0"]).status.code(), Some(2));
    let res = run(&["reconstruct", &path]);
    assert!(stdout(&res).starts_with("n,probability,sigma,physical\n"));
}

#[test]
fn fit_and_range() {
    let dir = TempDir::new().unwrap();
    let source = write_json(dir.path(), "source.json", &json!({"variant": "fock", "n": 1}));
    let mut csv = String::from("mean,g2,g3\n");
    for b in [0.2f64, 0.5, 1.0, 2.0] {
        let g2 = b * (4.0 + b) / (1.0 + b).powi(2);
        let g3 = b * b * (9.0 + b) / (1.0 + b).powi(3);
        csv.push_str(&format!("{},{g2},{g3}\n", 1.0 + b));
    }
    let data = dir.path().join("data.csv");
    fs::write(&data, &csv).unwrap();
    let res = run(&["fit", data.to_str().unwrap(), "--source", &source]);
    assert!(res.status.success(), "{}", stderr(&res));
    let v: Value = serde_json::from_str(&stdout(&res)).unwrap();
    assert!((v["overlap_hat"].as_f64().unwrap() - 1.0).abs() < 1e-3);
    assert_eq!(v["n_points"], 4);

    fs::write(&data, "mean,g2\n1.2,0.5\n1.5,oops\n").unwrap();
    let res = run(&["fit", data.to_str().unwrap(), "--source", &source]);
    assert_eq!(res.status.code(), Some(1));
    assert!(stderr(&res).contains("line 3"), "{}", stderr(&res));

    fs::write(&data, "mean,g2,g2_err\n1.2,0.5,inf\n1.5,0.6,inf\n").unwrap();
    let res = run(&["fit", data.to_str().unwrap(), "--source", &source]);
    assert_eq!(res.status.code(), Some(2));

    let model = write_json(
        dir.path(),
        "model.json",
        &json!({"source": {"variant": "measured", "mean": 1.07, "g": [0.184, 0.04], "n_max": 3}, "overlap": 0.71}),
    );
    let res = run(&["range", &model]);
    assert!(res.status.success(), "{}", stderr(&res));
    let v: Value = serde_json::from_str(&stdout(&res)).unwrap();
    let reliable = v["reliable_range"]["mean"].as_f64().unwrap();
    let bound = v["truncation_bound"]["mean"].as_f64().unwrap();
    assert!((reliable - 1.3).abs() <= 0.1 && (bound - 1.4).abs() <= 0.1 && reliable <= bound);
    let res = run(&["range", &model, "--m-max", "6"]);
    let v6: Value = serde_json::from_str(&stdout(&res)).unwrap();
    assert!(v6["reliable_range"]["mean"].as_f64().unwrap() > reliable);
    assert_eq!(run(&["range", &model, "--m-max", "2"]).status.code(), Some(1));
}

#[test]
fn klyshko_command() {
    let args = [
        "klyshko",
        "--squeeze",
        "0.3",
        "--eta-herald",
        "0.5",
        "--trials",
        "200000",
        "--seed",
        "4",
    ];
    let a = run(&args);
    assert!(a.status.success(), "{}", stderr(&a));
    assert_eq!(a.stdout, run(&args).stdout);
    let v: Value = serde_json::from_str(&stdout(&a)).unwrap();
    let (eff, err) = (v["efficiency"].as_f64().unwrap(), v["stderr"].as_f64().unwrap());
    assert!((eff - 0.3).abs() < 4.0 * err);
    assert_eq!(
        run(&["klyshko", "--squeeze", "0", "--trials", "100"]).status.code(),
        Some(2)
    );
    assert_eq!(run(&["klyshko", "--squeeze", "1.5"]).status.code(), Some(1));
}
