use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn roughvol(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_roughvol"))
        .args(args)
        .env_remove("ROUGHVOL_THREADS")
        .output()
        .expect("binary runs")
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    let mut rdr = csv::Reader::from_path(path).unwrap();
    rdr.records()
        .map(|r| r.unwrap().iter().map(str::to_string).collect())
        .collect()
}

const RBERGOMI: [&str; 10] = [
    "--model", "rbergomi", "--h", "0.1", "--eta", "1.5", "--rho", "-0.3", "--xi0", "flat:0.04",
];

#[test]
fn simulate_keeps_normalized_spot_at_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sim.csv");
    let mut args = vec!["simulate"];
    args.extend(RBERGOMI);
    args.extend(["--n-paths", "10000", "--seed", "7", "--horizon", "0.5", "--out", out.to_str().unwrap()]);
    let o = roughvol(&args);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = csv_rows(&out);
    assert_eq!(rows.len(), 151);
    for r in &rows[1..] {
        let (mean, se): (f64, f64) = (r[1].parse().unwrap(), r[2].parse().unwrap());
        assert!((mean - 1.0).abs() <= 4.0 * se, "t = {}: {mean} +- {se}", r[0]);
    }
    assert!(dir.path().join("sim.manifest.json").exists());
}

#[test]
fn missing_model_is_a_usage_error() {
    let o = roughvol(&["simulate", "--n-paths", "10"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("Usage"), "{}", stderr(&o));
}

#[test]
fn positive_rho_rejected_for_rough_bergomi() {
    let o = roughvol(&[
        "simulate", "--model", "rbergomi", "--h", "0.1", "--eta", "1.5", "--rho", "0.2", "--xi0", "flat:0.04",
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("rho < 0"), "{}", stderr(&o));
}

#[test]
fn unreadable_input_and_bad_values_exit_two() {
    let o = roughvol(&["calibrate", "--model", "rbergomi", "--quotes", "/nonexistent.csv", "--out", "/tmp/x.json"]);
    assert_eq!(o.status.code(), Some(2));
    let o = roughvol(&["hurst", "--rv", fixture("fbm_h010.csv").to_str().unwrap(), "--q", "0,1", "--out", "/tmp/x.json"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn price_strike_grid_gives_nine_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("smile.csv");
    let mut args = vec!["price"];
    args.extend(RBERGOMI);
    args.extend([
        "--topt", "0.25", "--tfut", "0.3", "--strike-grid", "0.8:1.2:9", "--n-paths", "4000", "--out",
        out.to_str().unwrap(),
    ]);
    let o = roughvol(&args);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = csv_rows(&out);
    assert_eq!(rows.len(), 9);
    assert!(rows.iter().all(|r| r.len() == 6 && r[5].parse::<f64>().unwrap() > 0.0));
    assert!((rows[0][2].parse::<f64>().unwrap() - 80.0).abs() < 1e-9);
}

#[test]
fn samuelson_grid_shape_and_empty_list() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("ts.csv");
    let mut args = vec!["samuelson"];
    args.extend(RBERGOMI);
    args.extend([
        "--a", "0,0.5,1,2", "--tfut", "0.44", "--topt", "0.05:0.40:8", "--n-paths", "2000", "--out",
        out.to_str().unwrap(),
    ]);
    let o = roughvol(&args);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = csv_rows(&out);
    assert_eq!(rows.len(), 32);
    assert_eq!(rows[8][0], "0.5");

    let mut args = vec!["samuelson"];
    args.extend(RBERGOMI);
    args.extend(["--a", "", "--tfut", "0.44", "--topt", "0.05:0.40:8"]);
    assert_eq!(roughvol(&args).status.code(), Some(2));

    let mut args = vec!["samuelson"];
    args.extend(RBERGOMI);
    args.extend(["--a", "1", "--tfut", "0.3", "--topt", "0.05:0.40:8"]);
    assert_eq!(roughvol(&args).status.code(), Some(2));
}

#[test]
fn samuelson_without_mean_reversion_is_flat_at_low_vol_of_vol() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("flat.csv");
    let o = roughvol(&[
        "samuelson", "--model", "rbergomi", "--h", "0.1", "--eta", "0.3", "--rho", "-0.3", "--xi0", "flat:0.04",
        "--a", "0", "--tfut", "0.44", "--topt", "0.05:0.40:8", "--n-paths", "20000", "--seed", "3", "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = csv_rows(&out);
    assert_eq!(rows.len(), 8);
    let vols: Vec<f64> = rows.iter().map(|r| r[5].parse().unwrap()).collect();
    for v in &vols {
        assert!((v - 0.2).abs() < 0.005, "{vols:?}");
    }
}

#[test]
fn calibrate_fixture_beats_threshold() {
    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(fixture("synthetic_quotes.json")).unwrap()).unwrap();
    let threshold = meta["threshold"].as_f64().unwrap();
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("fit.json");
    let config = dir.path().join("cfg.json");
    std::fs::write(&config, meta["calibration"].to_string()).unwrap();
    let quotes = fixture("synthetic_quotes.csv");
    let before = std::fs::read(&quotes).unwrap();
    let o = roughvol(&[
        "calibrate", "--config", config.to_str().unwrap(), "--quotes", quotes.to_str().unwrap(), "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let result: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    let loss = result["loss"]["total"].as_f64().unwrap();
    assert!(loss < threshold, "loss {loss} vs threshold {threshold}");
    assert_eq!(std::fs::read(&quotes).unwrap(), before);
    for i in 1..=2 {
        let smile = dir.path().join(format!("fit.smile_{i}_F{i}.csv"));
        assert_eq!(csv_rows(&smile).len(), 7);
    }
}

#[test]
fn hurst_fixture_is_rough() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("h.json");
    let o = roughvol(&["hurst", "--rv", fixture("fbm_h010.csv").to_str().unwrap(), "--pooled", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    let h = report["fits"][0]["h"].as_f64().unwrap();
    assert!((0.07..=0.13).contains(&h), "H = {h}");
    let scatter = csv_rows(&dir.path().join("h.scatter.csv"));
    assert_eq!(scatter.len(), 5 * 31);
    assert_eq!(scatter[0][4], "fbm_h010");
}

#[test]
fn config_overrides_flags_and_manifest_reproduces() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("a.csv");
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"seed": 5, "n_paths": 3000, "horizon": 0.25}"#).unwrap();
    let mut args = vec!["simulate", "--config", cfg.to_str().unwrap()];
    args.extend(RBERGOMI);
    args.extend(["--seed", "1", "--out", out.to_str().unwrap()]);
    let o = roughvol(&args);
    assert!(o.status.success(), "{}", stderr(&o));
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("a.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 5);
    assert_eq!(manifest["config"]["n_paths"], 3000);
    assert_eq!(manifest["command"], "simulate");
    let first = std::fs::read(&out).unwrap();
    std::fs::remove_file(&out).unwrap();
    let m = dir.path().join("a.manifest.json");
    let o = roughvol(&["simulate", "--config", m.to_str().unwrap(), "--threads", "3"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(std::fs::read(&out).unwrap(), first);

    std::fs::write(&cfg, r#"{"seeds": 5}"#).unwrap();
    let mut args = vec!["simulate", "--config", cfg.to_str().unwrap()];
    args.extend(RBERGOMI);
    assert_eq!(roughvol(&args).status.code(), Some(2));
}

#[test]
fn selftest_single_criterion_and_widening() {
    let o = roughvol(&["selftest", "--only", "loss"]);
    assert!(o.status.success());
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.contains("[PASS]") && text.contains("loss"), "{text}");
    let o = roughvol(&["selftest", "--only", "volterra", "--n-paths", "100"]);
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.contains("widened"), "{text}");
    assert_eq!(roughvol(&["selftest", "--only", "nonsense"]).status.code(), Some(2));
}
