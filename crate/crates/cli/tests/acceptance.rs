//! Acceptance suite: one report per criterion, then a one-line summary each.
//!
//! Environment:
//! - `ROUGHVOL_ACCEPTANCE_ONLY=1,8,hurst` runs a subset.
//! - `ROUGHVOL_ACCEPTANCE_PATHS=N` replaces every reference path count (tolerances widen).
//! - `ROUGHVOL_ACCEPTANCE_STRICT=1` exits nonzero when a criterion fails.

use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};

use roughvol::acceptance::{lookup, run, Report, SuiteOptions, CRITERIA};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn roughvol(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_roughvol"))
        .args(args)
        .env_remove("ROUGHVOL_THREADS")
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!("{:?}: {}", args, String::from_utf8_lossy(&out.stderr)))
    }
}

fn read_all(paths: &[PathBuf]) -> Result<Vec<Vec<u8>>, String> {
    paths.iter().map(|p| std::fs::read(p).map_err(|e| format!("{}: {e}", p.display()))).collect()
}

/// Runs one command with 1 thread twice, with 4 threads, and from its manifest,
/// comparing every output file byte for byte.
fn same_bytes(dir: &Path, label: &str, args: &[&str], outputs: &[&str], details: &mut Vec<String>) -> Result<bool, String> {
    let paths: Vec<PathBuf> = outputs.iter().map(|o| dir.join(o)).collect();
    let manifest = paths[0].with_extension("manifest.json");
    let mut runs = Vec::new();
    for threads in ["1", "1", "4"] {
        let mut full: Vec<&str> = args.to_vec();
        full.extend(["--threads", threads]);
        roughvol(&full)?;
        runs.push(read_all(&paths)?);
    }
    let replay = manifest.with_extension("replay.json");
    std::fs::copy(&manifest, &replay).map_err(|e| e.to_string())?;
    roughvol(&[args[0], "--config", replay.to_str().unwrap(), "--threads", "2"])?;
    runs.push(read_all(&paths)?);
    let ok = runs.windows(2).all(|w| w[0] == w[1]);
    let bytes: usize = runs[0].iter().map(Vec::len).sum();
    details.push(format!(
        "{} cli {label}: {} files, {bytes} bytes identical across 1, 1, 4 threads and manifest replay",
        if ok { "ok  " } else { "FAIL" },
        paths.len()
    ));
    Ok(ok)
}

fn cli_determinism(report: &mut Report) {
    let mut details = Vec::new();
    let result = (|| -> Result<bool, String> {
        let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
        let dir = tmp.path();
        let p = |name: &str| dir.join(name).to_str().unwrap().to_string();
        let sim = p("sim.csv");
        let paths = p("paths.csv");
        let mut ok = same_bytes(
            dir,
            "simulate",
            &[
                "simulate", "--model", "rheston", "--h", "0.3", "--eta", "1", "--kappa", "2", "--rho", "-0.5", "--xi0",
                "pw:0.25=0.06,0.5=0.05,left=0.09", "--horizon", "0.5", "--n-paths", "20000", "--seed", "11", "--out", &sim,
                "--paths-out", &paths,
            ],
            &["sim.csv", "paths.csv"],
            &mut details,
        )?;
        let meta: serde_json::Value = serde_json::from_str(
            &std::fs::read_to_string(fixture("synthetic_quotes.json")).map_err(|e| e.to_string())?,
        )
        .map_err(|e| e.to_string())?;
        let cfg = p("calibration.json");
        std::fs::write(&cfg, meta["calibration"].to_string()).map_err(|e| e.to_string())?;
        let fit = p("fit.json");
        let quotes = fixture("synthetic_quotes.csv");
        ok &= same_bytes(
            dir,
            "calibrate",
            &["calibrate", "--config", &cfg, "--quotes", quotes.to_str().unwrap(), "--out", &fit],
            &["fit.json", "fit.smile_1_F1.csv", "fit.smile_2_F2.csv"],
            &mut details,
        )?;
        let h = p("h.json");
        let rv = fixture("fbm_h010.csv");
        ok &= same_bytes(
            dir,
            "hurst",
            &["hurst", "--rv", rv.to_str().unwrap(), "--pooled", "--out", &h],
            &["h.json", "h.scatter.csv"],
            &mut details,
        )?;
        Ok(ok)
    })();
    match result {
        Ok(ok) => report.passed &= ok,
        Err(e) => {
            report.passed = false;
            details.push(format!("FAIL cli run: {e}"));
        }
    }
    report.details.extend(details);
}

fn main() -> ExitCode {
    let ids: Vec<u8> = match std::env::var("ROUGHVOL_ACCEPTANCE_ONLY") {
        Ok(list) => list
            .split(',')
            .map(|s| lookup(s.trim()).unwrap_or_else(|| panic!("unknown criterion {s:?}")))
            .collect(),
        Err(_) => CRITERIA.iter().map(|c| c.0).collect(),
    };
    let opts = SuiteOptions {
        n_paths: std::env::var("ROUGHVOL_ACCEPTANCE_PATHS").ok().map(|v| v.parse().expect("path count")),
        quick: false,
    };
    let mut reports = Vec::new();
    for id in ids {
        let start = std::time::Instant::now();
        let mut report = run(id, opts);
        if id == 11 {
            cli_determinism(&mut report);
            report.seconds = start.elapsed().as_secs_f64();
        }
        println!("{report}\n");
        reports.push(report);
    }
    println!("acceptance summary");
    for r in &reports {
        println!("[{}] {:>2} {}", if r.passed { "PASS" } else { "FAIL" }, r.id, r.key);
    }
    let failed = reports.iter().filter(|r| !r.passed).count();
    println!("{} of {} criteria passed", reports.len() - failed, reports.len());
    if failed > 0 && std::env::var_os("ROUGHVOL_ACCEPTANCE_STRICT").is_some() {
        return ExitCode::FAILURE;
    }
    ExitCode::SUCCESS
}
