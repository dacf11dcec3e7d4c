use std::path::{Path, PathBuf};
use std::time::Instant;

use chrono::NaiveDate;
use clap::{Args, ValueEnum};
use roughvol::calibration::{calibrate, CalibrationConfig, MeshConfig, ModelFamily, RhoMode, DEFAULT_CUTOFF};
use roughvol::market_data::load_quote_surface;
use roughvol::sim::DEFAULT_MEAN_REVERSION;
use serde::{Deserialize, Serialize};

use super::Outcome;
use crate::args::{model_str, ModelName, Scheme};
use crate::error::{config_err, Failure};
use crate::manifest::RunManifest;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RhoModeArg {
    #[default]
    Scalar,
    PerMaturity,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct CalibrateArgs {
    #[arg(long, value_enum)]
    pub model: Option<ModelName>,
    /// Quote CSV `ticker,t_opt,t_fut,f0,strike,is_call,mkt_vol,bid_ask,volume`.
    #[arg(long)]
    pub quotes: Option<PathBuf>,
    /// Valuation date `YYYY-MM-DD` (metadata only; times are year fractions).
    #[arg(long)]
    pub valuation_date: Option<String>,
    #[arg(long, default_value_t = DEFAULT_MEAN_REVERSION)]
    pub a: f64,
    #[arg(long, value_enum, default_value_t)]
    pub rho_mode: RhoModeArg,
    /// Global search evaluations.
    #[arg(long, default_value_t = 200)]
    pub budget: usize,
    /// Local refinement evaluations.
    #[arg(long, default_value_t = 100)]
    pub local_budget: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 100_000)]
    pub n_paths: usize,
    /// `fine:coarse` steps per year, or a single steps-per-year value.
    #[arg(long, default_value = "2000:300")]
    pub mesh: String,
    #[arg(long, value_enum, default_value_t)]
    pub scheme: Scheme,
    #[arg(long, default_value_t = DEFAULT_CUTOFF)]
    pub cutoff: f64,
    #[arg(long, default_value_t = 1e-4)]
    pub bisection_tol: f64,
    /// Forward variance at t = 0; the curve is flat before the first expiry when absent.
    #[arg(long)]
    pub xi0_left: Option<f64>,
    /// Return the best point found after this many seconds.
    #[arg(long)]
    pub timeout: Option<f64>,
    /// Base-parameter bounds, settable through `--config`.
    #[arg(skip)]
    pub bounds: Option<Vec<(f64, f64)>>,
    #[arg(skip)]
    pub rho_bounds: Option<(f64, f64)>,
    /// Result JSON; smile CSVs are written beside it.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn parse_mesh(s: &str) -> Result<MeshConfig, Failure> {
    let num = |p: &str| {
        p.trim()
            .parse::<usize>()
            .map_err(|_| config_err(format!("bad mesh {s:?}, expected fine:coarse or steps")))
    };
    match s.split_once(':') {
        Some((f, c)) => Ok(MeshConfig::Dual {
            fine: num(f)?,
            coarse: num(c)?,
        }),
        None => Ok(MeshConfig::Single { steps_per_year: num(s)? }),
    }
}

impl CalibrateArgs {
    fn config(&self) -> Result<CalibrationConfig, Failure> {
        Ok(CalibrationConfig {
            bounds: self.bounds.clone(),
            rho_bounds: self.rho_bounds,
            mean_reversion: self.a,
            cutoff: self.cutoff,
            bisection_tol: self.bisection_tol,
            global_budget: self.budget,
            local_budget: self.local_budget,
            seed: self.seed,
            n_paths: self.n_paths,
            mesh: parse_mesh(&self.mesh)?,
            rho_mode: match self.rho_mode {
                RhoModeArg::Scalar => RhoMode::Scalar,
                RhoModeArg::PerMaturity => RhoMode::PerMaturity,
            },
            rheston_scheme: self.scheme.into(),
            xi0_left: self.xi0_left,
            timeout_seconds: self.timeout,
            ..Default::default()
        })
    }
}

/// `<stem>.smile_<i>_<ticker>.csv` next to the result JSON.
fn smile_path(out: &Path, i: usize, ticker: &str) -> PathBuf {
    let safe: String = ticker
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect();
    out.with_extension(format!("smile_{}_{safe}.csv", i + 1))
}

pub fn run(args: CalibrateArgs) -> Result<Outcome, Failure> {
    let start = Instant::now();
    let model = args.model.ok_or_else(|| config_err("--model is required"))?;
    let family = ModelFamily::parse(model_str(model)).expect("every model name is a family");
    let quotes = args.quotes.clone().ok_or_else(|| config_err("--quotes is required"))?;
    let out = args.out.clone().ok_or_else(|| config_err("--out is required"))?;
    let date = match &args.valuation_date {
        Some(d) => NaiveDate::parse_from_str(d, "%Y-%m-%d").map_err(|e| config_err(format!("--valuation-date: {e}")))?,
        None => NaiveDate::default(),
    };
    let config = args.config()?;
    config.validate(family)?;
    let surface = load_quote_surface::<f64>(&quotes, date).map_err(|e| config_err(format!("{}: {e}", quotes.display())))?;
    let manifest = RunManifest::new("calibrate", &args, Some(args.seed), std::slice::from_ref(&quotes))?;

    let result = calibrate(family, &surface, &config)?;
    std::fs::write(&out, serde_json::to_string_pretty(&result)? + "\n")?;
    let mut outputs = vec![out.clone()];
    for (i, (contract, quotes)) in surface.contracts.iter().zip(&surface.quotes).enumerate() {
        let path = smile_path(&out, i, &contract.ticker);
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record(["strike", "mkt_vol", "model_vol", "volume", "bid_ask"])?;
        for (q, m) in quotes.iter().zip(&result.model_vols[i]) {
            w.write_record([
                q.strike.to_string(),
                q.mkt_vol.to_string(),
                if m.failed { String::new() } else { m.vol.to_string() },
                q.volume.to_string(),
                q.bid_ask.to_string(),
            ])?;
        }
        w.flush()?;
        outputs.push(path);
    }
    manifest.write_beside(&out, outputs, start.elapsed())?;
    let theta: Vec<String> = result
        .names
        .iter()
        .zip(&result.theta)
        .map(|(n, v)| format!("{n}={v:.6}"))
        .collect();
    println!(
        "loss {:.6e} after {} evaluations{}: {}",
        result.loss.total,
        result.evaluations,
        if result.timed_out { " (timed out)" } else { "" },
        theta.join(" ")
    );
    Ok(Outcome::Done)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mesh_forms() {
        assert_eq!(parse_mesh("2000:300").unwrap(), MeshConfig::Dual { fine: 2000, coarse: 300 });
        assert_eq!(parse_mesh("250").unwrap(), MeshConfig::Single { steps_per_year: 250 });
        assert!(parse_mesh("fine").is_err());
    }

    #[test]
    fn smile_files_sit_beside_the_result() {
        let p = smile_path(Path::new("/tmp/fit.json"), 0, "CL/Z5");
        assert_eq!(p, PathBuf::from("/tmp/fit.smile_1_CL_Z5.csv"));
    }
}
