use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use clap::Args;
use roughvol::pricing::{atm_term_structure, model_smile, FuturesCurve, SimSettings, VanillaSpec};
use roughvol::sim::DEFAULT_MEAN_REVERSION;
use serde::{Deserialize, Serialize};

use super::{open_output, Outcome};
use crate::args::{parse_points, parse_points_scaled, ModelArgs};
use crate::error::{config_err, Failure};
use crate::manifest::RunManifest;

const HEADER: [&str; 6] = ["a", "t_opt", "strike", "price", "stderr", "implied_vol"];

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct PriceArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = DEFAULT_MEAN_REVERSION)]
    pub a: f64,
    /// Initial futures price.
    #[arg(long, default_value_t = 100.0)]
    pub f0: f64,
    /// Option expiry in years.
    #[arg(long = "topt")]
    pub t_opt: Option<f64>,
    /// Futures maturity in years; defaults to the option expiry.
    #[arg(long = "tfut")]
    pub t_fut: Option<f64>,
    /// Strikes relative to `f0` (`lo:hi:n` or a comma list).
    #[arg(long, conflicts_with = "strikes")]
    pub strike_grid: Option<String>,
    /// Absolute strikes (`lo:hi:n` or a comma list).
    #[arg(long)]
    pub strikes: Option<String>,
    #[arg(long, default_value_t = 300)]
    pub steps_per_year: usize,
    #[arg(long, default_value_t = 100_000)]
    pub n_paths: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Use the futures price as a control variate.
    #[arg(long)]
    pub control_variate: bool,
    /// Smile CSV; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SamuelsonArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    /// Mean-reversion speeds (`lo:hi:n` or a comma list).
    #[arg(long)]
    pub a: Option<String>,
    #[arg(long, default_value_t = 100.0)]
    pub f0: f64,
    #[arg(long = "tfut")]
    pub t_fut: Option<f64>,
    /// Option expiries (`lo:hi:n` or a comma list), each at most the futures maturity.
    #[arg(long = "topt")]
    pub t_opt: Option<String>,
    #[arg(long, default_value_t = 400)]
    pub steps_per_year: usize,
    #[arg(long, default_value_t = 100_000)]
    pub n_paths: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub control_variate: bool,
    /// Term-structure CSV; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn settings(n_paths: usize, steps_per_year: usize, seed: u64, control_variate: bool) -> Result<SimSettings, Failure> {
    if n_paths == 0 || steps_per_year == 0 {
        return Err(config_err("--n-paths and --steps-per-year must be positive"));
    }
    Ok(SimSettings {
        n_paths,
        steps_per_year,
        seed,
        control_variate,
    })
}

fn fmt_vol(v: Option<f64>) -> String {
    v.filter(|x| x.is_finite()).map(|x| x.to_string()).unwrap_or_default()
}

pub fn run_price(args: PriceArgs) -> Result<Outcome, Failure> {
    let start = Instant::now();
    let model = args.model.build(args.a)?;
    let t_opt = args.t_opt.ok_or_else(|| config_err("--topt is required"))?;
    let t_fut = args.t_fut.unwrap_or(t_opt);
    let strikes = match (&args.strike_grid, &args.strikes) {
        (Some(g), None) => parse_points_scaled(g, args.f0)?,
        (None, Some(s)) => parse_points(s)?,
        _ => return Err(config_err("give exactly one of --strike-grid or --strikes")),
    };
    if strikes.is_empty() {
        return Err(config_err("no strikes given"));
    }
    let curve = FuturesCurve::flat(args.f0)?;
    let forward = curve.eval(t_fut);
    let specs: Vec<VanillaSpec<f64>> = strikes
        .iter()
        .map(|&strike| VanillaSpec {
            strike,
            t_opt,
            t_fut,
            is_call: strike >= forward,
        })
        .collect();
    for s in &specs {
        s.validate()?;
    }
    let settings = settings(args.n_paths, args.steps_per_year, args.seed, args.control_variate)?;
    let manifest = RunManifest::new("price", &args, Some(args.seed), &args.model.input_files())?;
    let smile = model_smile(&model, &curve, &specs, &settings)?;
    let mut w = csv::Writer::from_writer(open_output(args.out.as_deref())?);
    w.write_record(HEADER)?;
    for p in &smile {
        w.write_record([
            args.a.to_string(),
            t_opt.to_string(),
            p.strike.to_string(),
            p.price.to_string(),
            p.mc_stderr.to_string(),
            fmt_vol(p.model_vol),
        ])?;
    }
    w.into_inner().map_err(|e| Failure::Runtime(e.to_string()))?.flush()?;
    if let Some(out) = &args.out {
        manifest.write_beside(out, vec![out.clone()], start.elapsed())?;
    }
    Ok(Outcome::Done)
}

pub fn run_samuelson(args: SamuelsonArgs) -> Result<Outcome, Failure> {
    let start = Instant::now();
    let a_list = parse_points(args.a.as_deref().ok_or_else(|| config_err("--a is required"))?)?;
    if a_list.is_empty() {
        return Err(config_err("--a needs at least one mean-reversion speed"));
    }
    let t_fut = args.t_fut.ok_or_else(|| config_err("--tfut is required"))?;
    let t_opts = parse_points(args.t_opt.as_deref().ok_or_else(|| config_err("--topt is required"))?)?;
    if t_opts.is_empty() {
        return Err(config_err("--topt needs at least one expiry"));
    }
    if let Some(t) = t_opts.iter().find(|&&t| !(t > 0.0 && t <= t_fut)) {
        return Err(config_err(format!("option expiry {t} must lie in (0, tfut = {t_fut}]")));
    }
    let model = args.model.build(a_list[0])?;
    let settings = settings(args.n_paths, args.steps_per_year, args.seed, args.control_variate)?;
    let manifest = RunManifest::new("samuelson", &args, Some(args.seed), &args.model.input_files())?;
    let ts = atm_term_structure(&model, &FuturesCurve::flat(args.f0)?, t_fut, &t_opts, &a_list, &settings)?;
    let mut w = csv::Writer::from_writer(open_output(args.out.as_deref())?);
    w.write_record(HEADER)?;
    for (i, a) in ts.a.iter().enumerate() {
        for (j, t) in ts.t_opt.iter().enumerate() {
            w.write_record([
                a.to_string(),
                t.to_string(),
                ts.strike.to_string(),
                ts.price[(i, j)].to_string(),
                ts.stderr[(i, j)].to_string(),
                fmt_vol(Some(ts.vol[(i, j)])),
            ])?;
        }
    }
    w.into_inner().map_err(|e| Failure::Runtime(e.to_string()))?.flush()?;
    if let Some(out) = &args.out {
        manifest.write_beside(out, vec![out.clone()], start.elapsed())?;
    }
    Ok(Outcome::Done)
}
