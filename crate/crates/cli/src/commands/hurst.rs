use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, ValueEnum};
use roughvol::hurst::{estimate_h, moments_single, HurstFit, MomentTable, Pooling, DEFAULT_MAX_LAG};
use roughvol::market_data::{daily_rv_proxies, read_calendar, read_intraday, DEFAULT_MIN_RETURNS_PER_DAY};
use serde::{Deserialize, Serialize};

use super::Outcome;
use crate::args::parse_points;
use crate::error::{config_err, Failure};
use crate::manifest::RunManifest;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PoolingArg {
    #[default]
    FixedEffects,
    Averaged,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct HurstArgs {
    /// Intraday CSVs `epoch_seconds,log_price`, one per contract.
    #[arg(long, num_args = 1..)]
    pub returns: Vec<PathBuf>,
    /// Trading calendar `day_start_epoch,day_end_epoch`, required with `--returns`.
    #[arg(long)]
    pub calendar: Option<PathBuf>,
    /// Daily realized-volatility CSVs (last column), one per contract, instead of intraday data.
    #[arg(long, num_args = 1.., conflicts_with = "returns")]
    pub rv: Vec<PathBuf>,
    /// Return sampling interval in seconds.
    #[arg(long, default_value_t = 300)]
    pub bin_seconds: u32,
    /// Days with fewer returns are dropped.
    #[arg(long, default_value_t = DEFAULT_MIN_RETURNS_PER_DAY)]
    pub min_returns: usize,
    /// Moment orders.
    #[arg(long, default_value = "0.5,1,1.5,2,3")]
    pub q: String,
    /// Largest lag in days.
    #[arg(long, default_value_t = DEFAULT_MAX_LAG)]
    pub dmax: usize,
    /// Fit one common exponent across contracts instead of one per contract.
    #[arg(long)]
    pub pooled: bool,
    #[arg(long, value_enum, default_value_t)]
    pub pooling: PoolingArg,
    /// Result JSON; the regression scatter CSV is written beside it.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
struct HurstReport {
    contracts: Vec<String>,
    days: Vec<usize>,
    pooled: bool,
    /// One fit for the pooled regression, otherwise one per contract.
    fits: Vec<HurstFit>,
}

fn contract_name(p: &Path) -> String {
    p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

fn read_rv(path: &Path) -> Result<Vec<f64>, Failure> {
    let bad = |e: String| config_err(format!("{}: {e}", path.display()));
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| bad(e.to_string()))?;
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let field = rec.iter().last().unwrap_or("");
        let v = field
            .parse::<f64>()
            .map_err(|_| bad(format!("line {}: bad value {field:?}", i + 2)))?;
        out.push(v);
    }
    Ok(out)
}

fn load_series(args: &HurstArgs) -> Result<Vec<Vec<f64>>, Failure> {
    if !args.rv.is_empty() {
        return args.rv.iter().map(|p| read_rv(p)).collect();
    }
    if args.returns.is_empty() {
        return Err(config_err("give --returns with --calendar, or --rv"));
    }
    let cal_path = args
        .calendar
        .as_ref()
        .ok_or_else(|| config_err("--calendar is required with --returns"))?;
    let open = |p: &Path| std::fs::File::open(p).map_err(|e| config_err(format!("{}: {e}", p.display())));
    let calendar = read_calendar(open(cal_path)?)?;
    args.returns
        .iter()
        .map(|p| {
            let series = read_intraday::<f64, _>(std::io::BufReader::new(open(p)?), args.bin_seconds)
                .map_err(|e| config_err(format!("{}: {e}", p.display())))?;
            let days = daily_rv_proxies(&series, &calendar, args.min_returns)?;
            Ok(days.into_iter().map(|(_, rv)| rv).collect())
        })
        .collect()
}

fn write_scatter(path: &Path, names: &[String], tables: &[MomentTable]) -> Result<(), Failure> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["q", "delta", "log_delta", "log_m", "contract"])?;
    for (name, t) in names.iter().zip(tables) {
        for (i, q) in t.q.iter().enumerate() {
            for (j, &d) in t.deltas.iter().enumerate() {
                let m = t.m[(i, j)];
                if m > 0.0 && m.is_finite() {
                    w.write_record([
                        q.to_string(),
                        d.to_string(),
                        (d as f64).ln().to_string(),
                        m.ln().to_string(),
                        name.clone(),
                    ])?;
                }
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn run(args: HurstArgs) -> Result<Outcome, Failure> {
    let start = Instant::now();
    let out = args.out.clone().ok_or_else(|| config_err("--out is required"))?;
    let q = parse_points(&args.q)?;
    if q.is_empty() || q.iter().any(|&x| !(x > 0.0)) {
        return Err(config_err("--q needs positive moment orders"));
    }
    if args.dmax < 2 {
        return Err(config_err("--dmax must be at least 2"));
    }
    let deltas: Vec<usize> = (1..=args.dmax).collect();
    let files = if args.rv.is_empty() {
        args.returns.iter().chain(&args.calendar).cloned().collect::<Vec<_>>()
    } else {
        args.rv.clone()
    };
    let manifest = RunManifest::new("hurst", &args, None, &files)?;
    let series = load_series(&args)?;
    let names: Vec<String> = if args.rv.is_empty() { &args.returns } else { &args.rv }
        .iter()
        .map(|p| contract_name(p))
        .collect();
    let tables = series
        .iter()
        .map(|s| moments_single(s, &q, &deltas))
        .collect::<Result<Vec<_>, _>>()?;
    let pooling = match args.pooling {
        PoolingArg::FixedEffects => Pooling::FixedEffects,
        PoolingArg::Averaged => Pooling::Averaged,
    };
    let fits = if args.pooled {
        vec![estimate_h(&tables, pooling)?]
    } else {
        tables
            .iter()
            .map(|t| estimate_h(std::slice::from_ref(t), pooling))
            .collect::<Result<_, _>>()?
    };
    let report = HurstReport {
        contracts: names.clone(),
        days: series.iter().map(Vec::len).collect(),
        pooled: args.pooled,
        fits,
    };
    std::fs::write(&out, serde_json::to_string_pretty(&report)? + "\n")?;
    let scatter = out.with_extension("scatter.csv");
    write_scatter(&scatter, &names, &tables)?;
    manifest.write_beside(&out, vec![out.clone(), scatter], start.elapsed())?;
    for (i, fit) in report.fits.iter().enumerate() {
        let label = if args.pooled { "pooled" } else { names[i].as_str() };
        println!("{label}: H = {:.4} (se {:.4})", fit.h, fit.h_se);
    }
    Ok(Outcome::Done)
}
