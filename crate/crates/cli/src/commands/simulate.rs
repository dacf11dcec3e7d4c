use std::path::PathBuf;
use std::time::Instant;

use clap::Args;
use roughvol::sim::{simulate_grid, write_paths_csv, write_summary_csv, TimeGrid, DEFAULT_MEAN_REVERSION};
use serde::{Deserialize, Serialize};

use super::{open_output, Outcome};
use crate::args::{parse_points, ModelArgs};
use crate::error::Failure;
use crate::manifest::RunManifest;

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SimulateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    /// Mean-reversion speed of the normalized spot.
    #[arg(long, default_value_t = DEFAULT_MEAN_REVERSION)]
    pub a: f64,
    /// Simulation horizon in years.
    #[arg(long, default_value_t = 1.0)]
    pub horizon: f64,
    #[arg(long, default_value_t = 300)]
    pub steps_per_year: usize,
    /// Extra grid nodes (`lo:hi:n` or a comma list), e.g. option expiries.
    #[arg(long)]
    pub nodes: Option<String>,
    #[arg(long, default_value_t = 100_000)]
    pub n_paths: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Summary CSV `t,mean_s,se_s,mean_v`; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Full path dump `t,path_id,s,v`.
    #[arg(long)]
    pub paths_out: Option<PathBuf>,
}

pub fn run(args: SimulateArgs) -> Result<Outcome, Failure> {
    let start = Instant::now();
    let model = args.model.build(args.a)?;
    let nodes = args.nodes.as_deref().map(parse_points).transpose()?.unwrap_or_default();
    let grid = TimeGrid::with_nodes(args.horizon, args.steps_per_year, &nodes)?;
    let manifest = RunManifest::new("simulate", &args, Some(args.seed), &args.model.input_files())?;
    if args.n_paths == 0 {
        return Err(crate::error::config_err("--n-paths must be positive"));
    }
    let batch = simulate_grid(&model, &grid, args.n_paths, args.seed)?;
    write_summary_csv(&batch, open_output(args.out.as_deref())?)?;
    if let Some(p) = &args.paths_out {
        write_paths_csv(&batch, open_output(Some(p))?)?;
    }
    let outputs: Vec<PathBuf> = args.out.iter().chain(&args.paths_out).cloned().collect();
    if let Some(primary) = outputs.first() {
        manifest.write_beside(primary, outputs.clone(), start.elapsed())?;
    }
    Ok(Outcome::Done)
}
