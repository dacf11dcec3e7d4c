use clap::Args;
use roughvol::acceptance::{lookup, run as run_criterion, SuiteOptions, CRITERIA};
use serde::{Deserialize, Serialize};

use super::Outcome;
use crate::error::{config_err, Failure};

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SelftestArgs {
    /// Criteria to run, by number or name (comma separated); all when absent.
    #[arg(long, value_delimiter = ',')]
    pub only: Vec<String>,
    /// Path count for every criterion; tolerances widen accordingly.
    #[arg(long)]
    pub n_paths: Option<usize>,
    /// Use the reference path counts instead of the quick defaults.
    #[arg(long)]
    pub full: bool,
}

pub fn run(args: SelftestArgs) -> Result<Outcome, Failure> {
    let ids: Vec<u8> = if args.only.is_empty() {
        CRITERIA.iter().map(|c| c.0).collect()
    } else {
        args.only
            .iter()
            .map(|name| lookup(name.trim()).ok_or_else(|| config_err(format!("unknown criterion {name:?}"))))
            .collect::<Result<_, _>>()?
    };
    if args.n_paths == Some(0) {
        return Err(config_err("--n-paths must be positive"));
    }
    let opts = SuiteOptions {
        n_paths: args.n_paths,
        quick: !args.full,
    };
    let mut failed = 0;
    for id in &ids {
        let report = run_criterion(*id, opts);
        println!("{report}");
        if !report.passed {
            failed += 1;
        }
    }
    println!("{} of {} criteria passed", ids.len() - failed, ids.len());
    Ok(if failed == 0 { Outcome::Done } else { Outcome::Failed })
}
