use std::io::Write;

use super::PathBatch;
use crate::error::Result;
use crate::pricing::mean_stderr;
use crate::real::Real;

/// One row per grid node: `t,mean_s,se_s,mean_v`.
pub fn write_summary_csv<T: Real, W: Write>(batch: &PathBatch<T>, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["t", "mean_s", "se_s", "mean_v"])?;
    for (k, t) in batch.grid.times().iter().enumerate() {
        let (ms, se) = mean_stderr(batch.s.column(k).iter().map(|x| x.f64()));
        let (mv, _) = mean_stderr(batch.v.column(k).iter().map(|x| x.f64()));
        w.write_record([t.f64().to_string(), ms.to_string(), se.to_string(), mv.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Full path dump `t,path_id,s,v`, path-major.
pub fn write_paths_csv<T: Real, W: Write>(batch: &PathBatch<T>, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["t", "path_id", "s", "v"])?;
    for j in 0..batch.n_paths {
        for (k, t) in batch.grid.times().iter().enumerate() {
            w.write_record([
                t.f64().to_string(),
                j.to_string(),
                batch.s[(j, k)].to_string(),
                batch.v[(j, k)].to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}
