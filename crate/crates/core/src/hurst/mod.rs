//! Hurst exponent of log realized volatility from the scaling of absolute moments
//! `m(q, d) = mean |log RV_{kd} - log RV_{(k-1)d}|^q ~ d^{Hq}`.

mod fbm;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::real::Real;

pub use fbm::{fbm, fgn, fgn_autocovariance};

pub const DEFAULT_Q: [f64; 5] = [0.5, 1.0, 1.5, 2.0, 3.0];
pub const DEFAULT_MAX_LAG: usize = 31;

/// `m[(i, j)]` is the moment of order `q[i]` at lag `deltas[j]` days.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentTable {
    pub q: Vec<f64>,
    pub deltas: Vec<usize>,
    pub m: Array2<f64>,
}

/// Moments of one daily RV series over non-overlapping increments (stride `d`).
pub fn moments_single<T: Real>(rv: &[T], q: &[f64], deltas: &[usize]) -> Result<MomentTable> {
    if let Some(bad) = rv.iter().find(|x| !(x.f64() > 0.0)) {
        return Err(invalid(format!("realized volatility must be positive, got {bad}")));
    }
    if q.is_empty() || q.iter().any(|&x| !(x > 0.0)) {
        return Err(invalid("moment orders must be positive"));
    }
    if deltas.is_empty() || deltas.contains(&0) {
        return Err(invalid("lags must be positive"));
    }
    let max_lag = *deltas.iter().max().expect("nonempty");
    if rv.len() < 2 * max_lag {
        return Err(Error::InsufficientData(format!(
            "{} observations for a maximum lag of {max_lag}",
            rv.len()
        )));
    }
    let logs: Vec<f64> = rv.iter().map(|x| x.f64().ln()).collect();
    let mut m = Array2::zeros((q.len(), deltas.len()));
    for (j, &d) in deltas.iter().enumerate() {
        let incs: Vec<f64> = logs.iter().step_by(d).collect::<Vec<_>>().windows(2).map(|w| (w[1] - w[0]).abs()).collect();
        let n = incs.len() as f64;
        for (i, &qi) in q.iter().enumerate() {
            m[(i, j)] = incs.iter().map(|x| x.powf(qi)).sum::<f64>() / n;
        }
    }
    Ok(MomentTable {
        q: q.to_vec(),
        deltas: deltas.to_vec(),
        m,
    })
}

/// Per-contract moment tables.
pub fn moments<T: Real>(rv: &[Vec<T>], q: &[f64], deltas: &[usize]) -> Result<Vec<MomentTable>> {
    rv.iter().map(|s| moments_single(s, q, deltas)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pooling {
    /// Stack every contract's points with contract intercepts and a common slope.
    #[default]
    FixedEffects,
    /// Regress the across-contract mean of `log m` at each lag.
    Averaged,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QFit {
    pub q: f64,
    pub slope: f64,
    pub slope_se: f64,
    /// One intercept per contract (a single one in averaged mode).
    pub intercepts: Vec<f64>,
    pub r_squared: f64,
    pub h: f64,
    pub h_se: f64,
    pub n_points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HurstFit {
    pub per_q: Vec<QFit>,
    /// Precision-weighted mean of the per-order estimates.
    pub h: f64,
    pub h_se: f64,
    /// Set when the pooled estimate falls outside `(0, 1)`.
    pub out_of_range: bool,
    pub pooling: Pooling,
    /// `(q, d, contract)` cells left out because the moment was zero.
    pub excluded: Vec<(f64, usize, usize)>,
}

struct Ols {
    slope: f64,
    se: f64,
    intercepts: Vec<f64>,
    r2: f64,
    n: usize,
}

/// Common-slope regression over groups of `(x, y)` points with group intercepts.
fn within_ols(groups: &[Vec<(f64, f64)>]) -> Result<Ols> {
    let groups: Vec<&Vec<(f64, f64)>> = groups.iter().filter(|g| !g.is_empty()).collect();
    let n: usize = groups.iter().map(|g| g.len()).sum();
    let dof = n as isize - groups.len() as isize - 1;
    if n < 3 || dof < 1 {
        return Err(Error::DegenerateRegression(format!("{n} usable points")));
    }
    let means: Vec<(f64, f64)> = groups
        .iter()
        .map(|g| {
            let k = g.len() as f64;
            (g.iter().map(|p| p.0).sum::<f64>() / k, g.iter().map(|p| p.1).sum::<f64>() / k)
        })
        .collect();
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (g, &(mx, my)) in groups.iter().zip(&means) {
        for &(x, y) in g.iter() {
            sxx += (x - mx) * (x - mx);
            sxy += (x - mx) * (y - my);
            syy += (y - my) * (y - my);
        }
    }
    if !(sxx > 1e-300) {
        return Err(Error::DegenerateRegression("no variation in log lag".into()));
    }
    let slope = sxy / sxx;
    let ssr = (syy - slope * sxy).max(0.0);
    let se = (ssr / dof as f64 / sxx).sqrt();
    let r2 = if syy > 0.0 { 1.0 - ssr / syy } else { 1.0 };
    Ok(Ols {
        slope,
        se,
        intercepts: means.iter().map(|&(mx, my)| my - slope * mx).collect(),
        r2,
        n,
    })
}

/// Regresses `log m` on `log d` for every order `q` and combines `H_q = slope / q`.
pub fn estimate_h(tables: &[MomentTable], pooling: Pooling) -> Result<HurstFit> {
    let first = tables.first().ok_or_else(|| Error::InsufficientData("no moment tables".into()))?;
    if tables.iter().any(|t| t.q != first.q || t.deltas != first.deltas) {
        return Err(Error::Alignment("moment tables use different orders or lags".into()));
    }
    let mut excluded = Vec::new();
    let mut per_q = Vec::with_capacity(first.q.len());
    for (i, &q) in first.q.iter().enumerate() {
        let mut groups: Vec<Vec<(f64, f64)>> = vec![Vec::new(); tables.len()];
        for (c, t) in tables.iter().enumerate() {
            for (j, &d) in t.deltas.iter().enumerate() {
                let v = t.m[(i, j)];
                if v > 0.0 && v.is_finite() {
                    groups[c].push(((d as f64).ln(), v.ln()));
                } else {
                    excluded.push((q, d, c));
                }
            }
        }
        if pooling == Pooling::Averaged {
            let mut avg = Vec::new();
            for &d in &first.deltas {
                let x = (d as f64).ln();
                let ys: Vec<f64> = groups.iter().filter_map(|g| g.iter().find(|p| p.0 == x).map(|p| p.1)).collect();
                if !ys.is_empty() {
                    avg.push((x, ys.iter().sum::<f64>() / ys.len() as f64));
                }
            }
            groups = vec![avg];
        }
        let fit = within_ols(&groups)?;
        per_q.push(QFit {
            q,
            slope: fit.slope,
            slope_se: fit.se,
            intercepts: fit.intercepts,
            r_squared: fit.r2,
            h: fit.slope / q,
            h_se: fit.se / q,
            n_points: fit.n,
        });
    }
    let exact: Vec<&QFit> = per_q.iter().filter(|f| f.h_se == 0.0).collect();
    let (h, h_se) = if !exact.is_empty() {
        (exact.iter().map(|f| f.h).sum::<f64>() / exact.len() as f64, 0.0)
    } else {
        let w: f64 = per_q.iter().map(|f| 1.0 / (f.h_se * f.h_se)).sum();
        (per_q.iter().map(|f| f.h / (f.h_se * f.h_se)).sum::<f64>() / w, w.sqrt().recip())
    };
    Ok(HurstFit {
        per_q,
        h,
        h_se,
        out_of_range: !(h > 0.0 && h < 1.0),
        pooling,
        excluded,
    })
}
