use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::black::{band_side, implied_vol, BandSide};
use super::futures::FuturesCurve;
use super::mc::{price_from_spots, McOptions, VanillaSpec};
use crate::error::{invalid, Result};
use crate::real::Real;
use crate::sim::{simulate_grid, spot_paths, variance_paths, ModelSpec, SpotParams, TimeGrid};

/// Monte Carlo settings for a pricing run on a single grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimSettings {
    pub n_paths: usize,
    pub steps_per_year: usize,
    pub seed: u64,
    #[serde(default)]
    pub control_variate: bool,
}

impl SimSettings {
    pub fn options(&self) -> McOptions {
        McOptions {
            control_variate: self.control_variate,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmilePoint<T: Real> {
    pub strike: T,
    pub price: T,
    pub mc_stderr: T,
    /// `None` when the price left the invertible range; see `band`.
    pub model_vol: Option<T>,
    pub band: Option<BandSide>,
}

/// Converts a Monte Carlo price to a smile point, flagging failed inversions.
pub(crate) fn smile_point<T: Real>(spec: &VanillaSpec<T>, forward: T, price: T, stderr: T) -> Result<SmilePoint<T>> {
    let (model_vol, band) = match implied_vol(price, forward, spec.strike, spec.t_opt, spec.is_call) {
        Ok(v) => (Some(v), None),
        Err(e) => match band_side(&e) {
            Some(side) => (None, Some(side)),
            None => return Err(e),
        },
    };
    Ok(SmilePoint {
        strike: spec.strike,
        price,
        mc_stderr: stderr,
        model_vol,
        band,
    })
}

/// Model implied vols for options sharing one expiry and underlying, from one simulation.
pub fn model_smile<T: Real>(
    model: &ModelSpec<T>,
    curve: &FuturesCurve<T>,
    specs: &[VanillaSpec<T>],
    settings: &SimSettings,
) -> Result<Vec<SmilePoint<T>>> {
    let Some(first) = specs.first() else {
        return Ok(Vec::new());
    };
    for s in specs {
        s.validate()?;
        if s.t_opt != first.t_opt || s.t_fut != first.t_fut {
            return Err(invalid("all options in a smile must share expiry and underlying"));
        }
    }
    let grid = TimeGrid::with_nodes(first.t_opt, settings.steps_per_year, &[first.t_opt])?;
    let batch = simulate_grid(model, &grid, settings.n_paths, settings.seed)?;
    let col = batch.s.column(grid.n_steps());
    let forward = curve.eval(first.t_fut);
    let mut sorted = specs.to_vec();
    sorted.sort_by(|a, b| a.strike.partial_cmp(&b.strike).expect("finite strike"));
    sorted
        .iter()
        .map(|spec| {
            let p = price_from_spots(col, spec, model.spot.mean_reversion, forward, settings.options());
            smile_point(spec, forward, p.price, p.stderr)
        })
        .collect()
}

/// ATM (strike `F0(t_fut)`) call prices and vols indexed by `(a, t_opt)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TermStructure<T: Real> {
    pub a: Vec<T>,
    pub t_opt: Vec<T>,
    pub t_fut: T,
    pub strike: T,
    pub price: Array2<T>,
    pub stderr: Array2<T>,
    /// NaN where the price could not be inverted.
    pub vol: Array2<T>,
}

/// Reprices ATM options across expiries for several spot mean-reversion speeds.
/// The variance paths are shared across `a`, so the rows differ only through the damping.
pub fn atm_term_structure<T: Real>(
    model: &ModelSpec<T>,
    curve: &FuturesCurve<T>,
    t_fut: T,
    t_opts: &[T],
    a_list: &[T],
    settings: &SimSettings,
) -> Result<TermStructure<T>> {
    if t_opts.is_empty() || a_list.is_empty() {
        return Err(invalid("need at least one expiry and one mean-reversion speed"));
    }
    if t_opts.iter().any(|&t| !(t > T::zero() && t <= t_fut)) {
        return Err(invalid("every expiry must lie in (0, t_fut]"));
    }
    model.validate()?;
    let horizon = t_opts.iter().copied().fold(T::zero(), T::max);
    let grid = TimeGrid::with_nodes(horizon, settings.steps_per_year, t_opts)?;
    let variance = variance_paths(&model.variance, &grid, settings.n_paths, settings.seed)?;
    let strike = curve.eval(t_fut);
    let shape = (a_list.len(), t_opts.len());
    let mut price = Array2::zeros(shape);
    let mut stderr = Array2::zeros(shape);
    let mut vol = Array2::zeros(shape);
    for (i, &a) in a_list.iter().enumerate() {
        let spot = SpotParams {
            mean_reversion: a,
            corr: model.spot.corr.clone(),
        };
        let batch = spot_paths(&spot, &variance, &grid, settings.seed)?;
        for (j, &t) in t_opts.iter().enumerate() {
            let spec = VanillaSpec {
                strike,
                t_opt: t,
                t_fut,
                is_call: true,
            };
            let k = grid.index_of(t).expect("expiry inserted as node");
            let p = price_from_spots(batch.s.column(k), &spec, a, strike, settings.options());
            let point = smile_point(&spec, strike, p.price, p.stderr)?;
            price[[i, j]] = p.price;
            stderr[[i, j]] = p.stderr;
            vol[[i, j]] = point.model_vol.unwrap_or_else(T::nan);
        }
    }
    Ok(TermStructure {
        a: a_list.to_vec(),
        t_opt: t_opts.to_vec(),
        t_fut,
        strike,
        price,
        stderr,
        vol,
    })
}
