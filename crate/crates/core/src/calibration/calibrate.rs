use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::config::{CalibrationConfig, ModelFamily, RhoMode};
use super::engine::{Candidate, Engine, XiFit};
use super::loss::{loss_flagged, LossBreakdown, QuoteVol};
use super::optimize::{differential_evolution, nelder_mead};
use crate::error::{invalid, Result};
use crate::fv_curve::ForwardVarianceCurve;
use crate::market_data::QuoteSurface;
use crate::pricing::BandSide;
use crate::real::Real;
use crate::sim::{derive_seed, Correlation, ModelSpec, VarianceModel};

const TAG_SEARCH: u64 = 0x5eac_4000;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CalibrationResult<T: Real> {
    pub family: ModelFamily,
    /// Names of the entries of `theta`.
    pub names: Vec<String>,
    pub theta: Vec<f64>,
    /// Fitted model, curve included.
    pub model: ModelSpec<T>,
    pub curve: ForwardVarianceCurve<T>,
    /// Correlation used for each maturity.
    pub rho: Vec<T>,
    pub loss: LossBreakdown<T>,
    pub model_vols: Vec<Vec<QuoteVol<T>>>,
    pub bracket_flags: Vec<Option<BandSide>>,
    pub evaluations: usize,
    pub timed_out: bool,
    pub config: CalibrationConfig,
    #[serde(skip)]
    pub wall_time: Duration,
}

impl ModelFamily {
    pub fn of<T: Real>(model: &VarianceModel<T>) -> Self {
        match model {
            VarianceModel::RBergomi(_) => Self::RBergomi,
            VarianceModel::RHeston(_) => Self::RHeston,
            VarianceModel::Bergomi(_) => Self::Bergomi,
            VarianceModel::Heston(_) => Self::Heston,
        }
    }
}

/// Parameter names in search-vector order.
pub fn parameter_names(family: ModelFamily, config: &CalibrationConfig, n_maturities: usize) -> Vec<String> {
    let mut names: Vec<String> = family.base_names().iter().map(|s| s.to_string()).collect();
    match config.rho_mode {
        RhoMode::Scalar => names.push("rho".into()),
        RhoMode::PerMaturity => names.extend((1..=n_maturities).map(|i| format!("rho_{i}"))),
    }
    names
}

struct Evaluated<T: Real> {
    candidate: Candidate<T>,
    fit: XiFit<T>,
    loss: LossBreakdown<T>,
}

fn evaluate<T: Real>(engine: &Engine<'_, T>, theta: &[f64]) -> Result<Evaluated<T>> {
    let candidate = engine.candidate(theta, engine.initial_curve()?)?;
    let prep = engine.prepare(&candidate.model.variance);
    let fit = engine.fit_levels(&prep, &candidate)?;
    let loss = loss_flagged(engine.surface, &fit.model_vols, T::lit(engine.config.cutoff))?;
    Ok(Evaluated { candidate, fit, loss })
}

/// Loss of a single parameter vector, levels fitted as in [`calibrate`].
pub fn evaluate_theta<T: Real>(
    family: ModelFamily,
    surface: &QuoteSurface<T>,
    config: &CalibrationConfig,
    theta: &[f64],
) -> Result<(LossBreakdown<T>, XiFit<T>)> {
    let engine = Engine::new(family, surface, config)?;
    let e = evaluate(&engine, theta)?;
    Ok((e.loss, e.fit))
}

/// Global differential-evolution search followed by a Nelder-Mead refinement, with
/// the forward-variance levels fitted inside every evaluation.
pub fn calibrate<T: Real>(
    family: ModelFamily,
    surface: &QuoteSurface<T>,
    config: &CalibrationConfig,
) -> Result<CalibrationResult<T>> {
    let start = Instant::now();
    let engine = Engine::new(family, surface, config)?;
    let bounds = config.search_bounds(family, engine.n_maturities());
    let deadline = config.timeout_seconds.map(Duration::from_secs_f64);
    let stop = || deadline.is_some_and(|d| start.elapsed() >= d);

    let mut best: Option<(Vec<f64>, Evaluated<T>)> = None;
    let mut error = None;
    let mut objective = |theta: &[f64]| -> f64 {
        match evaluate(&engine, theta) {
            Ok(e) => {
                let f = e.loss.total.f64();
                let f = if f.is_finite() { f } else { f64::INFINITY };
                if best.as_ref().is_none_or(|(_, b)| f < b.loss.total.f64()) {
                    best = Some((theta.to_vec(), e));
                }
                f
            }
            Err(crate::Error::InvalidParam(_)) => f64::INFINITY,
            Err(err) => {
                error.get_or_insert(err);
                f64::INFINITY
            }
        }
    };
    let global = differential_evolution(
        &bounds,
        config.global_budget,
        derive_seed(config.seed, TAG_SEARCH),
        &mut objective,
        &stop,
    );
    let local = nelder_mead(&global.x, global.f, &bounds, config.local_budget, &mut objective, &stop);
    if let Some(err) = error {
        return Err(err);
    }
    let timed_out = stop();
    let (theta, e) = best.ok_or_else(|| invalid("no admissible parameter vector was evaluated"))?;
    let curve = e.fit.curve.clone();
    let model = ModelSpec::new(e.candidate.model.variance.with_curve(curve.clone()), e.candidate.model.spot);
    Ok(CalibrationResult {
        family,
        names: parameter_names(family, config, engine.n_maturities()),
        theta,
        model,
        curve,
        rho: e.candidate.rhos,
        loss: e.loss,
        model_vols: e.fit.model_vols,
        bracket_flags: e.fit.bracket_flags,
        evaluations: global.evaluations + local.evaluations,
        timed_out,
        config: config.clone(),
        wall_time: start.elapsed(),
    })
}

/// [`calibrate`] with one correlation per maturity.
pub fn calibrate_rho_curve<T: Real>(
    family: ModelFamily,
    surface: &QuoteSurface<T>,
    config: &CalibrationConfig,
) -> Result<CalibrationResult<T>> {
    if config.rho_mode != RhoMode::PerMaturity {
        return Err(invalid("per-maturity correlation mode required"));
    }
    calibrate(family, surface, config)
}

/// Correlation applied to the spot process of the maturity ending at `t`.
fn rho_for(corr: &Correlation<impl Real>, t: f64) -> f64 {
    match corr {
        Correlation::Scalar(r) => r.f64(),
        Correlation::Piecewise { breaks, values } => {
            let i = breaks.partition_point(|b| b.f64() < t);
            values[i.min(values.len() - 1)].f64()
        }
    }
}

fn candidate_from<T: Real>(engine: &Engine<'_, T>, model: &ModelSpec<T>, curve: ForwardVarianceCurve<T>) -> Candidate<T> {
    let rhos = engine
        .surface
        .maturities()
        .iter()
        .map(|t| T::lit(rho_for(&model.spot.corr, t.f64())))
        .collect();
    let model = ModelSpec::new(model.variance.with_curve(curve), model.spot.clone());
    Candidate { model, rhos }
}

/// Fits the forward-variance levels for a model with fixed constant parameters. The
/// model's own curve is ignored; knots are placed at the surface maturities.
pub fn fit_xi0<T: Real>(model: &ModelSpec<T>, surface: &QuoteSurface<T>, config: &CalibrationConfig) -> Result<XiFit<T>> {
    model.validate()?;
    let family = ModelFamily::of(&model.variance);
    let engine = Engine::new(family, surface, config)?;
    let cand = candidate_from(&engine, model, engine.initial_curve()?);
    let prep = engine.prepare(&cand.model.variance);
    engine.fit_levels(&prep, &cand)
}

/// Model ATM vol at maturity `i` for each level in `levels`, other levels at their
/// initial values. Used to check monotonicity before trusting the bisection.
pub fn atm_level_sweep<T: Real>(
    model: &ModelSpec<T>,
    surface: &QuoteSurface<T>,
    config: &CalibrationConfig,
    i: usize,
    levels: &[T],
) -> Result<Vec<T>> {
    model.validate()?;
    let engine = Engine::new(ModelFamily::of(&model.variance), surface, config)?;
    if i >= engine.n_maturities() {
        return Err(crate::Error::Index { index: i, len: engine.n_maturities() });
    }
    let curve = engine.initial_curve()?;
    let cand = candidate_from(&engine, model, curve.clone());
    let prep = engine.prepare(&cand.model.variance);
    levels
        .iter()
        .map(|&l| engine.atm_vol_at_level(&prep, &cand, &curve, i, l))
        .collect()
}

/// Re-prices the surface from a stored result (parameters, curve and seed) and
/// recomputes its loss.
pub fn reprice<T: Real>(result: &CalibrationResult<T>, surface: &QuoteSurface<T>) -> Result<LossBreakdown<T>> {
    let engine = Engine::new(result.family, surface, &result.config)?;
    let cand = Candidate {
        model: result.model.clone(),
        rhos: result.rho.clone(),
    };
    let prep = engine.prepare(&cand.model.variance);
    let vols = engine.reprice(&prep, &cand)?;
    loss_flagged(surface, &vols, T::lit(result.config.cutoff))
}

/// Model vols for every quote of `surface` under a fully specified model, simulated
/// with the mesh and seed of `config`.
pub fn surface_vols<T: Real>(
    model: &ModelSpec<T>,
    surface: &QuoteSurface<T>,
    config: &CalibrationConfig,
) -> Result<Vec<Vec<QuoteVol<T>>>> {
    model.validate()?;
    let engine = Engine::new(ModelFamily::of(&model.variance), surface, config)?;
    let cand = candidate_from(&engine, model, model.variance.curve().clone());
    let prep = engine.prepare(&cand.model.variance);
    engine.reprice(&prep, &cand)
}

/// Replaces the market vols of `skeleton` with the vols of `model`; every quote must
/// be invertible.
pub fn synthetic_surface<T: Real>(
    model: &ModelSpec<T>,
    skeleton: &QuoteSurface<T>,
    config: &CalibrationConfig,
) -> Result<QuoteSurface<T>> {
    let vols = surface_vols(model, skeleton, config)?;
    let mut out = skeleton.clone();
    for (i, (row, qs)) in vols.iter().zip(out.quotes.iter_mut()).enumerate() {
        for (v, q) in row.iter().zip(qs.iter_mut()) {
            if v.failed {
                return Err(invalid(format!("strike {} at maturity {i} is not invertible", q.strike)));
            }
            q.mkt_vol = v.vol;
        }
    }
    out.validate()?;
    Ok(out)
}
