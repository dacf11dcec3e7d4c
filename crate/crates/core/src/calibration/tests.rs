use chrono::NaiveDate;

use super::*;
use crate::fv_curve::ForwardVarianceCurve;
use crate::market_data::{FuturesContract, OptionQuote, QuoteSurface};
use crate::sim::{ModelSpec, RBergomiParams, SpotParams, VarianceModel};

fn skeleton(t_opts: &[f64], strikes: &[f64], vol: f64) -> QuoteSurface<f64> {
    let contracts = t_opts
        .iter()
        .enumerate()
        .map(|(i, &t)| FuturesContract {
            ticker: format!("CL{i}"),
            t_opt: t,
            t_fut: t + 0.02,
            f0: 100.0,
        })
        .collect();
    let quotes = t_opts
        .iter()
        .map(|_| {
            strikes
                .iter()
                .map(|&k| OptionQuote {
                    strike: k,
                    mkt_vol: vol,
                    bid_ask: 0.01,
                    volume: 100.0,
                    is_call: k >= 100.0,
                })
                .collect()
        })
        .collect();
    QuoteSurface::new(NaiveDate::from_ymd_opt(2024, 5, 1).unwrap(), contracts, quotes).unwrap()
}

fn rbergomi(h: f64, eta: f64, rho: f64, level: f64, a: f64) -> ModelSpec<f64> {
    ModelSpec::new(
        VarianceModel::RBergomi(RBergomiParams {
            hurst: h,
            eta,
            xi0: ForwardVarianceCurve::constant(level).unwrap(),
        }),
        SpotParams::new(a, rho),
    )
}

fn small_config(seed: u64) -> CalibrationConfig {
    CalibrationConfig {
        n_paths: 4000,
        mesh: MeshConfig::Single { steps_per_year: 100 },
        seed,
        global_budget: 8,
        local_budget: 4,
        bisection_tol: 1e-3,
        bounds: Some(vec![(0.05, 0.45), (0.5, 2.5)]),
        rho_bounds: Some((-0.9, -0.1)),
        ..Default::default()
    }
}

#[test]
fn black_exactness_of_level_fit() {
    let sigma = 0.3;
    let surface = skeleton(&[0.5], &[95.0, 100.0, 105.0], sigma);
    let config = CalibrationConfig {
        n_paths: 50_000,
        mesh: MeshConfig::Single { steps_per_year: 100 },
        mean_reversion: 0.0,
        ..Default::default()
    };
    let model = rbergomi(0.1, 0.0, -0.5, 0.01, 0.0);
    let fit = fit_xi0(&model, &surface, &config).unwrap();
    let level = fit.curve.levels()[0];
    assert!((level / (sigma * sigma) - 1.0).abs() < 0.03, "level {level}");
    assert!(fit.bracket_flags[0].is_none());
    assert!(fit.iterations[0] <= 60);
}

#[test]
fn atm_vol_monotone_in_level() {
    let surface = skeleton(&[0.25, 0.5], &[90.0, 100.0, 110.0], 0.3);
    let config = small_config(3);
    let model = rbergomi(0.1, 1.5, -0.5, 0.09, 0.5);
    for i in 0..2 {
        let sweep = atm_level_sweep(&model, &surface, &config, i, &[0.01, 0.04, 0.09, 0.2, 0.5]).unwrap();
        assert!(sweep.windows(2).all(|w| w[0] <= w[1]), "{sweep:?}");
    }
}

#[test]
fn unreachable_target_is_flagged() {
    let surface = skeleton(&[0.5], &[95.0, 100.0, 105.0], 0.3);
    let config = CalibrationConfig {
        level_bounds: (1e-4, 0.01),
        ..small_config(0)
    };
    let fit = fit_xi0(&rbergomi(0.1, 0.5, -0.5, 0.04, 0.5), &surface, &config).unwrap();
    assert_eq!(fit.bracket_flags[0], Some(crate::pricing::BandSide::Above));
    assert!(fit.curve.levels()[0] > 0.0099);
}

fn generated(t_opts: &[f64]) -> QuoteSurface<f64> {
    let base = skeleton(t_opts, &[90.0, 95.0, 100.0, 105.0, 110.0], 0.3);
    let model = rbergomi(0.15, 1.5, -0.5, 0.09, 0.5);
    synthetic_surface(&model, &base, &small_config(99)).unwrap()
}

#[test]
fn budget_of_one_evaluates_one_point() {
    let surface = generated(&[0.25]);
    let config = CalibrationConfig {
        global_budget: 1,
        local_budget: 0,
        ..small_config(5)
    };
    let r = calibrate(ModelFamily::RBergomi, &surface, &config).unwrap();
    assert_eq!(r.evaluations, 1);
    let (loss, fit) = evaluate_theta(ModelFamily::RBergomi, &surface, &config, &r.theta).unwrap();
    assert_eq!(loss, r.loss);
    assert_eq!(fit.curve, r.curve);
}

#[test]
fn deterministic_and_reproducible() {
    let surface = generated(&[0.25, 0.5]);
    let config = small_config(11);
    let a = calibrate(ModelFamily::RBergomi, &surface, &config).unwrap();
    let b = calibrate(ModelFamily::RBergomi, &surface, &config).unwrap();
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    assert!(a.evaluations <= 12);
    let again = reprice(&a, &surface).unwrap();
    assert_eq!(again, a.loss);
    let total: f64 = a.loss.per_maturity.iter().sum();
    assert!((total - a.loss.total).abs() < 1e-15);
}

#[test]
fn per_maturity_search_space() {
    let surface = generated(&[0.25, 0.5]);
    let config = CalibrationConfig {
        rho_mode: RhoMode::PerMaturity,
        ..small_config(2)
    };
    assert_eq!(config.search_bounds(ModelFamily::RBergomi, 2).len(), 4);
    assert_eq!(parameter_names(ModelFamily::RBergomi, &config, 1).len(), 3);
    assert!(calibrate_rho_curve(ModelFamily::RBergomi, &surface, &small_config(2)).is_err());
    let r = calibrate_rho_curve(ModelFamily::RBergomi, &surface, &config).unwrap();
    assert_eq!(r.rho.len(), 2);
    assert_eq!(r.rho[0], r.theta[2]);
    assert_eq!(r.rho[1], r.theta[3]);
    assert_eq!(reprice(&r, &surface).unwrap(), r.loss);
}

#[test]
fn rbergomi_rejects_nonnegative_rho() {
    let surface = generated(&[0.25]);
    let err = fit_xi0(&rbergomi(0.1, 1.0, 0.0, 0.09, 0.5), &surface, &small_config(0)).unwrap_err();
    assert!(err.to_string().contains("rho < 0"), "{err}");
    let config = CalibrationConfig {
        rho_bounds: Some((0.0, 0.5)),
        ..small_config(0)
    };
    assert!(calibrate(ModelFamily::RBergomi, &surface, &config).is_err());
}

#[test]
fn config_validation() {
    let bad = CalibrationConfig {
        global_budget: 0,
        ..Default::default()
    };
    assert!(bad.validate(ModelFamily::Heston).is_err());
    let bad = CalibrationConfig {
        bounds: Some(vec![(1.0, 0.0), (0.0, 1.0)]),
        ..Default::default()
    };
    assert!(bad.validate(ModelFamily::RBergomi).is_err());
    assert!(CalibrationConfig::default().validate(ModelFamily::RHeston).is_ok());
    let json = serde_json::to_string(&CalibrationConfig::default()).unwrap();
    let back: CalibrationConfig = serde_json::from_str(&json).unwrap();
    assert_eq!(back, CalibrationConfig::default());
}
