use super::*;
use crate::ForwardVarianceCurve;

fn flat(v: f64) -> ForwardVarianceCurve<f64> {
    ForwardVarianceCurve::constant(v).unwrap()
}

fn mean_var(xs: impl Iterator<Item = f64>) -> (f64, f64, usize) {
    let v: Vec<f64> = xs.collect();
    let n = v.len();
    let m = v.iter().sum::<f64>() / n as f64;
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1) as f64;
    (m, var, n)
}

fn rbergomi(h: f64, eta: f64, rho: f64) -> ModelSpec<f64> {
    ModelSpec::new(
        VarianceModel::RBergomi(RBergomiParams { hurst: h, eta, xi0: flat(0.04) }),
        SpotParams::new(0.5, rho),
    )
}

#[test]
fn brownian_limit_is_cumulative_sum() {
    let g = TimeGrid::uniform(1.0, 50).unwrap();
    let (w, dw) = volterra_paths(0.5, &g, 20, 3).unwrap();
    for j in 0..20 {
        let mut c = 0.0_f64;
        assert_eq!(w[[j, 0]], 0.0);
        for k in 0..50 {
            c += dw[[j, k]];
            assert!((w[[j, k + 1]] - c).abs() < 1e-12);
        }
    }
}

#[test]
fn volterra_variance_rough() {
    let g = TimeGrid::uniform(1.0, 100).unwrap();
    let n = 20_000;
    let (w, _) = volterra_paths(0.1, &g, n, 11).unwrap();
    let (_, var, _) = mean_var(w.column(100).iter().copied());
    // SE of a sample variance of a Gaussian: var * sqrt(2 / n)
    let se = (2.0 / n as f64).sqrt();
    assert!((var - 1.0).abs() < 4.0 * se, "var {var}");
    assert!(volterra_paths(1.0, &g, 10, 1).is_err());
}

#[test]
fn zero_vol_of_vol_reproduces_curve() {
    let g = TimeGrid::uniform(1.0, 20).unwrap();
    let curve = ForwardVarianceCurve::new(0.04, vec![0.5, 1.0], vec![0.06, 0.05]).unwrap();
    let expect = curve.sample(g.times());
    let models = vec![
        VarianceModel::RBergomi(RBergomiParams { hurst: 0.1, eta: 0.0, xi0: curve.clone() }),
        VarianceModel::Bergomi(BergomiParams { eta: 0.0, kappa: 3.0, xi0: curve.clone() }),
        VarianceModel::RHeston(RHestonParams {
            hurst: 0.2,
            eta: 0.0,
            kappa: 2.0,
            xi0: curve.clone(),
            scheme: RHestonScheme::Euler,
        }),
        VarianceModel::RHeston(RHestonParams {
            hurst: 0.2,
            eta: 0.0,
            kappa: 2.0,
            xi0: curve.clone(),
            scheme: RHestonScheme::Hqe,
        }),
    ];
    for m in models {
        let p = variance_paths(&m, &g, 5, 1).unwrap();
        for row in p.v.rows() {
            for (k, &x) in row.iter().enumerate() {
                assert!(f64::abs(x - expect[k]) < 1e-14, "{}: {x} vs {}", m.name(), expect[k]);
            }
        }
    }
}

#[test]
fn rbergomi_variance_matches_fused_kernel() {
    let g = TimeGrid::uniform(0.5, 40).unwrap();
    let params = RBergomiParams { hurst: 0.1, eta: 1.5, xi0: flat(0.04) };
    let (w, _) = volterra_paths(0.1, &g, 30, 5).unwrap();
    let v = rbergomi_variance(&params, &w, &g).unwrap();
    let fused = variance_paths(&VarianceModel::RBergomi(params), &g, 30, 5).unwrap();
    assert_eq!(v, fused.v);
}

#[test]
fn bergomi_without_reversion_equals_brownian_rbergomi() {
    let g = TimeGrid::uniform(1.0, 50).unwrap();
    let rb = variance_paths(&VarianceModel::RBergomi(RBergomiParams { hurst: 0.5, eta: 1.0, xi0: flat(0.04) }), &g, 50, 9).unwrap();
    let b = variance_paths(&VarianceModel::Bergomi(BergomiParams { eta: 1.0, kappa: 0.0, xi0: flat(0.04) }), &g, 50, 9).unwrap();
    assert_eq!(rb.dw, b.dw);
    for (x, y) in rb.v.iter().zip(b.v.iter()) {
        assert!((x / y - 1.0).abs() < 1e-12);
    }
}

#[test]
fn deterministic_heston_relaxes_exponentially() {
    let n = 400;
    let g = TimeGrid::uniform(1.0, n).unwrap();
    let (kappa, v0, vbar) = (2.0, 0.09, 0.04);
    let m = VarianceModel::Heston(HestonParams { eta: 0.0, kappa, v0, vbar: flat(vbar) });
    let p = variance_paths(&m, &g, 2, 1).unwrap();
    for (k, &t) in g.times().iter().enumerate() {
        let exact = vbar + (v0 - vbar) * (-kappa * t).exp();
        assert!((p.v[[0, k]] - exact).abs() < 2.0 * kappa * (v0 - vbar) / n as f64);
    }
}

#[test]
fn zero_variance_keeps_spot_at_one() {
    let g = TimeGrid::uniform(1.0, 10).unwrap();
    let m = ModelSpec::new(
        VarianceModel::Bergomi(BergomiParams { eta: 1.0, kappa: 1.0, xi0: flat(0.0) }),
        SpotParams::new(0.5, -0.5),
    );
    let b = simulate_grid(&m, &g, 10, 3).unwrap();
    assert!(b.s.iter().all(|&x| x == 1.0));
}

#[test]
fn single_bucket_equals_scalar() {
    let g = TimeGrid::uniform(1.0, 30).unwrap();
    let scalar = rbergomi(0.1, 1.5, -0.3);
    let mut piece = scalar.clone();
    piece.spot.corr = Correlation::Piecewise { breaks: vec![1.0], values: vec![-0.3] };
    let a = simulate_grid(&scalar, &g, 40, 8).unwrap();
    let b = simulate_grid(&piece, &g, 40, 8).unwrap();
    assert_eq!(a.s, b.s);
}

#[test]
fn fused_simulation_equals_staged_pipeline() {
    let g = TimeGrid::uniform(1.0, 30).unwrap();
    let m = ModelSpec::new(
        VarianceModel::RHeston(RHestonParams { hurst: 0.3, eta: 1.0, kappa: 2.0, xi0: flat(0.04), scheme: RHestonScheme::Hqe }),
        SpotParams::new(0.5, -0.4),
    );
    let fused = simulate_grid(&m, &g, 25, 4).unwrap();
    let staged = spot_paths(&m.spot, &variance_paths(&m.variance, &g, 25, 4).unwrap(), &g, 4).unwrap();
    assert_eq!(fused, staged);
}

#[test]
fn plans_and_determinism() {
    let m = rbergomi(0.1, 1.5, -0.3);
    let single = SimPlan::single_for(&[0.25, 0.5], 50).unwrap();
    let out = simulate(&m, &single, 20, 1).unwrap();
    assert_eq!(out.len(), 1);
    let dual = SimPlan::Dual(DualMeshPlan::new(&[0.1, 0.25, 0.5], 200, 50).unwrap());
    let out = simulate(&m, &dual, 20, 1).unwrap();
    assert_eq!(out.len(), 2);
    assert_eq!(out[&Mesh::Fine].grid.horizon(), 0.1);
    assert_ne!(out[&Mesh::Fine].seed, out[&Mesh::Coarse].seed);
    let again = simulate(&m, &dual, 20, 1).unwrap();
    assert_eq!(out, again);
}

#[test]
fn thread_count_does_not_change_paths() {
    let g = TimeGrid::uniform(1.0, 40).unwrap();
    let m = rbergomi(0.1, 1.5, -0.3);
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| simulate_grid(&m, &g, 64, 21).unwrap())
    };
    assert_eq!(run(1), run(4));
}

#[test]
fn spot_mean_is_one() {
    let g = TimeGrid::uniform(1.0, 50).unwrap();
    let models = vec![
        rbergomi(0.1, 1.5, -0.3),
        ModelSpec::new(
            VarianceModel::RHeston(RHestonParams { hurst: 0.3, eta: 0.5, kappa: 2.0, xi0: flat(0.04), scheme: RHestonScheme::Hqe }),
            SpotParams::new(0.5, -0.3),
        ),
        ModelSpec::new(
            VarianceModel::Heston(HestonParams { eta: 0.5, kappa: 2.0, v0: 0.04, vbar: flat(0.04) }),
            SpotParams::new(0.5, -0.3),
        ),
    ];
    for m in models {
        let b = simulate_grid(&m, &g, 4000, 17).unwrap();
        for k in [25, 50] {
            let (mean, var, n) = mean_var(b.s.column(k).iter().copied());
            let se = (var / n as f64).sqrt();
            assert!((mean - 1.0).abs() < 4.0 * se, "{} t={}: {mean} +- {se}", m.variance.name(), g.times()[k]);
        }
    }
}

#[test]
fn works_in_single_precision() {
    let g = TimeGrid::<f32>::uniform(1.0, 20).unwrap();
    let m = ModelSpec::new(
        VarianceModel::RBergomi(RBergomiParams { hurst: 0.1_f32, eta: 1.5, xi0: ForwardVarianceCurve::constant(0.04).unwrap() }),
        SpotParams::new(0.5_f32, -0.3),
    );
    let b = simulate_grid(&m, &g, 100, 2).unwrap();
    assert!(b.s.iter().all(|x| x.is_finite() && *x >= 0.0));
}
