//! Simulation state shared by every evaluation of one calibration run.
//!
//! The random normals for each mesh are drawn once from the configured seed, so the
//! loss is a deterministic function of the parameters (common random numbers across
//! candidates and across bisection steps).

use ndarray::{Array2, ArrayView1};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{CalibrationConfig, ModelFamily, MeshConfig, RhoMode};
use super::loss::QuoteVol;
use crate::error::{invalid, Result};
use crate::fv_curve::ForwardVarianceCurve;
use crate::market_data::QuoteSurface;
use crate::pricing::{price_from_spots, smile_point, BandSide, McOptions, VanillaSpec};
use crate::real::Real;
use crate::sim::{
    mesh_seed, spot_normals, spot_row, variance_normals, BergomiParams, Correlation, DualMeshPlan, HestonParams,
    ModelSpec, RBergomiParams, RHestonParams, Scratch, SimPlan, SpotParams, TimeGrid, VarianceKernel,
    VarianceModel,
};

struct MeshData<T: Real> {
    grid: TimeGrid<T>,
    z: Array2<T>,
    zp: Array2<T>,
}

/// Per-candidate precomputation: kernels, and for multiplicative models the
/// curve-free variance factor with its increments.
pub(crate) struct Prepared<T: Real> {
    kernels: Vec<VarianceKernel<T>>,
    factors: Vec<Option<(Array2<T>, Array2<T>)>>,
}

/// A parameter vector mapped onto a model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate<T: Real> {
    pub model: ModelSpec<T>,
    /// Correlation used for each maturity's spot process.
    pub rhos: Vec<T>,
}

/// Result of the nested level fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct XiFit<T: Real> {
    pub curve: ForwardVarianceCurve<T>,
    pub model_vols: Vec<Vec<QuoteVol<T>>>,
    /// Set where the market ATM vol was not reachable inside the level bounds.
    pub bracket_flags: Vec<Option<BandSide>>,
    pub iterations: Vec<usize>,
}

pub(crate) struct Engine<'a, T: Real> {
    pub surface: &'a QuoteSurface<T>,
    pub config: &'a CalibrationConfig,
    pub family: ModelFamily,
    meshes: Vec<MeshData<T>>,
    /// `(mesh index, grid node)` per maturity.
    nodes: Vec<(usize, usize)>,
    atm: Vec<usize>,
}

fn plan_for<T: Real>(surface: &QuoteSurface<T>, mesh: MeshConfig) -> Result<SimPlan<T>> {
    let mats = surface.maturities();
    match mesh {
        MeshConfig::Single { steps_per_year } => SimPlan::single_for(&mats, steps_per_year),
        MeshConfig::Dual { fine, coarse } => Ok(SimPlan::Dual(DualMeshPlan::new(&mats, fine, coarse)?)),
    }
}

impl<'a, T: Real> Engine<'a, T> {
    pub fn new(family: ModelFamily, surface: &'a QuoteSurface<T>, config: &'a CalibrationConfig) -> Result<Self> {
        config.validate(family)?;
        surface.validate()?;
        let plan = plan_for(surface, config.mesh)?;
        let n = config.n_paths;
        let meshes_list = plan.meshes();
        let mut meshes = Vec::with_capacity(meshes_list.len());
        for (mesh, grid) in &meshes_list {
            let seed = mesh_seed(config.seed, *mesh);
            let k = grid.n_steps();
            let mut z = Array2::zeros((n, 2 * k));
            let mut zp = Array2::zeros((n, k));
            z.as_slice_mut()
                .expect("standard layout")
                .par_chunks_mut(2 * k)
                .zip(zp.as_slice_mut().expect("standard layout").par_chunks_mut(k))
                .enumerate()
                .for_each(|(j, (zr, pr))| {
                    variance_normals(seed, j, zr);
                    spot_normals(seed, j, pr);
                });
            meshes.push(MeshData {
                grid: (*grid).clone(),
                z,
                zp,
            });
        }
        let mut nodes = Vec::new();
        for t in surface.maturities() {
            let (mesh, grid) = plan.locate(t).ok_or_else(|| invalid(format!("maturity {t} not on any mesh")))?;
            let m = meshes_list.iter().position(|(x, _)| *x == mesh).expect("mesh listed");
            nodes.push((m, grid.index_of(t).expect("maturity is a node")));
        }
        let atm = (0..surface.n_maturities()).map(|i| surface.atm_index(i)).collect();
        Ok(Self {
            surface,
            config,
            family,
            meshes,
            nodes,
            atm,
        })
    }

    pub fn n_maturities(&self) -> usize {
        self.nodes.len()
    }

    /// Initial flat-start curve with the market ATM variances as levels.
    pub fn initial_curve(&self) -> Result<ForwardVarianceCurve<T>> {
        let (lo, hi) = self.config.level_bounds;
        let knots = self.surface.maturities();
        let levels: Vec<T> = (0..self.n_maturities())
            .map(|i| {
                let v = self.surface.quotes[i][self.atm[i]].mkt_vol;
                (v * v).max(T::lit(lo)).min(T::lit(hi))
            })
            .collect();
        match self.config.xi0_left {
            Some(left) => ForwardVarianceCurve::new(T::lit(left), knots, levels),
            None => ForwardVarianceCurve::flat_start(knots, levels),
        }
    }

    /// Maps a parameter vector (base parameters then correlations) to a model.
    pub fn candidate(&self, theta: &[f64], curve: ForwardVarianceCurve<T>) -> Result<Candidate<T>> {
        let nb = self.family.base_names().len();
        let m = self.n_maturities();
        let n_rho = match self.config.rho_mode {
            RhoMode::Scalar => 1,
            RhoMode::PerMaturity => m,
        };
        if theta.len() != nb + n_rho {
            return Err(invalid(format!("expected {} parameters, got {}", nb + n_rho, theta.len())));
        }
        let p = |i: usize| T::lit(theta[i]);
        let variance = match self.family {
            ModelFamily::RBergomi => VarianceModel::RBergomi(RBergomiParams {
                hurst: p(0),
                eta: p(1),
                xi0: curve,
            }),
            ModelFamily::RHeston => VarianceModel::RHeston(RHestonParams {
                hurst: p(0),
                eta: p(1),
                kappa: p(2),
                xi0: curve,
                scheme: self.config.rheston_scheme,
            }),
            ModelFamily::Bergomi => VarianceModel::Bergomi(BergomiParams {
                eta: p(0),
                kappa: p(1),
                xi0: curve,
            }),
            ModelFamily::Heston => VarianceModel::Heston(HestonParams {
                eta: p(0),
                kappa: p(1),
                v0: p(2),
                vbar: curve,
            }),
        };
        let rho_vals: Vec<T> = theta[nb..].iter().map(|&r| T::lit(r)).collect();
        let (corr, rhos) = match self.config.rho_mode {
            RhoMode::Scalar => (Correlation::Scalar(rho_vals[0]), vec![rho_vals[0]; m]),
            RhoMode::PerMaturity => (
                Correlation::Piecewise {
                    breaks: self.surface.maturities(),
                    values: rho_vals.clone(),
                },
                rho_vals,
            ),
        };
        let model = ModelSpec::new(
            variance,
            SpotParams {
                mean_reversion: T::lit(self.config.mean_reversion),
                corr,
            },
        );
        model.validate()?;
        Ok(Candidate { model, rhos })
    }

    pub fn prepare(&self, variance: &VarianceModel<T>) -> Prepared<T> {
        let mut kernels = Vec::new();
        let mut factors = Vec::new();
        for md in &self.meshes {
            let kernel = VarianceKernel::new(variance, &md.grid);
            let factor = kernel.is_multiplicative().then(|| {
                let k = md.grid.n_steps();
                let n = md.z.nrows();
                let mut y = Array2::zeros((n, k + 1));
                let mut dw = Array2::zeros((n, k));
                y.as_slice_mut()
                    .expect("standard layout")
                    .par_chunks_mut(k + 1)
                    .zip(dw.as_slice_mut().expect("standard layout").par_chunks_mut(k))
                    .zip(md.z.as_slice().expect("standard layout").par_chunks(2 * k))
                    .for_each_init(Scratch::default, |scratch, ((yr, dr), zr)| {
                        kernel.factor(zr, yr, dr, scratch);
                    });
                (y, dw)
            });
            kernels.push(kernel);
            factors.push(factor);
        }
        Prepared { kernels, factors }
    }

    /// Spot values at maturity `i` on every path, for the given curve.
    fn terminal_spots(&self, prep: &Prepared<T>, i: usize, curve: &ForwardVarianceCurve<T>, rho: T) -> Vec<T> {
        let (m, k) = self.nodes[i];
        let md = &self.meshes[m];
        let grid = &md.grid;
        let samples = curve.sample(&grid.times()[..=k]);
        let a = T::lit(self.config.mean_reversion);
        let kernel = &prep.kernels[m];
        let factor = prep.factors[m].as_ref();
        let kk = grid.n_steps();
        (0..md.z.nrows())
            .into_par_iter()
            .map_init(
                || (Scratch::default(), vec![T::zero(); kk + 1], vec![T::zero(); kk], vec![T::zero(); kk + 1]),
                |(scratch, v, dw, s), row| {
                    let zp = md.zp.row(row);
                    let zp = zp.as_slice().expect("standard layout");
                    match factor {
                        Some((y, dwm)) => {
                            let y = y.row(row);
                            for j in 0..=k {
                                v[j] = samples[j] * y[j];
                            }
                            let dr = dwm.row(row);
                            spot_row(a, |_| rho, grid, &v[..=k], &dr.as_slice().expect("standard layout")[..k], &zp[..k], &mut s[..=k]);
                        }
                        None => {
                            let z = md.z.row(row);
                            kernel.fill(&samples, z.as_slice().expect("standard layout"), &mut v[..=k], &mut dw[..k], scratch);
                            spot_row(a, |_| rho, grid, &v[..=k], &dw[..k], &zp[..k], &mut s[..=k]);
                        }
                    }
                    s[k]
                },
            )
            .collect()
    }

    fn spec(&self, i: usize, j: usize) -> VanillaSpec<T> {
        let c = &self.surface.contracts[i];
        let q = &self.surface.quotes[i][j];
        VanillaSpec {
            strike: q.strike,
            t_opt: c.t_opt,
            t_fut: c.t_fut,
            is_call: q.is_call,
        }
    }

    fn quote_vol(&self, spots: &[T], i: usize, j: usize) -> Result<QuoteVol<T>> {
        let spec = self.spec(i, j);
        let f0 = self.surface.contracts[i].f0;
        let a = T::lit(self.config.mean_reversion);
        let p = price_from_spots(ArrayView1::from(spots), &spec, a, f0, McOptions::default());
        let point = smile_point(&spec, f0, p.price, p.stderr)?;
        Ok(match (point.model_vol, point.band) {
            (Some(vol), _) => QuoteVol { vol, failed: false },
            (None, Some(side)) => QuoteVol {
                vol: T::lit(side.edge_vol()),
                failed: true,
            },
            (None, None) => unreachable!("smile point without vol or band"),
        })
    }

    fn maturity_vols(&self, spots: &[T], i: usize) -> Result<Vec<QuoteVol<T>>> {
        (0..self.surface.quotes[i].len()).map(|j| self.quote_vol(spots, i, j)).collect()
    }

    /// Model ATM vol at maturity `i` as a function of level `i`, other levels fixed.
    pub fn atm_vol_at_level(
        &self,
        prep: &Prepared<T>,
        cand: &Candidate<T>,
        curve: &ForwardVarianceCurve<T>,
        i: usize,
        level: T,
    ) -> Result<T> {
        let c = curve.with_level(i, level)?;
        let spots = self.terminal_spots(prep, i, &c, cand.rhos[i]);
        Ok(self.quote_vol(&spots, i, self.atm[i])?.vol)
    }

    /// Sequential bisection of each level so the model ATM vol matches the market.
    pub fn fit_levels(&self, prep: &Prepared<T>, cand: &Candidate<T>) -> Result<XiFit<T>> {
        let (lo0, hi0) = self.config.level_bounds;
        let tol = T::lit(self.config.bisection_tol);
        let mut curve = cand.model.variance.curve().clone();
        let mut model_vols = Vec::with_capacity(self.n_maturities());
        let mut flags = Vec::with_capacity(self.n_maturities());
        let mut iterations = Vec::with_capacity(self.n_maturities());
        for i in 0..self.n_maturities() {
            let target = self.surface.quotes[i][self.atm[i]].mkt_vol;
            let (mut lo, mut hi) = (lo0, hi0);
            let mut last = None;
            let mut iters = 0;
            while iters < self.config.bisection_max_iter {
                iters += 1;
                let mid = 0.5 * (lo + hi);
                let c = curve.with_level(i, T::lit(mid))?;
                let spots = self.terminal_spots(prep, i, &c, cand.rhos[i]);
                let atm = self.quote_vol(&spots, i, self.atm[i])?;
                let diff = atm.vol - target;
                last = Some((mid, spots, diff));
                if diff.abs() < tol {
                    break;
                }
                if diff < T::zero() {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let (level, spots, diff) = last.expect("at least one bisection step");
            let span = hi0 - lo0;
            let flag = if diff.abs() < tol {
                None
            } else if level - lo0 < 1e-9 * span && diff > T::zero() {
                Some(BandSide::Below)
            } else if hi0 - level < 1e-9 * span && diff < T::zero() {
                Some(BandSide::Above)
            } else {
                None
            };
            curve = curve.with_level(i, T::lit(level))?;
            model_vols.push(self.maturity_vols(&spots, i)?);
            flags.push(flag);
            iterations.push(iters);
        }
        Ok(XiFit {
            curve,
            model_vols,
            bracket_flags: flags,
            iterations,
        })
    }

    /// Model vols for a fully specified candidate (its curve included).
    pub fn reprice(&self, prep: &Prepared<T>, cand: &Candidate<T>) -> Result<Vec<Vec<QuoteVol<T>>>> {
        let curve = cand.model.variance.curve();
        (0..self.n_maturities())
            .map(|i| {
                let spots = self.terminal_spots(prep, i, curve, cand.rhos[i]);
                self.maturity_vols(&spots, i)
            })
            .collect()
    }
}
