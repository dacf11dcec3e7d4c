//! Monte Carlo paths of the variance process and the normalized fictitious spot.

mod grid;
mod kernel;
mod models;
mod output;
pub(crate) mod resolvent;
mod rng;
pub(crate) mod variance;

use std::collections::BTreeMap;

use ndarray::Array2;
use rayon::prelude::*;

pub use grid::{DualMeshPlan, Mesh, SimPlan, TimeGrid};
pub use models::{
    BergomiParams, Correlation, HestonParams, ModelSpec, RBergomiParams, RHestonParams, RHestonScheme,
    SpotParams, VarianceModel, DEFAULT_MEAN_REVERSION,
};
pub use output::{write_paths_csv, write_summary_csv};
pub use rng::derive_seed;
pub(crate) use rng::{spot_normals, variance_normals};
pub(crate) use variance::{Scratch, VarianceKernel};

use crate::error::{invalid, Result};
use crate::real::Real;

/// Simulated spot and variance paths on one grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PathBatch<T: Real> {
    pub grid: TimeGrid<T>,
    /// `N x (K + 1)` normalized spot values, `s[., 0] = 1`.
    pub s: Array2<T>,
    /// `N x (K + 1)` spot variances.
    pub v: Array2<T>,
    pub seed: u64,
    pub n_paths: usize,
    /// Fraction of variance nodes where a negative value was truncated to zero.
    pub truncated_fraction: f64,
}

impl<T: Real> PathBatch<T> {
    /// Spot values at grid node `k` across paths.
    pub fn spot_at(&self, k: usize) -> ndarray::ArrayView1<'_, T> {
        self.s.column(k)
    }
}

/// Variance paths with the Brownian increments that correlate the spot.
#[derive(Debug, Clone, PartialEq)]
pub struct VariancePaths<T: Real> {
    pub v: Array2<T>,
    pub dw: Array2<T>,
    pub truncated_fraction: f64,
}

fn check_shape<T: Real>(grid: &TimeGrid<T>, v: &Array2<T>, dw: &Array2<T>) -> Result<()> {
    let k = grid.n_steps();
    if v.ncols() != k + 1 || dw.ncols() != k || v.nrows() != dw.nrows() {
        return Err(invalid(format!(
            "shape mismatch: grid has {k} steps, v is {:?}, dW is {:?}",
            v.dim(),
            dw.dim()
        )));
    }
    Ok(())
}

fn check_paths(n_paths: usize) -> Result<()> {
    if n_paths == 0 {
        Err(invalid("n_paths must be positive"))
    } else {
        Ok(())
    }
}

/// Euler step of the spot with absorption at zero; `rho` gives the correlation in force at node `k`.
pub(crate) fn spot_row<T: Real>(
    a: T,
    rho: impl Fn(usize) -> T,
    grid: &TimeGrid<T>,
    v: &[T],
    dw: &[T],
    zp: &[T],
    s: &mut [T],
) {
    let n = s.len() - 1;
    s[0] = T::one();
    for k in 0..n {
        let r = rho(k);
        let dt = grid.dt(k);
        let perp = (T::one() - r * r).max(T::zero()).sqrt() * dt.sqrt() * zp[k];
        let sk = s[k];
        let next = sk + a * (T::one() - sk) * dt + v[k].max(T::zero()).sqrt() * sk * (r * dw[k] + perp);
        s[k + 1] = next.max(T::zero());
    }
}

/// Per-node correlation values for a grid.
pub(crate) fn rho_on_grid<T: Real>(corr: &Correlation<T>, grid: &TimeGrid<T>) -> Vec<T> {
    grid.times().iter().map(|&t| corr.at(t)).collect()
}

/// Paths of `W~_t = sqrt(2H) int_0^t (t - s)^(H - 1/2) dW_s` and the increments `dW`.
pub fn volterra_paths<T: Real>(
    hurst: T,
    grid: &TimeGrid<T>,
    n_paths: usize,
    seed: u64,
) -> Result<(Array2<T>, Array2<T>)> {
    check_paths(n_paths)?;
    let params = RBergomiParams {
        hurst,
        eta: T::zero(),
        xi0: crate::ForwardVarianceCurve::constant(T::one())?,
    };
    params.validate()?;
    let kernel = VarianceKernel::new(&VarianceModel::RBergomi(params), grid);
    let k = grid.n_steps();
    let mut w = Array2::zeros((n_paths, k + 1));
    let mut dw = Array2::zeros((n_paths, k));
    rows2(&mut w, &mut dw)
        .enumerate()
        .for_each_init(
            || (vec![T::zero(); 2 * k], Scratch::default()),
            |(z, scratch), (j, (wr, dr))| {
                variance_normals(seed, j, z);
                kernel.volterra(z, dr, wr, scratch);
            },
        );
    Ok((w, dw))
}

/// `v = xi0(t) exp(eta W~ - eta^2 t^(2H) / 2)` from precomputed Volterra paths.
pub fn rbergomi_variance<T: Real>(params: &RBergomiParams<T>, wtilde: &Array2<T>, grid: &TimeGrid<T>) -> Result<Array2<T>> {
    params.validate()?;
    if wtilde.ncols() != grid.n_steps() + 1 {
        return Err(invalid("Volterra paths do not match the grid"));
    }
    let two_h = params.hurst + params.hurst;
    let half = T::lit(0.5);
    let eta = params.eta;
    let xi: Vec<T> = params.xi0.sample(grid.times());
    let comp: Vec<T> = grid.times().iter().map(|&t| half * eta * eta * t.powf(two_h)).collect();
    let mut v = wtilde.clone();
    for mut row in v.rows_mut() {
        for (k, x) in row.iter_mut().enumerate() {
            *x = xi[k] * (eta * *x - comp[k]).exp();
        }
    }
    Ok(v)
}

/// Variance paths for any model family, with the increments that drive the spot.
pub fn variance_paths<T: Real>(
    model: &VarianceModel<T>,
    grid: &TimeGrid<T>,
    n_paths: usize,
    seed: u64,
) -> Result<VariancePaths<T>> {
    check_paths(n_paths)?;
    model.validate()?;
    let kernel = VarianceKernel::new(model, grid);
    let curve = model.curve().sample(grid.times());
    let k = grid.n_steps();
    let mut v = Array2::zeros((n_paths, k + 1));
    let mut dw = Array2::zeros((n_paths, k));
    let truncated: usize = rows2(&mut v, &mut dw)
        .enumerate()
        .map_init(
            || (vec![T::zero(); 2 * k], Scratch::default()),
            |(z, scratch), (j, (vr, dr))| {
                variance_normals(seed, j, z);
                kernel.fill(&curve, z, vr, dr, scratch)
            },
        )
        .sum();
    Ok(VariancePaths {
        v,
        dw,
        truncated_fraction: truncated as f64 / (n_paths * (k + 1)) as f64,
    })
}

/// Rough Heston variance (HQE or Volterra-Euler, per `params.scheme`).
pub fn rheston_variance<T: Real>(
    params: &RHestonParams<T>,
    grid: &TimeGrid<T>,
    n_paths: usize,
    seed: u64,
) -> Result<VariancePaths<T>> {
    variance_paths(&VarianceModel::RHeston(params.clone()), grid, n_paths, seed)
}

/// Classical Bergomi (exact OU steps) or Heston (full-truncation Euler).
pub fn classical_variance<T: Real>(
    model: &VarianceModel<T>,
    grid: &TimeGrid<T>,
    n_paths: usize,
    seed: u64,
) -> Result<VariancePaths<T>> {
    match model {
        VarianceModel::Bergomi(_) | VarianceModel::Heston(_) => variance_paths(model, grid, n_paths, seed),
        other => Err(invalid(format!("{} is not a classical model", other.name()))),
    }
}

/// Spot paths driven by given variance paths and their increments.
pub fn spot_paths<T: Real>(
    spot: &SpotParams<T>,
    variance: &VariancePaths<T>,
    grid: &TimeGrid<T>,
    seed: u64,
) -> Result<PathBatch<T>> {
    spot.validate()?;
    check_shape(grid, &variance.v, &variance.dw)?;
    let n_paths = variance.v.nrows();
    let k = grid.n_steps();
    let rho = rho_on_grid(&spot.corr, grid);
    let a = spot.mean_reversion;
    let mut s = Array2::zeros((n_paths, k + 1));
    par_rows(&mut s)
        .zip(variance.v.as_slice().expect("standard layout").par_chunks(k + 1))
        .zip(variance.dw.as_slice().expect("standard layout").par_chunks(k.max(1)))
        .enumerate()
        .for_each_init(
            || vec![T::zero(); k],
            |zp, (j, ((sr, vr), dr))| {
                spot_normals(seed, j, zp);
                spot_row(a, |i| rho[i], grid, vr, dr, zp, sr);
            },
        );
    Ok(PathBatch {
        grid: grid.clone(),
        s,
        v: variance.v.clone(),
        seed,
        n_paths,
        truncated_fraction: variance.truncated_fraction,
    })
}

/// Seed used for one mesh of a plan.
pub fn mesh_seed(seed: u64, mesh: Mesh) -> u64 {
    match mesh {
        Mesh::Single => seed,
        Mesh::Fine => derive_seed(seed, rng::TAG_FINE),
        Mesh::Coarse => derive_seed(seed, rng::TAG_COARSE),
    }
}

/// One batch per mesh; deterministic in `(model, plan, n_paths, seed)`.
pub fn simulate<T: Real>(
    model: &ModelSpec<T>,
    plan: &SimPlan<T>,
    n_paths: usize,
    seed: u64,
) -> Result<BTreeMap<Mesh, PathBatch<T>>> {
    model.validate()?;
    let mut out = BTreeMap::new();
    for (mesh, grid) in plan.meshes() {
        out.insert(mesh, simulate_grid(model, grid, n_paths, mesh_seed(seed, mesh))?);
    }
    Ok(out)
}

/// Single-grid simulation; the variance and spot are produced row by row without
/// materializing the increments.
pub fn simulate_grid<T: Real>(model: &ModelSpec<T>, grid: &TimeGrid<T>, n_paths: usize, seed: u64) -> Result<PathBatch<T>> {
    check_paths(n_paths)?;
    model.validate()?;
    let kernel = VarianceKernel::new(&model.variance, grid);
    let curve = model.variance.curve().sample(grid.times());
    let rho = rho_on_grid(&model.spot.corr, grid);
    let a = model.spot.mean_reversion;
    let k = grid.n_steps();
    let mut s = Array2::zeros((n_paths, k + 1));
    let mut v = Array2::zeros((n_paths, k + 1));
    let truncated: usize = rows2(&mut s, &mut v)
        .enumerate()
        .map_init(
            || (vec![T::zero(); 2 * k], vec![T::zero(); k], vec![T::zero(); k], Scratch::default()),
            |(z, zp, dw, scratch), (j, (sr, vr))| {
                variance_normals(seed, j, z);
                let t = kernel.fill(&curve, z, vr, dw, scratch);
                spot_normals(seed, j, zp);
                spot_row(a, |i| rho[i], grid, vr, dw, zp, sr);
                t
            },
        )
        .sum();
    Ok(PathBatch {
        grid: grid.clone(),
        s,
        v,
        seed,
        n_paths,
        truncated_fraction: truncated as f64 / (n_paths * (k + 1)) as f64,
    })
}

fn par_rows<T: Real>(m: &mut Array2<T>) -> rayon::slice::ChunksMut<'_, T> {
    let cols = m.ncols().max(1);
    m.as_slice_mut().expect("standard layout").par_chunks_mut(cols)
}

fn rows2<'a, T: Real>(
    a: &'a mut Array2<T>,
    b: &'a mut Array2<T>,
) -> rayon::iter::Zip<rayon::slice::ChunksMut<'a, T>, rayon::slice::ChunksMut<'a, T>> {
    par_rows(a).zip(par_rows(b))
}

#[cfg(test)]
mod tests;
