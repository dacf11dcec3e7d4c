//! Per-path variance recursions for the four model families.
//!
//! A [`VarianceKernel`] holds everything that depends on the model's constant
//! parameters and the grid; the forward-variance (or long-variance) curve enters
//! separately as its samples on the grid, so calibration can swap curves cheaply.
//! All recursions are causal: filling a prefix of a row gives the same values as
//! filling the whole row.

use super::grid::TimeGrid;
use super::kernel::{HybridWeights, Triangular};
use super::models::{RHestonScheme, VarianceModel};
use super::resolvent::Resolvent;
use crate::real::{gamma, norm_cdf, Real};

#[derive(Debug, Clone)]
pub(crate) enum VarianceKernel<T: Real> {
    RBergomi {
        scale: T,
        eta: T,
        weights: HybridWeights<T>,
        compensator: Vec<T>,
    },
    RHestonEuler {
        kappa: T,
        eta: T,
        weights: HybridWeights<T>,
        dt: Vec<T>,
    },
    RHestonHqe(Box<HqeTables<T>>),
    Bergomi {
        eta: T,
        decay: Vec<T>,
        sqrt_dt: Vec<T>,
        near_a: Vec<T>,
        near_b: Vec<T>,
        compensator: Vec<T>,
    },
    Heston {
        eta: T,
        kappa: T,
        v0: T,
        dt: Vec<T>,
        sqrt_dt: Vec<T>,
    },
}

#[derive(Debug, Clone)]
pub(crate) struct HqeTables<T> {
    two_h: T,
    far: Triangular<T>,
    k0: Vec<T>,
    k00: Vec<T>,
    dt: Vec<T>,
}

/// Per-row scratch space, reused across paths on one thread.
#[derive(Debug, Clone, Default)]
pub(crate) struct Scratch<T> {
    a: Vec<T>,
    b: Vec<T>,
    c: Vec<T>,
}

impl<T: Real> Scratch<T> {
    fn ensure(&mut self, n: usize) {
        for buf in [&mut self.a, &mut self.b, &mut self.c] {
            if buf.len() < n + 1 {
                buf.resize(n + 1, T::zero());
            }
        }
    }
}

fn dts<T: Real>(grid: &TimeGrid<T>) -> Vec<T> {
    (0..grid.n_steps()).map(|k| grid.dt(k)).collect()
}

impl<T: Real> VarianceKernel<T> {
    pub fn new(model: &VarianceModel<T>, grid: &TimeGrid<T>) -> Self {
        let times = grid.times();
        match model {
            VarianceModel::RBergomi(p) => {
                let h = p.hurst.f64();
                let eta = p.eta;
                let two_h = T::lit(2.0 * h);
                let compensator = times
                    .iter()
                    .map(|&t| T::lit(0.5) * eta * eta * t.powf(two_h))
                    .collect();
                VarianceKernel::RBergomi {
                    scale: T::lit((2.0 * h).sqrt()),
                    eta,
                    weights: HybridWeights::new(grid, h - 0.5),
                    compensator,
                }
            }
            VarianceModel::RHeston(p) => {
                let h = p.hurst.f64();
                match p.scheme {
                    RHestonScheme::Euler => {
                        let g = gamma(T::lit(h + 0.5));
                        VarianceKernel::RHestonEuler {
                            kappa: p.kappa / g,
                            eta: p.eta / g,
                            weights: HybridWeights::new(grid, h - 0.5),
                            dt: dts(grid),
                        }
                    }
                    RHestonScheme::Hqe => VarianceKernel::RHestonHqe(Box::new(HqeTables::new(
                        grid,
                        h,
                        p.kappa.f64(),
                        p.eta.f64(),
                    ))),
                }
            }
            VarianceModel::Bergomi(p) => {
                let kappa = p.kappa.f64();
                let n = grid.n_steps();
                let mut decay = Vec::with_capacity(n);
                let mut sqrt_dt = Vec::with_capacity(n);
                let mut near_a = Vec::with_capacity(n);
                let mut near_b = Vec::with_capacity(n);
                for k in 0..n {
                    let dt = grid.dt(k).f64();
                    let (cov, var_i) = ou_step_moments(kappa, dt);
                    decay.push(T::lit((-kappa * dt).exp()));
                    sqrt_dt.push(T::lit(dt.sqrt()));
                    near_a.push(T::lit(cov / dt));
                    near_b.push(T::lit((var_i - cov * cov / dt).max(0.0).sqrt()));
                }
                let eta = p.eta.f64();
                let compensator = times
                    .iter()
                    .map(|t| T::lit(0.5 * eta * eta * ou_variance(kappa, t.f64())))
                    .collect();
                VarianceKernel::Bergomi {
                    eta: p.eta,
                    decay,
                    sqrt_dt,
                    near_a,
                    near_b,
                    compensator,
                }
            }
            VarianceModel::Heston(p) => {
                let dt = dts(grid);
                VarianceKernel::Heston {
                    eta: p.eta,
                    kappa: p.kappa,
                    v0: p.v0,
                    sqrt_dt: dt.iter().map(|d| d.sqrt()).collect(),
                    dt,
                }
            }
        }
    }

    /// Whether `v = curve * factor` with a factor independent of the curve.
    pub fn is_multiplicative(&self) -> bool {
        matches!(self, VarianceKernel::RBergomi { .. } | VarianceKernel::Bergomi { .. })
    }

    /// Writes the Volterra integral `W~` (rough Bergomi) into `out`. Other models leave it unused.
    pub fn volterra(&self, z: &[T], dw: &mut [T], out: &mut [T], scratch: &mut Scratch<T>) {
        let n = out.len() - 1;
        scratch.ensure(n);
        if let VarianceKernel::RBergomi { scale, weights, .. } = self {
            weights.volterra_row(z, dw, &mut scratch.a, out);
            for x in out.iter_mut() {
                *x = *x * *scale;
            }
        }
    }

    /// For multiplicative models: the stochastic factor `v / curve` and the increments `dW2`.
    pub fn factor(&self, z: &[T], y: &mut [T], dw: &mut [T], scratch: &mut Scratch<T>) {
        let n = y.len() - 1;
        scratch.ensure(n);
        match self {
            VarianceKernel::RBergomi {
                scale,
                eta,
                weights,
                compensator,
            } => {
                weights.volterra_row(z, dw, &mut scratch.a, y);
                for k in 0..=n {
                    y[k] = (*eta * (*scale * y[k]) - compensator[k]).exp();
                }
            }
            VarianceKernel::Bergomi {
                eta,
                decay,
                sqrt_dt,
                near_a,
                near_b,
                compensator,
            } => {
                let mut x = T::zero();
                y[0] = (-compensator[0]).exp();
                for k in 0..n {
                    dw[k] = sqrt_dt[k] * z[2 * k];
                    let inc = near_a[k] * dw[k] + near_b[k] * z[2 * k + 1];
                    x = decay[k] * x + inc;
                    y[k + 1] = (*eta * x - compensator[k + 1]).exp();
                }
            }
            _ => unreachable!("factor() called on an additive model"),
        }
    }

    /// Fills `v` (length `n + 1`) and `dw` (length `n`) from normals `z` (length `>= 2n`).
    /// Returns the number of nodes where a negative value was truncated.
    pub fn fill(&self, curve: &[T], z: &[T], v: &mut [T], dw: &mut [T], scratch: &mut Scratch<T>) -> usize {
        let n = v.len() - 1;
        scratch.ensure(n);
        match self {
            VarianceKernel::RBergomi { .. } | VarianceKernel::Bergomi { .. } => {
                self.factor(z, v, dw, scratch);
                for k in 0..=n {
                    v[k] = curve[k] * v[k];
                }
                0
            }
            VarianceKernel::RHestonEuler { kappa, eta, weights, dt } => {
                let Scratch { a: near, b: raw, c: noise } = scratch;
                for j in 0..n {
                    dw[j] = weights.sqrt_dt[j] * z[2 * j];
                    near[j] = weights.near_a[j] * dw[j] + weights.near_b[j] * z[2 * j + 1];
                }
                raw[0] = curve[0];
                let mut truncated = 0;
                for k in 1..=n {
                    let sv = raw[k - 1].max(T::zero()).sqrt();
                    // noise[j] = sqrt(v_j+) dW_j for completed intervals
                    noise[k - 1] = sv * dw[k - 1];
                    let w = weights.far.row(k);
                    let mut drift = dt[k - 1] * w[k - 1] * (raw[k - 1].max(T::zero()) - curve[k - 1]);
                    let mut diff = sv * near[k - 1];
                    for j in 0..k - 1 {
                        drift = drift + dt[j] * w[j] * (raw[j].max(T::zero()) - curve[j]);
                        diff = diff + w[j] * noise[j];
                    }
                    raw[k] = curve[k] - *kappa * drift + *eta * diff;
                }
                for k in 0..=n {
                    if raw[k] < T::zero() {
                        truncated += 1;
                        v[k] = T::zero();
                    } else {
                        v[k] = raw[k];
                    }
                }
                truncated
            }
            VarianceKernel::RHestonHqe(tab) => tab.fill(curve, z, v, dw, &mut scratch.a),
            VarianceKernel::Heston {
                eta,
                kappa,
                v0,
                dt,
                sqrt_dt,
            } => {
                let mut raw = *v0;
                let mut truncated = 0;
                v[0] = raw.max(T::zero());
                for k in 0..n {
                    dw[k] = sqrt_dt[k] * z[2 * k];
                    let vp = raw.max(T::zero());
                    raw = raw + *kappa * (curve[k] - vp) * dt[k] + *eta * vp.sqrt() * dw[k];
                    if raw < T::zero() {
                        truncated += 1;
                    }
                    v[k + 1] = raw.max(T::zero());
                }
                truncated
            }
        }
    }
}

/// `Cov(int_0^dt e^{-kappa (dt-s)} dW_s, W_dt)` and the variance of the integral.
fn ou_step_moments(kappa: f64, dt: f64) -> (f64, f64) {
    if kappa == 0.0 {
        (dt, dt)
    } else {
        (-(-kappa * dt).exp_m1() / kappa, -(-2.0 * kappa * dt).exp_m1() / (2.0 * kappa))
    }
}

/// `Var(X_t) = (1 - e^{-2 kappa t}) / (2 kappa)`, equal to `t` at `kappa = 0`.
pub(crate) fn ou_variance(kappa: f64, t: f64) -> f64 {
    ou_step_moments(kappa, t).1
}

impl<T: Real> HqeTables<T> {
    fn new(grid: &TimeGrid<T>, h: f64, kappa: f64, eta: f64) -> Self {
        let times: Vec<f64> = grid.times().iter().map(|t| t.f64()).collect();
        let n = grid.n_steps();
        let dt: Vec<f64> = times.windows(2).map(|w| w[1] - w[0]).collect();
        let dmin = dt.iter().copied().fold(f64::INFINITY, f64::min);
        let res = Resolvent::new(h + 0.5, kappa, times[n], dmin / 8.0);
        // g(t_k - t_j) for all j <= k
        let mut g_at = vec![Vec::new(); n + 1];
        for (k, row) in g_at.iter_mut().enumerate() {
            *row = (0..=k).map(|j| res.g(times[k] - times[j])).collect();
        }
        let far = Triangular::build(n, |k, j| {
            if j + 1 < k {
                T::lit(eta * (g_at[k][j] - g_at[k][j + 1]) / dt[j])
            } else {
                T::zero()
            }
        });
        let k0 = dt.iter().map(|&d| T::lit(eta * res.g(d))).collect();
        let k00 = dt.iter().map(|&d| T::lit(eta * eta * res.k_squared_integral(d))).collect();
        Self {
            two_h: T::lit(2.0 * h),
            far,
            k0,
            k00,
            dt: dt.into_iter().map(T::lit).collect(),
        }
    }

    fn fill(&self, curve: &[T], z: &[T], v: &mut [T], dw: &mut [T], chi: &mut [T]) -> usize {
        let n = v.len() - 1;
        let one = T::one();
        let two = T::lit(2.0);
        v[0] = curve[0];
        let mut truncated = 0;
        for j in 1..=n {
            let d = self.dt[j - 1];
            let w = self.far.row(j);
            let mut xi = curve[j];
            for k in 0..j - 1 {
                xi = xi + w[k] * chi[k];
            }
            let vbar = ((xi + self.two_h * v[j - 1]) / (self.two_h + one)).max(T::zero());
            let (k0, k00) = (self.k0[j - 1], self.k00[j - 1]);
            let (zq, zp) = (z[2 * (j - 1)], z[2 * (j - 1) + 1]);
            let vj = if xi <= T::zero() {
                truncated += 1;
                T::zero()
            } else {
                let psi = vbar * k00 / (xi * xi);
                if psi < T::lit(1e-12) {
                    xi
                } else if psi <= T::lit(1.5) {
                    let inv = two / psi;
                    let b2 = inv - one + inv.sqrt() * (inv - one).sqrt();
                    let a = xi / (one + b2);
                    let r = b2.sqrt() + zq;
                    a * r * r
                } else {
                    let p = (psi - one) / (psi + one);
                    let beta = (one - p) / xi;
                    let u = norm_cdf(zq);
                    if u <= p {
                        T::zero()
                    } else {
                        ((one - p) / (one - u)).ln() / beta
                    }
                }
            };
            let resid = (vbar * (d - if k00 > T::zero() { k0 * k0 / k00 } else { T::zero() }))
                .max(T::zero())
                .sqrt();
            let c = if k00 > T::zero() { k0 / k00 * (vj - xi) } else { T::zero() };
            chi[j - 1] = c + resid * zp;
            dw[j - 1] = if vbar > T::zero() {
                chi[j - 1] / vbar.sqrt()
            } else {
                d.sqrt() * zp
            };
            v[j] = vj;
        }
        truncated
    }
}
