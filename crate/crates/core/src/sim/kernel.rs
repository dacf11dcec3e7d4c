//! Discretized power kernels for the hybrid scheme.

use super::grid::TimeGrid;
use crate::real::Real;

/// Lower-triangular table: row `k` (for `k = 1..=K`) holds one weight per interval `j < k`.
#[derive(Debug, Clone)]
pub(crate) struct Triangular<T> {
    data: Vec<T>,
}

impl<T: Copy> Triangular<T> {
    pub fn build(n: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(n * (n + 1) / 2);
        for k in 1..=n {
            for j in 0..k {
                data.push(f(k, j));
            }
        }
        Self { data }
    }

    #[inline]
    pub fn row(&self, k: usize) -> &[T] {
        let start = k * (k - 1) / 2;
        &self.data[start..start + k]
    }
}

/// Average of `(t_k - s)^gamma` over interval `j`, seen from node `k`.
pub(crate) fn average_power(times: &[f64], gamma: f64, k: usize, j: usize) -> f64 {
    let p = gamma + 1.0;
    let dt = times[j + 1] - times[j];
    let far = times[k] - times[j];
    let near = times[k] - times[j + 1];
    (far.powf(p) - near.max(0.0).powf(p)) / (p * dt)
}

/// Hybrid-scheme coefficients for the kernel `(t - s)^gamma`, `gamma = H - 1/2`.
///
/// For each step the pair `(dW, I)` with `I = int (t_{j+1} - s)^gamma dW_s` is drawn as
/// `dW = sqrt(dt) z1`, `I = near_a * dW + near_b * z2`. Older intervals use the
/// interval-averaged kernel, which coincides with the optimal evaluation points on a
/// uniform grid.
#[derive(Debug, Clone)]
pub(crate) struct HybridWeights<T> {
    pub far: Triangular<T>,
    pub sqrt_dt: Vec<T>,
    pub near_a: Vec<T>,
    pub near_b: Vec<T>,
}

impl<T: Real> HybridWeights<T> {
    pub fn new(grid: &TimeGrid<T>, gamma: f64) -> Self {
        let times: Vec<f64> = grid.times().iter().map(|t| t.f64()).collect();
        let n = grid.n_steps();
        let far = Triangular::build(n, |k, j| T::lit(average_power(&times, gamma, k, j)));
        let mut sqrt_dt = Vec::with_capacity(n);
        let mut near_a = Vec::with_capacity(n);
        let mut near_b = Vec::with_capacity(n);
        for j in 0..n {
            let dt = times[j + 1] - times[j];
            let cov = dt.powf(gamma + 1.0) / (gamma + 1.0);
            let var_i = dt.powf(2.0 * gamma + 1.0) / (2.0 * gamma + 1.0);
            sqrt_dt.push(T::lit(dt.sqrt()));
            near_a.push(T::lit(cov / dt));
            near_b.push(T::lit((var_i - cov * cov / dt).max(0.0).sqrt()));
        }
        Self {
            far,
            sqrt_dt,
            near_a,
            near_b,
        }
    }

    /// Kernel integrals `sum_j w_{k,j} dW_j` (nearest term exact) for nodes `0..=n`,
    /// where `n = out.len() - 1`. Also writes the increments into `dw`.
    pub fn volterra_row(&self, z: &[T], dw: &mut [T], near: &mut [T], out: &mut [T]) {
        let n = out.len() - 1;
        for j in 0..n {
            dw[j] = self.sqrt_dt[j] * z[2 * j];
            near[j] = self.near_a[j] * dw[j] + self.near_b[j] * z[2 * j + 1];
        }
        out[0] = T::zero();
        for k in 1..=n {
            let w = self.far.row(k);
            let mut acc = near[k - 1];
            for j in 0..k - 1 {
                acc = acc + w[j] * dw[j];
            }
            out[k] = acc;
        }
    }
}
