use ndarray::ArrayView1;
use serde::{Deserialize, Serialize};

use super::futures::{futures_from_spot, FuturesCurve};
use crate::error::{invalid, Error, Result};
use crate::real::Real;
use crate::sim::PathBatch;

/// European option on the futures maturing at `t_fut`, expiring at `t_opt`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VanillaSpec<T: Real> {
    pub strike: T,
    pub t_opt: T,
    pub t_fut: T,
    pub is_call: bool,
}

impl<T: Real> VanillaSpec<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.strike > T::zero()) {
            return Err(invalid(format!("strike must be positive, got {}", self.strike)));
        }
        if !(self.t_opt > T::zero() && self.t_opt <= self.t_fut) {
            return Err(invalid(format!(
                "need 0 < t_opt <= t_fut, got t_opt={} t_fut={}",
                self.t_opt, self.t_fut
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McPrice<T: Real> {
    pub price: T,
    pub stderr: T,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct McOptions {
    /// Use the futures price itself (known mean `F0`) as a control variate.
    pub control_variate: bool,
}

/// Sample mean and standard error, accumulated in path order.
pub(crate) fn mean_stderr(xs: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let mut n = 0usize;
    let mut sum = 0.0;
    for x in xs.clone() {
        sum += x;
        n += 1;
    }
    let mean = sum / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = xs.map(|x| (x - mean) * (x - mean)).sum();
    (mean, (ss / (n - 1) as f64 / n as f64).sqrt())
}

/// Prices one option from terminal spot values `s` observed at `spec.t_opt`.
pub(crate) fn price_from_spots<T: Real>(
    s: ArrayView1<'_, T>,
    spec: &VanillaSpec<T>,
    a: T,
    f0: T,
    options: McOptions,
) -> McPrice<T> {
    let k = spec.strike.f64();
    let fwd = |x: T| futures_from_spot(x, spec.t_opt, spec.t_fut, a, f0).f64();
    let payoff = |x: T| {
        let f = fwd(x);
        if spec.is_call {
            (f - k).max(0.0)
        } else {
            (k - f).max(0.0)
        }
    };
    let (mean, se) = if options.control_variate {
        let f0 = f0.f64();
        let (my, _) = mean_stderr(s.iter().map(|&x| payoff(x)));
        let (mf, _) = mean_stderr(s.iter().map(|&x| fwd(x)));
        let mut cov = 0.0;
        let mut var = 0.0;
        for &x in s.iter() {
            let (dy, df) = (payoff(x) - my, fwd(x) - mf);
            cov += dy * df;
            var += df * df;
        }
        let b = if var > 0.0 { cov / var } else { 0.0 };
        mean_stderr(s.iter().map(|&x| payoff(x) - b * (fwd(x) - f0)))
    } else {
        mean_stderr(s.iter().map(|&x| payoff(x)))
    };
    McPrice {
        price: T::lit(mean),
        stderr: T::lit(se),
    }
}

/// Undiscounted Monte Carlo price `E[(F_{t_opt}(t_fut) - K)^+]` (or the put).
pub fn mc_vanilla<T: Real>(
    batch: &PathBatch<T>,
    spec: &VanillaSpec<T>,
    a: T,
    curve: &FuturesCurve<T>,
) -> Result<McPrice<T>> {
    mc_vanilla_with(batch, spec, a, curve, McOptions::default())
}

pub fn mc_vanilla_with<T: Real>(
    batch: &PathBatch<T>,
    spec: &VanillaSpec<T>,
    a: T,
    curve: &FuturesCurve<T>,
    options: McOptions,
) -> Result<McPrice<T>> {
    spec.validate()?;
    let k = batch
        .grid
        .index_of(spec.t_opt)
        .ok_or(Error::GridMismatch(spec.t_opt.f64()))?;
    Ok(price_from_spots(batch.s.column(k), spec, a, curve.eval(spec.t_fut), options))
}
