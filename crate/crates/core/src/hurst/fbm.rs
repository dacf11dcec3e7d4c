use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{invalid, Result};

/// Autocovariance of unit-step fractional Gaussian noise at lag `k`.
pub fn fgn_autocovariance(h: f64, k: usize) -> f64 {
    let k = k as f64;
    let p = 2.0 * h;
    0.5 * ((k + 1.0).powf(p) - 2.0 * k.powf(p) + (k - 1.0).abs().powf(p))
}

/// Exact fractional Gaussian noise of length `n` by circulant embedding.
pub fn fgn(n: usize, h: f64, seed: u64) -> Result<Vec<f64>> {
    if !(h > 0.0 && h < 1.0) {
        return Err(invalid(format!("Hurst exponent must lie in (0, 1), got {h}")));
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    let m = 2 * n;
    let mut c: Vec<Complex<f64>> = (0..m)
        .map(|j| {
            let lag = if j <= n { j } else { m - j };
            Complex::new(fgn_autocovariance(h, lag), 0.0)
        })
        .collect();
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(m);
    fft.process(&mut c);
    let lambda: Vec<f64> = c.iter().map(|z| z.re.max(0.0)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut z = || -> f64 { StandardNormal.sample(&mut rng) };
    let mf = m as f64;
    let mut w = vec![Complex::new(0.0, 0.0); m];
    w[0] = Complex::new((lambda[0] / mf).sqrt() * z(), 0.0);
    w[n] = Complex::new((lambda[n] / mf).sqrt() * z(), 0.0);
    for k in 1..n {
        let s = (lambda[k] / (2.0 * mf)).sqrt();
        let v = Complex::new(s * z(), s * z());
        w[k] = v;
        w[m - k] = v.conj();
    }
    fft.process(&mut w);
    Ok(w[..n].iter().map(|x| x.re).collect())
}

/// Fractional Brownian motion sampled at `0, 1, ..., n_points - 1` (unit step).
pub fn fbm(n_points: usize, h: f64, seed: u64) -> Result<Vec<f64>> {
    let noise = fgn(n_points.saturating_sub(1), h, seed)?;
    let mut out = Vec::with_capacity(n_points);
    let mut acc = 0.0;
    if n_points > 0 {
        out.push(0.0);
    }
    for x in noise {
        acc += x;
        out.push(acc);
    }
    Ok(out)
}
