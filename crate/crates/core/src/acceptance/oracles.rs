//! Reference values computed independently of the simulation code.

use crate::real::gamma;

/// `Cov(W~_s, W~_t) = 2H int_0^s (t - u)^g (s - u)^g du` with `g = H - 1/2`, `s <= t`,
/// by composite Simpson after the substitution `s - u = y^(1/H)`, which keeps the
/// integrand bounded up to and including the diagonal `s = t`.
pub fn volterra_covariance(h: f64, s: f64, t: f64) -> f64 {
    let (s, t) = if s <= t { (s, t) } else { (t, s) };
    let g = h - 0.5;
    let k = 1.0 / h;
    let upper = s.powf(h);
    // the integrand vanishes like y^(1/2H) at the origin, or like y on the diagonal
    let f = |y: f64| {
        if y == 0.0 {
            return 0.0;
        }
        (t - s + y.powf(k)).powf(g) * y.powf(k * g + k - 1.0) * k
    };
    let n = 20_000;
    let dy = upper / n as f64;
    let mut acc = f(0.0) + f(upper);
    for i in 1..n {
        acc += if i % 2 == 1 { 4.0 } else { 2.0 } * f(i as f64 * dy);
    }
    2.0 * h * acc * dy / 3.0
}

/// `Cov(W~_t, W_t) = sqrt(2H) t^(H + 1/2) / (H + 1/2)`.
pub fn volterra_bm_covariance(h: f64, t: f64) -> f64 {
    (2.0 * h).sqrt() * t.powf(h + 0.5) / (h + 0.5)
}

/// Mean variance of rough Heston started at `v0` with constant mean level `theta`:
/// `u(t) = v0 + kappa/Gamma(alpha) int_0^t (t - s)^(alpha - 1) (theta - u(s)) ds`,
/// solved by product-trapezoidal integration on `n` steps up to `horizon`.
pub fn rheston_mean_variance(hurst: f64, kappa: f64, v0: f64, theta: f64, horizon: f64, n: usize) -> Vec<(f64, f64)> {
    let alpha = hurst + 0.5;
    let h = horizon / n as f64;
    let c = h.powf(alpha) / (alpha * (alpha + 1.0));
    let g = gamma(alpha);
    let ga1 = gamma(alpha + 1.0);
    let mut u = vec![v0; n + 1];
    for m in 1..=n {
        let mf = m as f64;
        let tm = mf * h;
        let mut conv = c * ((mf - 1.0).powf(alpha + 1.0) - (mf - alpha - 1.0) * mf.powf(alpha)) * u[0];
        for j in 1..m {
            let d = (m - j) as f64;
            conv += c * ((d + 1.0).powf(alpha + 1.0) - 2.0 * d.powf(alpha + 1.0) + (d - 1.0).powf(alpha + 1.0)) * u[j];
        }
        u[m] = (v0 + kappa * theta * tm.powf(alpha) / ga1 - kappa / g * conv) / (1.0 + kappa * c / g);
    }
    u.into_iter().enumerate().map(|(i, x)| (i as f64 * h, x)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn brownian_covariance() {
        assert!((volterra_covariance(0.5, 0.3, 0.8) - 0.3).abs() < 1e-9);
        assert!((volterra_covariance(0.2, 0.7, 0.7) - 0.7f64.powf(0.4)).abs() < 1e-6);
        // the suite's off-diagonal values, cross-checked against a second quadrature
        assert!((volterra_covariance(0.1, 0.75, 1.0) - 0.38040).abs() < 1e-5);
        assert!((volterra_covariance(0.3, 0.75, 1.0) - 0.67653).abs() < 1e-5);
        assert!((volterra_bm_covariance(0.5, 0.6) - 0.6).abs() < 1e-12);
    }

    #[test]
    fn classical_mean_reversion() {
        let path = rheston_mean_variance(0.5, 3.0, 0.2, 0.05, 1.0, 2000);
        for &(t, u) in path.iter().step_by(250) {
            let exact = 0.05 + 0.15 * (-3.0 * t).exp();
            assert!((u - exact).abs() < 1e-6, "{t}: {u} vs {exact}");
        }
    }

    #[test]
    fn rough_mean_is_monotone_between_levels() {
        let path = rheston_mean_variance(0.1, 5.0, 0.3, 0.1, 1.0, 1000);
        assert!(path.windows(2).all(|w| w[1].1 <= w[0].1 + 1e-12));
        assert!(path.last().unwrap().1 > 0.1);
    }
}
