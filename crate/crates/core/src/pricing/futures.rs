use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::real::Real;

/// Initial futures curve `F0(T)`, log-linear between pillars and flat outside them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FuturesCurve<T: Real> {
    pillars: Vec<(T, T)>,
}

impl<T: Real> FuturesCurve<T> {
    pub fn new(mut pillars: Vec<(T, T)>) -> Result<Self> {
        if pillars.is_empty() {
            return Err(invalid("futures curve needs at least one pillar"));
        }
        pillars.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite maturity"));
        if pillars.iter().any(|(_, f)| !(*f > T::zero())) {
            return Err(invalid("futures prices must be positive"));
        }
        if pillars.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(invalid("duplicate futures maturity"));
        }
        Ok(Self { pillars })
    }

    pub fn flat(f0: T) -> Result<Self> {
        Self::new(vec![(T::one(), f0)])
    }

    pub fn pillars(&self) -> &[(T, T)] {
        &self.pillars
    }

    pub fn eval(&self, maturity: T) -> T {
        let p = &self.pillars;
        let i = p.partition_point(|(t, _)| *t < maturity);
        if i == 0 {
            return p[0].1;
        }
        if i == p.len() {
            return p[p.len() - 1].1;
        }
        let ((t0, f0), (t1, f1)) = (p[i - 1], p[i]);
        let w = (maturity - t0) / (t1 - t0);
        (f0.ln() * (T::one() - w) + f1.ln() * w).exp()
    }
}

/// `F_t(T) = F0(T) (1 - (1 - s_t) e^{-a (T - t)})` for a known `F0(T)`.
#[inline]
pub fn futures_from_spot<T: Real>(s: T, t: T, maturity: T, a: T, f0: T) -> T {
    f0 * (T::one() - (T::one() - s) * (-a * (maturity - t)).exp())
}

/// Futures price at `t` for maturity `maturity` given the normalized spot `s`.
pub fn futures_price<T: Real>(s: T, t: T, maturity: T, a: T, curve: &FuturesCurve<T>) -> Result<T> {
    if t > maturity {
        return Err(invalid(format!("observation time {t} after futures maturity {maturity}")));
    }
    Ok(futures_from_spot(s, t, maturity, a, curve.eval(maturity)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_examples() {
        let c = FuturesCurve::flat(100.0_f64).unwrap();
        assert_eq!(futures_price(1.0, 0.3, 1.0, 2.0, &c).unwrap(), 100.0);
        assert!((futures_price(0.8, 0.3, 1.0, 0.0, &c).unwrap() - 80.0).abs() < 1e-12);
        let f = futures_price(0.9, 0.0, 1.0, 0.5, &c).unwrap();
        assert!((f - 93.934_693_402_873_67).abs() < 1e-10);
        assert!(futures_price(0.9, 1.5, 1.0, 0.5, &c).is_err());
    }

    #[test]
    fn log_linear_interpolation() {
        let c = FuturesCurve::new(vec![(1.0_f64, 100.0), (0.5, 50.0)]).unwrap();
        assert!((c.eval(0.75) - 50.0_f64.sqrt() * 10.0).abs() < 1e-12);
        assert_eq!(c.eval(0.1), 50.0);
        assert_eq!(c.eval(3.0), 100.0);
        assert!(FuturesCurve::new(vec![(1.0_f64, -1.0)]).is_err());
    }
}
