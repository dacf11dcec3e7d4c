use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::fv_curve::ForwardVarianceCurve;
use crate::real::Real;

fn check_hurst<T: Real>(h: T) -> Result<()> {
    if h > T::zero() && h < T::one() {
        Ok(())
    } else {
        Err(invalid(format!("Hurst exponent must lie in (0, 1), got {h}")))
    }
}

fn check_nonneg<T: Real>(name: &str, x: T) -> Result<()> {
    if x >= T::zero() && x.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("{name} must be nonnegative, got {x}")))
    }
}


/// Rough Bergomi: `v_t = xi0(t) exp(eta W~_t - eta^2 t^(2H) / 2)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RBergomiParams<T: Real> {
    pub hurst: T,
    pub eta: T,
    pub xi0: ForwardVarianceCurve<T>,
}

impl<T: Real> RBergomiParams<T> {
    /// `eta = 0` is accepted as the deterministic limit.
    pub fn validate(&self) -> Result<()> {
        check_hurst(self.hurst)?;
        check_nonneg("eta", self.eta)?;
        self.xi0.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RHestonScheme {
    /// Hybrid quadratic-exponential scheme on the resolvent kernel.
    #[default]
    Hqe,
    /// Volterra-Euler discretization with full truncation.
    Euler,
}

/// Rough Heston driven directly by its forward-variance curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RHestonParams<T: Real> {
    pub hurst: T,
    pub eta: T,
    pub kappa: T,
    pub xi0: ForwardVarianceCurve<T>,
    #[serde(default)]
    pub scheme: RHestonScheme,
}

impl<T: Real> RHestonParams<T> {
    pub fn validate(&self) -> Result<()> {
        check_hurst(self.hurst)?;
        check_nonneg("eta", self.eta)?;
        check_nonneg("kappa", self.kappa)?;
        self.xi0.validate()
    }
}

/// One-factor Bergomi with an Ornstein-Uhlenbeck driver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BergomiParams<T: Real> {
    pub eta: T,
    /// `kappa = 0` gives the Brownian limit.
    pub kappa: T,
    pub xi0: ForwardVarianceCurve<T>,
}

impl<T: Real> BergomiParams<T> {
    pub fn validate(&self) -> Result<()> {
        check_nonneg("eta", self.eta)?;
        check_nonneg("kappa", self.kappa)?;
        self.xi0.validate()
    }
}

/// Heston with a time-dependent long-run variance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HestonParams<T: Real> {
    pub eta: T,
    pub kappa: T,
    pub v0: T,
    pub vbar: ForwardVarianceCurve<T>,
}

impl<T: Real> HestonParams<T> {
    pub fn validate(&self) -> Result<()> {
        check_nonneg("eta", self.eta)?;
        check_nonneg("kappa", self.kappa)?;
        check_nonneg("v0", self.v0)?;
        self.vbar.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum VarianceModel<T: Real> {
    RBergomi(RBergomiParams<T>),
    RHeston(RHestonParams<T>),
    Bergomi(BergomiParams<T>),
    Heston(HestonParams<T>),
}

impl<T: Real> VarianceModel<T> {
    pub fn validate(&self) -> Result<()> {
        match self {
            VarianceModel::RBergomi(p) => p.validate(),
            VarianceModel::RHeston(p) => p.validate(),
            VarianceModel::Bergomi(p) => p.validate(),
            VarianceModel::Heston(p) => p.validate(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            VarianceModel::RBergomi(_) => "rbergomi",
            VarianceModel::RHeston(_) => "rheston",
            VarianceModel::Bergomi(_) => "bergomi",
            VarianceModel::Heston(_) => "heston",
        }
    }

    /// The curve the calibration fits: `xi0`, or `vbar` for Heston.
    pub fn curve(&self) -> &ForwardVarianceCurve<T> {
        match self {
            VarianceModel::RBergomi(p) => &p.xi0,
            VarianceModel::RHeston(p) => &p.xi0,
            VarianceModel::Bergomi(p) => &p.xi0,
            VarianceModel::Heston(p) => &p.vbar,
        }
    }

    pub fn with_curve(&self, curve: ForwardVarianceCurve<T>) -> Self {
        let mut out = self.clone();
        match &mut out {
            VarianceModel::RBergomi(p) => p.xi0 = curve,
            VarianceModel::RHeston(p) => p.xi0 = curve,
            VarianceModel::Bergomi(p) => p.xi0 = curve,
            VarianceModel::Heston(p) => p.vbar = curve,
        }
        out
    }
}

/// Spot-variance correlation: constant, or piecewise constant in time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Correlation<T: Real> {
    Scalar(T),
    /// `values[i]` holds on `[breaks[i-1], breaks[i])`; the last value continues past the last break.
    Piecewise { breaks: Vec<T>, values: Vec<T> },
}

impl<T: Real> Correlation<T> {
    pub fn validate(&self) -> Result<()> {
        let check = |r: T| {
            if r.abs() <= T::one() {
                Ok(())
            } else {
                Err(invalid(format!("correlation must lie in [-1, 1], got {r}")))
            }
        };
        match self {
            Correlation::Scalar(r) => check(*r),
            Correlation::Piecewise { breaks, values } => {
                if values.is_empty() || breaks.len() != values.len() {
                    return Err(invalid("piecewise correlation needs one break per value"));
                }
                if breaks.windows(2).any(|w| !(w[0] < w[1])) {
                    return Err(invalid("correlation breaks must increase"));
                }
                values.iter().try_for_each(|r| check(*r))
            }
        }
    }

    pub fn at(&self, t: T) -> T {
        match self {
            Correlation::Scalar(r) => *r,
            Correlation::Piecewise { breaks, values } => {
                let i = breaks.partition_point(|b| *b <= t);
                values[i.min(values.len() - 1)]
            }
        }
    }

    pub fn values(&self) -> Vec<T> {
        match self {
            Correlation::Scalar(r) => vec![*r],
            Correlation::Piecewise { values, .. } => values.clone(),
        }
    }
}

/// Spot dynamics `ds = a (1 - s) dt + sqrt(v) s dW1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpotParams<T: Real> {
    pub mean_reversion: T,
    pub corr: Correlation<T>,
}

impl<T: Real> SpotParams<T> {
    pub fn new(mean_reversion: T, rho: T) -> Self {
        Self {
            mean_reversion,
            corr: Correlation::Scalar(rho),
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_nonneg("mean reversion", self.mean_reversion)?;
        self.corr.validate()
    }
}

pub const DEFAULT_MEAN_REVERSION: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec<T: Real> {
    pub variance: VarianceModel<T>,
    pub spot: SpotParams<T>,
}

impl<T: Real> ModelSpec<T> {
    pub fn new(variance: VarianceModel<T>, spot: SpotParams<T>) -> Self {
        Self { variance, spot }
    }

    pub fn validate(&self) -> Result<()> {
        self.variance.validate()?;
        self.spot.validate()?;
        if matches!(self.variance, VarianceModel::RBergomi(_))
            && self.spot.corr.values().iter().any(|r| *r >= T::zero())
        {
            return Err(invalid(
                "rough Bergomi requires rho < 0 for the futures price to be a true martingale",
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat(v: f64) -> ForwardVarianceCurve<f64> {
        ForwardVarianceCurve::constant(v).unwrap()
    }

    #[test]
    fn rbergomi_needs_negative_rho() {
        let var = VarianceModel::RBergomi(RBergomiParams {
            hurst: 0.1,
            eta: 1.5,
            xi0: flat(0.04),
        });
        assert!(ModelSpec::new(var.clone(), SpotParams::new(0.5, -0.3)).validate().is_ok());
        let err = ModelSpec::new(var.clone(), SpotParams::new(0.5, 0.2)).validate().unwrap_err();
        assert!(err.to_string().contains("rho < 0"));
        assert!(ModelSpec::new(var, SpotParams::new(0.5, 0.0)).validate().is_err());
    }

    #[test]
    fn parameter_ranges() {
        let bad_h = RBergomiParams { hurst: 1.0, eta: 1.0, xi0: flat(0.04) };
        assert!(bad_h.validate().is_err());
        let bad_rho = SpotParams::new(0.5, -1.2);
        assert!(bad_rho.validate().is_err());
    }

    #[test]
    fn piecewise_lookup() {
        let c = Correlation::Piecewise { breaks: vec![0.25, 0.5], values: vec![-0.1, -0.3] };
        c.validate().unwrap();
        assert_eq!(c.at(0.0), -0.1);
        assert_eq!(c.at(0.2499), -0.1);
        assert_eq!(c.at(0.25), -0.3);
        assert_eq!(c.at(0.9), -0.3);
    }

    #[test]
    fn json_tagging() {
        let m = ModelSpec::new(
            VarianceModel::Heston(HestonParams { eta: 0.5, kappa: 2.0, v0: 0.04, vbar: flat(0.04) }),
            SpotParams::new(0.5, -0.2),
        );
        let s = serde_json::to_string(&m).unwrap();
        assert!(s.contains("\"model\":\"heston\""));
        let back: ModelSpec<f64> = serde_json::from_str(&s).unwrap();
        assert_eq!(back, m);
    }
}
