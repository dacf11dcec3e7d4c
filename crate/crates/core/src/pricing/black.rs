//! Undiscounted Black-76 prices and implied volatilities.

use crate::error::{Error, Result};
use crate::real::{norm_cdf, norm_pdf, Real};

pub const MIN_VOL: f64 = 1e-4;
pub const MAX_VOL: f64 = 5.0;

fn call_put(f: f64, k: f64, t: f64, sigma: f64, is_call: bool) -> f64 {
    let sd = sigma * t.max(0.0).sqrt();
    if !(sd > 0.0) {
        return if is_call { (f - k).max(0.0) } else { (k - f).max(0.0) };
    }
    let d1 = ((f / k).ln() + 0.5 * sd * sd) / sd;
    let d2 = d1 - sd;
    if is_call {
        f * norm_cdf(d1) - k * norm_cdf(d2)
    } else {
        k * norm_cdf(-d2) - f * norm_cdf(-d1)
    }
}

/// Black-76 vega `dC/dsigma`.
pub fn black_vega(f: f64, k: f64, t: f64, sigma: f64) -> f64 {
    let sd = sigma * t.sqrt();
    let d1 = ((f / k).ln() + 0.5 * sd * sd) / sd;
    f * norm_pdf(d1) * t.sqrt()
}

/// Black-76 price of a futures option with forward `f`, strike `k`, expiry `t`.
pub fn black_price<T: Real>(f: T, k: T, t: T, sigma: T, is_call: bool) -> T {
    T::lit(call_put(f.f64(), k.f64(), t.f64(), sigma.f64(), is_call))
}

/// Which side of the attainable price range a failed inversion fell on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BandSide {
    Below,
    Above,
}

impl BandSide {
    /// Volatility at the corresponding edge of the search interval.
    pub fn edge_vol(self) -> f64 {
        match self {
            BandSide::Below => MIN_VOL,
            BandSide::Above => MAX_VOL,
        }
    }
}

/// Classifies an [`Error::OutOfBand`] from [`implied_vol`].
pub fn band_side(err: &Error) -> Option<BandSide> {
    match err {
        Error::OutOfBand { price, lower, upper } => {
            if price <= lower {
                Some(BandSide::Below)
            } else if price >= upper {
                Some(BandSide::Above)
            } else {
                None
            }
        }
        _ => None,
    }
}

/// Inverts [`black_price`] for `sigma` in `[1e-4, 5]`.
///
/// The inversion runs on the out-of-the-money side (via put-call parity) and on the
/// log of the price, so deep wings keep full relative accuracy. Prices outside the
/// range spanned by the volatility interval give [`Error::OutOfBand`] with that range.
pub fn implied_vol<T: Real>(price: T, f: T, k: T, t: T, is_call: bool) -> Result<T> {
    let (p, f, k, t) = (price.f64(), f.f64(), k.f64(), t.f64());
    if !(f > 0.0 && k > 0.0 && t > 0.0) || !p.is_finite() {
        return Err(crate::error::invalid(format!(
            "implied vol needs positive forward, strike and expiry (F={f}, K={k}, t={t})"
        )));
    }
    let otm_call = k >= f;
    let target = match (is_call, otm_call) {
        (true, true) | (false, false) => p,
        (true, false) => p - (f - k),
        (false, true) => p - (k - f),
    };
    let lo_p = call_put(f, k, t, MIN_VOL, otm_call);
    let hi_p = call_put(f, k, t, MAX_VOL, otm_call);
    let band = |lower: f64, upper: f64| Error::OutOfBand {
        price: p,
        lower: lower + (p - target),
        upper: upper + (p - target),
    };
    if !(target > lo_p) {
        if target == lo_p && target > 0.0 {
            return Ok(T::lit(MIN_VOL));
        }
        return Err(band(lo_p, hi_p));
    }
    if !(target < hi_p) {
        if target == hi_p {
            return Ok(T::lit(MAX_VOL));
        }
        return Err(band(lo_p, hi_p));
    }
    let ln_target = target.ln();
    let objective = |s: f64| {
        let q = call_put(f, k, t, s, otm_call);
        if q > 0.0 {
            q.ln() - ln_target
        } else {
            f64::NEG_INFINITY
        }
    };
    let (mut lo, mut hi) = (MIN_VOL, MAX_VOL);
    // start from the Brenner-Subrahmanyam style ATM guess, clipped into the bracket
    let mut s = ((2.0 * std::f64::consts::PI / t).sqrt() * target / f)
        .max((2.0 * (f / k).ln().abs() / t).sqrt())
        .clamp(0.05, 2.0);
    for _ in 0..200 {
        let g = objective(s);
        if g == 0.0 {
            return Ok(T::lit(s));
        }
        if g > 0.0 {
            hi = s;
        } else {
            lo = s;
        }
        let q = call_put(f, k, t, s, otm_call);
        let step = if q > 0.0 && g.is_finite() { g * q / black_vega(f, k, t, s) } else { f64::NAN };
        let mut next = s - step;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - s).abs() <= 1e-15 * s.max(1.0) || hi - lo <= 1e-15 {
            return Ok(T::lit(next));
        }
        s = next;
    }
    Ok(T::lit(s))
}
