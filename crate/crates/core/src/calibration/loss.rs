use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market_data::QuoteSurface;
use crate::real::Real;

pub const DEFAULT_CUTOFF: f64 = 0.03;

/// A model volatility for one quote. `failed` marks a price that could not be
/// inverted; `vol` then holds the edge of the volatility search interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuoteVol<T: Real> {
    pub vol: T,
    pub failed: bool,
}

impl<T: Real> From<T> for QuoteVol<T> {
    fn from(vol: T) -> Self {
        Self { vol, failed: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown<T: Real> {
    pub total: T,
    pub per_maturity: Vec<T>,
    /// `|mkt - model|` per quote.
    pub abs_errors: Vec<Vec<T>>,
    /// Penalty contribution per quote (zero when inactive).
    pub penalties: Vec<Vec<T>>,
}

/// Liquidity weight `volume / max(0.01, bid_ask)`.
pub fn quote_weight<T: Real>(volume: T, bid_ask: T) -> T {
    volume / bid_ask.max(T::lit(0.01))
}

/// Bid-ask and volume weighted vol error with a per-quote penalty above `cutoff`:
/// `L_i = (1/w_i) sum_j w_ij e_ij + sum_j 1{e_ij > cutoff} e_ij`, `L = sum_i L_i`.
pub fn loss<T: Real>(surface: &QuoteSurface<T>, model_vols: &[Vec<T>], cutoff: T) -> Result<LossBreakdown<T>> {
    let flagged: Vec<Vec<QuoteVol<T>>> = model_vols
        .iter()
        .map(|row| row.iter().map(|&v| QuoteVol::from(v)).collect())
        .collect();
    loss_flagged(surface, &flagged, cutoff)
}

/// As [`loss`]; quotes whose inversion failed always pay the penalty.
pub fn loss_flagged<T: Real>(
    surface: &QuoteSurface<T>,
    model_vols: &[Vec<QuoteVol<T>>],
    cutoff: T,
) -> Result<LossBreakdown<T>> {
    if model_vols.len() != surface.quotes.len() {
        return Err(Error::Alignment(format!(
            "{} maturities of model vols for {} in the surface",
            model_vols.len(),
            surface.quotes.len()
        )));
    }
    let mut per_maturity = Vec::with_capacity(model_vols.len());
    let mut abs_errors = Vec::with_capacity(model_vols.len());
    let mut penalties = Vec::with_capacity(model_vols.len());
    for (i, (quotes, vols)) in surface.quotes.iter().zip(model_vols).enumerate() {
        if quotes.len() != vols.len() {
            return Err(Error::Alignment(format!(
                "maturity {i}: {} model vols for {} quotes",
                vols.len(),
                quotes.len()
            )));
        }
        let mut weight_sum = T::zero();
        let mut weighted = T::zero();
        let mut penalty_sum = T::zero();
        let mut errs = Vec::with_capacity(quotes.len());
        let mut pens = Vec::with_capacity(quotes.len());
        for (q, m) in quotes.iter().zip(vols) {
            let e = (q.mkt_vol - m.vol).abs();
            let w = quote_weight(q.volume, q.bid_ask);
            weight_sum = weight_sum + w;
            weighted = weighted + w * e;
            let p = if m.failed || e > cutoff { e } else { T::zero() };
            penalty_sum = penalty_sum + p;
            errs.push(e);
            pens.push(p);
        }
        let term1 = if weight_sum > T::zero() { weighted / weight_sum } else { T::zero() };
        per_maturity.push(term1 + penalty_sum);
        abs_errors.push(errs);
        penalties.push(pens);
    }
    let total = per_maturity.iter().fold(T::zero(), |acc, &x| acc + x);
    Ok(LossBreakdown {
        total,
        per_maturity,
        abs_errors,
        penalties,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market_data::{FuturesContract, OptionQuote};
    use chrono::NaiveDate;

    fn surface(quotes: Vec<(f64, f64, f64, f64)>) -> QuoteSurface<f64> {
        let contract = FuturesContract { ticker: "CLK5".into(), t_opt: 0.1, t_fut: 0.12, f0: 67.0 };
        let q = quotes
            .into_iter()
            .enumerate()
            .map(|(j, (mkt_vol, bid_ask, volume, _))| OptionQuote {
                strike: 60.0 + j as f64,
                mkt_vol,
                bid_ask,
                volume,
                is_call: false,
            })
            .collect();
        QuoteSurface::new(NaiveDate::from_ymd_opt(2025, 3, 14).unwrap(), vec![contract], vec![q]).unwrap()
    }

    #[test]
    fn worked_example() {
        let s = surface(vec![(0.30, 0.02, 100.0, 0.0), (0.35, 0.005, 50.0, 0.0)]);
        let l = loss(&s, &[vec![0.30, 0.33]], 0.03).unwrap();
        assert!((l.per_maturity[0] - 0.01).abs() < 1e-15);
        assert!(l.penalties[0].iter().all(|&p| p == 0.0));
        assert_eq!(quote_weight(50.0, 0.005), 5000.0);
    }

    #[test]
    fn penalty_doubles_large_error() {
        let s = surface(vec![(0.40, 0.02, 10.0, 0.0)]);
        let l = loss(&s, &[vec![0.35]], 0.03).unwrap();
        assert!((l.total - 0.10).abs() < 1e-15);
    }

    #[test]
    fn zero_error_and_zero_weight() {
        let s = surface(vec![(0.30, 0.02, 0.0, 0.0), (0.35, 0.0, 0.0, 0.0)]);
        assert_eq!(loss(&s, &[vec![0.30, 0.35]], 0.03).unwrap().total, 0.0);
        // no weight in the first term, penalty still applies
        let l = loss(&s, &[vec![0.30, 0.30]], 0.03).unwrap();
        assert!((l.total - 0.05).abs() < 1e-15);
    }

    #[test]
    fn failed_inversion_always_penalized() {
        let s = surface(vec![(0.30, 0.02, 100.0, 0.0)]);
        let v = vec![vec![QuoteVol { vol: 0.3001, failed: true }]];
        let l = loss_flagged(&s, &v, 0.03).unwrap();
        assert!((l.total - 2.0 * 1e-4).abs() < 1e-12);
    }

    #[test]
    fn misaligned() {
        let s = surface(vec![(0.30, 0.02, 100.0, 0.0)]);
        assert!(matches!(loss(&s, &[vec![0.3, 0.3]], 0.03), Err(Error::Alignment(_))));
        assert!(matches!(loss(&s, &[], 0.03), Err(Error::Alignment(_))));
    }

    #[test]
    fn order_invariant_within_maturity() {
        let s1 = surface(vec![(0.30, 0.02, 100.0, 0.0), (0.35, 0.01, 50.0, 0.0), (0.5, 0.03, 7.0, 0.0)]);
        let l1 = loss(&s1, &[vec![0.31, 0.30, 0.45]], 0.03).unwrap();
        let mut s2 = s1.clone();
        s2.quotes[0].reverse();
        let l2 = loss(&s2, &[vec![0.45, 0.30, 0.31]], 0.03).unwrap();
        assert!((l1.total - l2.total).abs() < 1e-15);
    }

    proptest::proptest! {
        #[test]
        fn zero_at_market_and_permutation_invariant(
            rows in proptest::collection::vec((0.05f64..1.0, 0.0f64..0.05, 0.0f64..500.0, -0.1f64..0.1), 1..8),
            shift in 0usize..8,
        ) {
            let s = surface(rows.clone());
            let mkt: Vec<f64> = rows.iter().map(|r| r.0).collect();
            proptest::prop_assert_eq!(loss(&s, &[mkt], 0.03).unwrap().total, 0.0);
            let model: Vec<f64> = rows.iter().map(|r| (r.0 + r.3).max(0.01)).collect();
            let base = loss(&s, std::slice::from_ref(&model), 0.03).unwrap().total;
            let k = shift % rows.len();
            let mut s2 = s.clone();
            s2.quotes[0].rotate_left(k);
            let mut m2 = model.clone();
            m2.rotate_left(k);
            let rotated = loss(&s2, &[m2], 0.03).unwrap().total;
            proptest::prop_assert!((base - rotated).abs() <= 1e-12 * base.max(1.0));
        }
    }
}
