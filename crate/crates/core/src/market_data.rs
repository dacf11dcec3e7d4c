//! Option-quote surfaces and intraday futures prices read from CSV.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::real::Real;

pub const QUOTE_HEADER: [&str; 9] = [
    "ticker", "t_opt", "t_fut", "f0", "strike", "is_call", "mkt_vol", "bid_ask", "volume",
];

/// A futures contract and the expiry of the options written on it.
///
/// `t_fut` is the last date on which the futures is traded for exposure,
/// i.e. the earlier of first notice and last trade.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FuturesContract<T: Real> {
    pub ticker: String,
    pub t_opt: T,
    pub t_fut: T,
    pub f0: T,
}

impl<T: Real> FuturesContract<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.t_opt > T::zero() && self.t_opt <= self.t_fut) {
            return Err(Error::Invariant(format!(
                "{}: need 0 < t_opt ({}) <= t_fut ({})",
                self.ticker, self.t_opt, self.t_fut
            )));
        }
        if !(self.f0 > T::zero()) {
            return Err(Error::Invariant(format!("{}: f0 must be positive", self.ticker)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptionQuote<T: Real> {
    pub strike: T,
    pub mkt_vol: T,
    /// Bid-ask spread in vol units.
    pub bid_ask: T,
    pub volume: T,
    pub is_call: bool,
}

impl<T: Real> OptionQuote<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.strike > T::zero()) {
            return Err(Error::Invariant(format!("strike must be positive, got {}", self.strike)));
        }
        if !(self.mkt_vol > T::zero()) {
            return Err(Error::Invariant(format!("mkt_vol must be positive, got {}", self.mkt_vol)));
        }
        if !(self.volume >= T::zero()) || !(self.bid_ask >= T::zero()) {
            return Err(Error::Invariant("volume and bid_ask must be nonnegative".into()));
        }
        Ok(())
    }
}

/// Market implied vols for several maturities, ordered by option expiry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuoteSurface<T: Real> {
    pub valuation_date: NaiveDate,
    pub contracts: Vec<FuturesContract<T>>,
    /// `quotes[i]` belongs to `contracts[i]`, ascending in strike.
    pub quotes: Vec<Vec<OptionQuote<T>>>,
}

impl<T: Real> QuoteSurface<T> {
    pub fn new(
        valuation_date: NaiveDate,
        contracts: Vec<FuturesContract<T>>,
        quotes: Vec<Vec<OptionQuote<T>>>,
    ) -> Result<Self> {
        let s = Self {
            valuation_date,
            contracts,
            quotes,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.contracts.len() != self.quotes.len() {
            return Err(Error::Invariant("contracts and quote lists differ in length".into()));
        }
        for c in &self.contracts {
            c.validate()?;
        }
        if self.contracts.windows(2).any(|w| !(w[0].t_opt < w[1].t_opt)) {
            return Err(Error::Invariant("contracts must have strictly increasing t_opt".into()));
        }
        for (c, qs) in self.contracts.iter().zip(&self.quotes) {
            if qs.is_empty() {
                return Err(Error::Invariant(format!("{} has no quotes", c.ticker)));
            }
            for q in qs {
                q.validate()?;
            }
            if qs.windows(2).any(|w| !(w[0].strike < w[1].strike)) {
                return Err(Error::Invariant(format!(
                    "{}: strikes must be strictly increasing",
                    c.ticker
                )));
            }
        }
        Ok(())
    }

    pub fn n_maturities(&self) -> usize {
        self.contracts.len()
    }

    pub fn n_quotes(&self) -> usize {
        self.quotes.iter().map(Vec::len).sum()
    }

    pub fn maturities(&self) -> Vec<T> {
        self.contracts.iter().map(|c| c.t_opt).collect()
    }

    /// Index of the quote whose strike is nearest the futures price.
    pub fn atm_index(&self, i: usize) -> usize {
        let f0 = self.contracts[i].f0;
        let mut best = 0;
        for (j, q) in self.quotes[i].iter().enumerate() {
            if (q.strike - f0).abs() < (self.quotes[i][best].strike - f0).abs() {
                best = j;
            }
        }
        best
    }
}

fn parse_field<T: Real>(s: &str, line: usize, name: &str) -> Result<T> {
    s.trim()
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .map(T::lit)
        .ok_or_else(|| Error::Parse {
            line,
            message: format!("bad {name}: {s:?}"),
        })
}

fn parse_bool(s: &str, line: usize) -> Result<bool> {
    match s.trim().to_ascii_lowercase().as_str() {
        "true" | "1" | "c" | "call" => Ok(true),
        "false" | "0" | "p" | "put" => Ok(false),
        other => Err(Error::Parse {
            line,
            message: format!("bad is_call: {other:?}"),
        }),
    }
}

struct PendingContract<T: Real> {
    contract: FuturesContract<T>,
    quotes: Vec<OptionQuote<T>>,
}

/// Reads a quote surface from CSV (see [`QUOTE_HEADER`]).
///
/// A row with an empty `strike` declares a contract without adding a quote.
/// Rows with zero volume and no bid-ask are dropped. When a put and a call
/// share a strike, the out-of-the-money side is kept.
pub fn read_quote_surface<T: Real, R: Read>(reader: R, valuation_date: NaiveDate) -> Result<QuoteSurface<T>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr.headers()?.clone();
    if header.len() != QUOTE_HEADER.len() || header.iter().zip(QUOTE_HEADER).any(|(a, b)| a != b) {
        return Err(Error::Parse {
            line: 1,
            message: format!("expected header {}", QUOTE_HEADER.join(",")),
        });
    }
    let mut order: Vec<String> = Vec::new();
    let mut pending: BTreeMap<String, PendingContract<T>> = BTreeMap::new();
    for (row_idx, rec) in rdr.records().enumerate() {
        let line = row_idx + 2;
        let rec = rec.map_err(|e| Error::Parse {
            line,
            message: e.to_string(),
        })?;
        if rec.len() != QUOTE_HEADER.len() {
            return Err(Error::Parse {
                line,
                message: format!("expected {} fields, found {}", QUOTE_HEADER.len(), rec.len()),
            });
        }
        let contract = FuturesContract {
            ticker: rec[0].to_string(),
            t_opt: parse_field(&rec[1], line, "t_opt")?,
            t_fut: parse_field(&rec[2], line, "t_fut")?,
            f0: parse_field(&rec[3], line, "f0")?,
        };
        contract.validate()?;
        let entry = match pending.get_mut(&contract.ticker) {
            Some(p) => {
                if p.contract != contract {
                    return Err(Error::Invariant(format!(
                        "line {line}: contract {} redefined with different terms",
                        contract.ticker
                    )));
                }
                p
            }
            None => {
                order.push(contract.ticker.clone());
                pending.entry(contract.ticker.clone()).or_insert(PendingContract {
                    contract,
                    quotes: Vec::new(),
                })
            }
        };
        if rec[4].is_empty() {
            continue;
        }
        let bid_ask_missing = rec[7].is_empty();
        let quote = OptionQuote {
            strike: parse_field(&rec[4], line, "strike")?,
            is_call: parse_bool(&rec[5], line)?,
            mkt_vol: parse_field(&rec[6], line, "mkt_vol")?,
            bid_ask: if bid_ask_missing {
                T::zero()
            } else {
                parse_field(&rec[7], line, "bid_ask")?
            },
            volume: parse_field(&rec[8], line, "volume")?,
        };
        if quote.volume == T::zero() && bid_ask_missing {
            continue;
        }
        quote.validate().map_err(|e| Error::Invariant(format!("line {line}: {e}")))?;
        let f0 = entry.contract.f0;
        if let Some(last) = entry.quotes.last_mut() {
            if quote.strike < last.strike {
                return Err(Error::Invariant(format!(
                    "line {line}: strike {} after {} for {}",
                    quote.strike, last.strike, entry.contract.ticker
                )));
            }
            if quote.strike == last.strike {
                if quote.is_call == last.is_call {
                    return Err(Error::Invariant(format!(
                        "line {line}: duplicate strike {} for {}",
                        quote.strike, entry.contract.ticker
                    )));
                }
                let want_call = quote.strike >= f0;
                if quote.is_call == want_call {
                    *last = quote;
                }
                continue;
            }
        }
        entry.quotes.push(quote);
    }
    let mut slices: Vec<PendingContract<T>> = order
        .into_iter()
        .map(|t| pending.remove(&t).expect("ticker recorded"))
        .collect();
    slices.sort_by(|a, b| a.contract.t_opt.partial_cmp(&b.contract.t_opt).expect("finite"));
    let (contracts, quotes) = slices.into_iter().map(|p| (p.contract, p.quotes)).unzip();
    QuoteSurface::new(valuation_date, contracts, quotes)
}

pub fn load_quote_surface<T: Real>(path: impl AsRef<Path>, valuation_date: NaiveDate) -> Result<QuoteSurface<T>> {
    let file = std::fs::File::open(path)?;
    read_quote_surface(std::io::BufReader::new(file), valuation_date)
}

pub fn write_quote_surface<T: Real, W: Write>(surface: &QuoteSurface<T>, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(QUOTE_HEADER)?;
    for (c, qs) in surface.contracts.iter().zip(&surface.quotes) {
        for q in qs {
            w.write_record([
                c.ticker.clone(),
                c.t_opt.to_string(),
                c.t_fut.to_string(),
                c.f0.to_string(),
                q.strike.to_string(),
                q.is_call.to_string(),
                q.mkt_vol.to_string(),
                q.bid_ask.to_string(),
                q.volume.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Log prices observed at increasing epoch-second timestamps.
#[derive(Debug, Clone, PartialEq)]
pub struct IntradaySeries<T: Real> {
    pub timestamps: Vec<i64>,
    pub log_prices: Vec<T>,
    /// Sampling interval of the returns fed into the daily proxy.
    pub bin_seconds: u32,
}

impl<T: Real> IntradaySeries<T> {
    pub fn new(timestamps: Vec<i64>, log_prices: Vec<T>, bin_seconds: u32) -> Result<Self> {
        if timestamps.len() != log_prices.len() {
            return Err(Error::Invariant("timestamps and prices differ in length".into()));
        }
        if timestamps.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Invariant("timestamps must be strictly increasing".into()));
        }
        if bin_seconds == 0 {
            return Err(Error::Invariant("bin_seconds must be positive".into()));
        }
        Ok(Self {
            timestamps,
            log_prices,
            bin_seconds,
        })
    }
}

/// Trading-session boundaries `[start, end]` in epoch seconds, one per day.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TradingCalendar {
    pub days: Vec<(i64, i64)>,
}

impl TradingCalendar {
    pub fn new(days: Vec<(i64, i64)>) -> Result<Self> {
        if days.iter().any(|(s, e)| s >= e) {
            return Err(Error::Invariant("day start must precede day end".into()));
        }
        if days.windows(2).any(|w| w[0].1 > w[1].0) {
            return Err(Error::Invariant("trading days must be ordered and disjoint".into()));
        }
        Ok(Self { days })
    }
}

fn read_pairs<R: Read>(reader: R, what: &str) -> Result<Vec<(i64, String)>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| Error::Parse {
            line,
            message: e.to_string(),
        })?;
        if rec.len() != 2 {
            return Err(Error::Parse {
                line,
                message: format!("{what}: expected 2 fields"),
            });
        }
        let t = rec[0].parse::<i64>().map_err(|_| Error::Parse {
            line,
            message: format!("{what}: bad epoch {:?}", &rec[0]),
        })?;
        out.push((t, rec[1].to_string()));
    }
    Ok(out)
}

/// Reads `epoch_seconds,log_price` rows.
pub fn read_intraday<T: Real, R: Read>(reader: R, bin_seconds: u32) -> Result<IntradaySeries<T>> {
    let rows = read_pairs(reader, "intraday")?;
    let mut ts = Vec::with_capacity(rows.len());
    let mut px = Vec::with_capacity(rows.len());
    for (i, (t, p)) in rows.into_iter().enumerate() {
        ts.push(t);
        px.push(parse_field(&p, i + 2, "log_price")?);
    }
    IntradaySeries::new(ts, px, bin_seconds)
}

/// Reads `day_start_epoch,day_end_epoch` rows.
pub fn read_calendar<R: Read>(reader: R) -> Result<TradingCalendar> {
    let rows = read_pairs(reader, "calendar")?;
    let mut days = Vec::with_capacity(rows.len());
    for (i, (s, e)) in rows.into_iter().enumerate() {
        let e = e.parse::<i64>().map_err(|_| Error::Parse {
            line: i + 2,
            message: format!("calendar: bad epoch {e:?}"),
        })?;
        days.push((s, e));
    }
    TradingCalendar::new(days)
}

pub const DEFAULT_MIN_RETURNS_PER_DAY: usize = 50;

/// Daily realized-volatility proxies `sqrt(sum r^2)` from returns sampled
/// every `bin_seconds` (previous-tick) inside each calendar day.
///
/// Days with fewer than `min_returns_per_day` returns are dropped.
pub fn daily_rv_proxies<T: Real>(
    series: &IntradaySeries<T>,
    calendar: &TradingCalendar,
    min_returns_per_day: usize,
) -> Result<Vec<(usize, T)>> {
    let bin = i64::from(series.bin_seconds);
    let mut out = Vec::new();
    for (day, &(start, end)) in calendar.days.iter().enumerate() {
        let lo = series.timestamps.partition_point(|t| *t < start);
        let hi = series.timestamps.partition_point(|t| *t <= end);
        if lo >= hi {
            continue;
        }
        let ts = &series.timestamps[lo..hi];
        let px = &series.log_prices[lo..hi];
        let mut cursor = 0usize;
        let mut prev: Option<T> = None;
        let mut sum_sq = T::zero();
        let mut n_returns = 0usize;
        let mut boundary = start;
        while boundary <= end {
            while cursor + 1 < ts.len() && ts[cursor + 1] <= boundary {
                cursor += 1;
            }
            if ts[cursor] <= boundary {
                let p = px[cursor];
                if let Some(q) = prev {
                    let r = p - q;
                    sum_sq = sum_sq + r * r;
                    n_returns += 1;
                }
                prev = Some(p);
            }
            boundary += bin;
        }
        if n_returns >= min_returns_per_day && n_returns > 0 {
            out.push((day, sum_sq.sqrt()));
        }
    }
    if out.is_empty() {
        return Err(Error::EmptyOutput);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn date() -> NaiveDate {
        NaiveDate::from_ymd_opt(2025, 3, 14).unwrap()
    }

    fn parse(src: &str) -> Result<QuoteSurface<f64>> {
        read_quote_surface(src.as_bytes(), date())
    }

    const HEADER: &str = "ticker,t_opt,t_fut,f0,strike,is_call,mkt_vol,bid_ask,volume\n";

    #[test]
    fn seven_contracts_sorted_by_expiry() {
        let tickers = [
            ("CLZ5", 0.679, 0.6877),
            ("CLJ5", 0.0082, 0.0164),
            ("CLK5", 0.0904, 0.1068),
            ("CLM5", 0.1753, 0.1890),
            ("CLN5", 0.2603, 0.2712),
            ("CLQ5", 0.3425, 0.3562),
            ("CLU5", 0.4219, 0.4356),
        ];
        let mut src = HEADER.to_string();
        for (t, to, tf) in tickers {
            src += &format!("{t},{to},{tf},67.5,65,false,0.35,0.01,120\n{t},{to},{tf},67.5,70,true,0.33,0.01,80\n");
        }
        let s = parse(&src).unwrap();
        assert_eq!(s.n_maturities(), 7);
        let names: Vec<_> = s.contracts.iter().map(|c| c.ticker.as_str()).collect();
        assert_eq!(names, ["CLJ5", "CLK5", "CLM5", "CLN5", "CLQ5", "CLU5", "CLZ5"]);
    }

    #[test]
    fn empty_contract_is_invariant_error() {
        let src = format!("{HEADER}CLJ5,0.1,0.12,67,,,,,\nCLK5,0.2,0.22,67,65,false,0.3,0.01,10\n");
        assert!(matches!(parse(&src), Err(Error::Invariant(_))));
    }

    #[test]
    fn decreasing_strikes_rejected() {
        let src = format!(
            "{HEADER}CLJ5,0.1,0.12,67,60,true,0.3,0.01,10\nCLJ5,0.1,0.12,67,55,true,0.3,0.01,10\n"
        );
        assert!(matches!(parse(&src), Err(Error::Invariant(_))));
    }

    #[test]
    fn t_opt_after_t_fut_rejected() {
        let src = format!("{HEADER}CLJ5,0.2,0.1,67,60,true,0.3,0.01,10\n");
        assert!(matches!(parse(&src), Err(Error::Invariant(_))));
    }

    #[test]
    fn malformed_row_reports_line() {
        let src = format!("{HEADER}CLJ5,0.1,0.12,67,60,true,0.3,0.01,10\nCLJ5,0.1,0.12,67,x,true,0.3,0.01,10\n");
        match parse(&src) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn illiquid_rows_dropped_and_otm_side_kept() {
        let src = format!(
            "{HEADER}\
CLJ5,0.1,0.12,67,60,false,0.40,0.02,5\n\
CLJ5,0.1,0.12,67,60,true,0.41,0.02,5\n\
CLJ5,0.1,0.12,67,65,true,0.50,,0\n\
CLJ5,0.1,0.12,67,70,false,0.30,0.02,5\n\
CLJ5,0.1,0.12,67,70,true,0.31,,7\n"
        );
        let s = parse(&src).unwrap();
        let q = &s.quotes[0];
        assert_eq!(q.len(), 2);
        assert!(!q[0].is_call && q[0].mkt_vol == 0.40);
        assert!(q[1].is_call && q[1].mkt_vol == 0.31);
        assert_eq!(q[1].bid_ask, 0.0);
    }

    #[test]
    fn roundtrip_is_lossless() {
        let src = format!(
            "{HEADER}CLK5,0.0904109589041096,0.106849315068,67.18,60,false,0.412345678901234,0.0125,1234\n\
CLK5,0.0904109589041096,0.106849315068,67.18,70,true,0.33,0.01,10\n"
        );
        let s = parse(&src).unwrap();
        let mut buf = Vec::new();
        write_quote_surface(&s, &mut buf).unwrap();
        let back = read_quote_surface::<f64, _>(buf.as_slice(), date()).unwrap();
        assert_eq!(back, s);
    }

    fn series_from_returns(returns: &[f64], bin: u32) -> (IntradaySeries<f64>, TradingCalendar) {
        let mut ts = vec![0i64];
        let mut px = vec![4.0];
        for (i, r) in returns.iter().enumerate() {
            ts.push((i as i64 + 1) * i64::from(bin));
            px.push(px.last().unwrap() + r);
        }
        let end = *ts.last().unwrap();
        (
            IntradaySeries::new(ts, px, bin).unwrap(),
            TradingCalendar::new(vec![(0, end)]).unwrap(),
        )
    }

    #[test]
    fn rv_of_three_returns() {
        let (s, cal) = series_from_returns(&[0.01, -0.01, 0.02], 300);
        let rv = daily_rv_proxies(&s, &cal, 3).unwrap();
        assert_eq!(rv.len(), 1);
        assert!((rv[0].1 - 6e-4_f64.sqrt()).abs() < 1e-12);
        assert!((rv[0].1 - 0.024495).abs() < 1e-6);
    }

    #[test]
    fn constant_day_retained_with_zero_rv() {
        let (s, cal) = series_from_returns(&[0.0; 60], 300);
        let rv = daily_rv_proxies(&s, &cal, 50).unwrap();
        assert_eq!(rv, vec![(0, 0.0)]);
    }

    #[test]
    fn sparse_day_dropped() {
        let (s, cal) = series_from_returns(&[0.01, -0.01, 0.02], 300);
        assert!(matches!(daily_rv_proxies(&s, &cal, 50), Err(Error::EmptyOutput)));
    }

    #[test]
    fn coarser_sampling_of_fine_ticks() {
        // 10-second ticks aggregated to 5-minute returns: only bin boundaries matter
        let mut ts = Vec::new();
        let mut px = Vec::new();
        for k in 0..=90 {
            ts.push(k * 10);
            px.push(if k % 30 == 0 { (k / 30) as f64 * 0.01 } else { 9.0 });
        }
        let s = IntradaySeries::new(ts, px, 300).unwrap();
        let cal = TradingCalendar::new(vec![(0, 900)]).unwrap();
        let rv = daily_rv_proxies(&s, &cal, 1).unwrap();
        assert!((rv[0].1 - (3.0 * 1e-4_f64).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn reads_intraday_and_calendar_csv() {
        let s: IntradaySeries<f64> =
            read_intraday("epoch_seconds,log_price\n0,4.1\n300,4.2\n".as_bytes(), 300).unwrap();
        assert_eq!(s.timestamps, vec![0, 300]);
        let c = read_calendar("day_start_epoch,day_end_epoch\n0,600\n".as_bytes()).unwrap();
        assert_eq!(c.days, vec![(0, 600)]);
        assert!(read_intraday::<f64, _>("epoch_seconds,log_price\n300,4.1\n0,4.2\n".as_bytes(), 300).is_err());
    }

    proptest! {
        #[test]
        fn random_surface_roundtrip(
            f0 in 20.0..150.0f64,
            rows in prop::collection::vec((0.1..8.0f64, 0.05..1.5f64, 0.0..0.05f64, 1u32..5000), 1..12),
            t_opt in 0.01..2.0f64,
        ) {
            let mut src = HEADER.to_string();
            let mut k = f0 * 0.5;
            for (step, vol, ba, volume) in &rows {
                k += step;
                src.push_str(&format!("CLZ5,{t_opt},{},{f0},{k},{},{vol},{ba},{volume}\n", t_opt + 0.02, k >= f0));
            }
            let s = parse(&src).unwrap();
            let mut buf = Vec::new();
            write_quote_surface(&s, &mut buf).unwrap();
            let back = read_quote_surface::<f64, _>(buf.as_slice(), date()).unwrap();
            prop_assert_eq!(back, s);
        }

        #[test]
        fn rv_shift_and_scale(returns in prop::collection::vec(-0.05..0.05f64, 5..40), shift in -3.0..3.0f64, c in 0.1..5.0f64) {
            let (s, cal) = series_from_returns(&returns, 300);
            let base = daily_rv_proxies(&s, &cal, 1).unwrap()[0].1;
            let shifted = IntradaySeries::new(
                s.timestamps.clone(),
                s.log_prices.iter().map(|p| p + shift).collect(),
                300,
            ).unwrap();
            let rv_shift = daily_rv_proxies(&shifted, &cal, 1).unwrap()[0].1;
            prop_assert!((rv_shift - base).abs() < 1e-9);
            let scaled: Vec<f64> = returns.iter().map(|r| r * c).collect();
            let (s2, cal2) = series_from_returns(&scaled, 300);
            let rv_scaled = daily_rv_proxies(&s2, &cal2, 1).unwrap()[0].1;
            prop_assert!((rv_scaled - c * base).abs() < 1e-9 * (1.0 + c * base));
        }
    }
}
