//! Closure-price CSV loading and log-return construction.
//!
//! Input files carry a `date,close` header with ISO-8601 dates. Rows are
//! sorted by date; the series is treated as contiguous in trading-day index,
//! so gaps from weekends and holidays are not imputed.

use std::io::{Read, Write};
use std::path::Path;

pub use chrono::NaiveDate;
use chrono::{Datelike, Duration, Weekday};
use serde::Serialize;

use crate::{Error, Result};

/// Dated closure prices on a trading-day calendar.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PriceSeries {
    pub market_id: String,
    pub dates: Vec<NaiveDate>,
    pub values: Vec<f64>,
}

impl PriceSeries {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Log returns `ln(S(t+lag) / S(t))`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReturnSeries {
    pub market_id: String,
    pub values: Vec<f64>,
    pub lag: usize,
}

impl ReturnSeries {
    pub fn new(market_id: impl Into<String>, values: Vec<f64>) -> Self {
        Self {
            market_id: market_id.into(),
            values,
            lag: 1,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Cumulative sum of the returns, the profile DMA operates on.
    pub fn profile(&self) -> Vec<f64> {
        self.values
            .iter()
            .scan(0.0, |acc, &r| {
                *acc += r;
                Some(*acc)
            })
            .collect()
    }
}

pub fn load_prices(path: impl AsRef<Path>, market_id: &str) -> Result<PriceSeries> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    read_prices(file, market_id)
}

pub fn read_prices<R: Read>(reader: R, market_id: &str) -> Result<PriceSeries> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let headers = rdr.headers().map_err(|e| Error::Parse {
        line: 1,
        message: e.to_string(),
    })?;
    let date_col = headers.iter().position(|h| h.eq_ignore_ascii_case("date"));
    let close_col = headers.iter().position(|h| h.eq_ignore_ascii_case("close"));
    let (Some(date_col), Some(close_col)) = (date_col, close_col) else {
        return Err(Error::Parse {
            line: 1,
            message: format!(
                "expected header `date,close`, got `{}`",
                headers.iter().collect::<Vec<_>>().join(",")
            ),
        });
    };

    let mut rows: Vec<(NaiveDate, f64)> = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| Error::Parse {
            line,
            message: e.to_string(),
        })?;
        let date_str = rec.get(date_col).unwrap_or("");
        let close_str = rec.get(close_col).unwrap_or("");
        let date = NaiveDate::parse_from_str(date_str, "%Y-%m-%d").map_err(|e| Error::Parse {
            line,
            message: format!("bad date `{date_str}`: {e}"),
        })?;
        if close_str.is_empty() {
            return Err(Error::Parse {
                line,
                message: format!("missing close price on {date}"),
            });
        }
        let close: f64 = close_str.parse().map_err(|_| Error::Parse {
            line,
            message: format!("bad close price `{close_str}` on {date}"),
        })?;
        if !close.is_finite() {
            return Err(Error::Parse {
                line,
                message: format!("non-finite close price on {date}"),
            });
        }
        if close <= 0.0 {
            return Err(Error::NonPositivePrice {
                date: date.to_string(),
                value: close,
            });
        }
        rows.push((date, close));
    }

    rows.sort_by_key(|(d, _)| *d);
    if let Some(w) = rows.windows(2).find(|w| w[0].0 == w[1].0) {
        return Err(Error::Parse {
            line: 0,
            message: format!("duplicate date {}", w[0].0),
        });
    }
    if rows.len() < 2 {
        return Err(Error::EmptySeries { len: rows.len() });
    }
    let (dates, values) = rows.into_iter().unzip();
    Ok(PriceSeries {
        market_id: market_id.to_string(),
        dates,
        values,
    })
}

pub fn log_returns(prices: &PriceSeries, lag: usize) -> Result<ReturnSeries> {
    if lag == 0 {
        return Err(Error::InvalidArgument("lag must be at least 1".into()));
    }
    if prices.len() <= lag {
        return Err(Error::SeriesTooShort {
            len: prices.len(),
            needed: lag + 1,
        });
    }
    let values = prices
        .values
        .iter()
        .zip(&prices.values[lag..])
        .map(|(s0, s1)| (s1 / s0).ln())
        .collect();
    Ok(ReturnSeries {
        market_id: prices.market_id.clone(),
        values,
        lag,
    })
}

/// Consecutive weekdays starting at `start` (rolled forward off weekends).
pub fn trading_calendar(start: NaiveDate, len: usize) -> Vec<NaiveDate> {
    let mut out = Vec::with_capacity(len);
    let mut d = start;
    while out.len() < len {
        if !matches!(d.weekday(), Weekday::Sat | Weekday::Sun) {
            out.push(d);
        }
        d += Duration::days(1);
    }
    out
}

/// Rebuild a price path from unit-lag returns, starting at `start_price`.
pub fn prices_from_returns(returns: &ReturnSeries, start: NaiveDate, start_price: f64) -> PriceSeries {
    let mut values = Vec::with_capacity(returns.len() + 1);
    let mut s = start_price;
    values.push(s);
    for r in &returns.values {
        s *= r.exp();
        values.push(s);
    }
    PriceSeries {
        market_id: returns.market_id.clone(),
        dates: trading_calendar(start, values.len()),
        values,
    }
}

pub fn write_prices<W: Write>(prices: &PriceSeries, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let to_err = |e: csv::Error| Error::Io {
        path: "<csv>".into(),
        source: std::io::Error::other(e.to_string()),
    };
    w.write_record(["date", "close"]).map_err(to_err)?;
    for (d, v) in prices.dates.iter().zip(&prices.values) {
        w.write_record([d.to_string(), format!("{v:.12}")]).map_err(to_err)?;
    }
    w.flush().map_err(|source| Error::Io {
        path: "<csv>".into(),
        source,
    })?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn parse(s: &str) -> Result<PriceSeries> {
        read_prices(s.as_bytes(), "TEST")
    }

    fn series(values: Vec<f64>) -> PriceSeries {
        let dates = trading_calendar(NaiveDate::from_ymd_opt(2020, 1, 1).unwrap(), values.len());
        PriceSeries {
            market_id: "X".into(),
            dates,
            values,
        }
    }

    #[test]
    fn two_rows() {
        let p = parse("date,close\n2020-01-02,100.0\n2020-01-03,110.0\n").unwrap();
        assert_eq!(p.len(), 2);
        assert_eq!(p.values, vec![100.0, 110.0]);
    }

    #[test]
    fn unsorted_rows_are_sorted() {
        let p = parse("date,close\n2020-01-03,110\n2020-01-02,100\n").unwrap();
        assert_eq!(p.values, vec![100.0, 110.0]);
        assert!(p.dates[0] < p.dates[1]);
    }

    #[test]
    fn duplicate_date_names_the_date() {
        let err = parse("date,close\n2020-01-02,100\n2020-01-02,101\n2020-01-03,102\n").unwrap_err();
        match err {
            Error::Parse { message, .. } => assert!(message.contains("2020-01-02"), "{message}"),
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn zero_price_rejected() {
        let err = parse("date,close\n2020-01-02,100\n2020-01-03,0\n").unwrap_err();
        assert!(matches!(err, Error::NonPositivePrice { .. }));
    }

    #[test]
    fn bad_date_and_missing_price() {
        assert!(matches!(
            parse("date,close\n2020-13-02,100\n2020-01-03,1\n"),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(matches!(
            parse("date,close\n2020-01-02,\n2020-01-03,1\n"),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(matches!(
            parse("day,price\n2020-01-02,1\n"),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn one_row_is_empty_series() {
        assert!(matches!(
            parse("date,close\n2020-01-02,100\n"),
            Err(Error::EmptySeries { len: 1 })
        ));
    }

    #[test]
    fn returns_of_two_prices() {
        let r = log_returns(&series(vec![100.0, 110.0]), 1).unwrap();
        assert_eq!(r.len(), 1);
        assert!((r.values[0] - 1.1f64.ln()).abs() < 1e-15);
        assert!((r.values[0] - 0.095310).abs() < 1e-6);
    }

    #[test]
    fn constant_prices_give_zero_returns() {
        let r = log_returns(&series(vec![50.0; 3]), 1).unwrap();
        assert_eq!(r.values, vec![0.0, 0.0]);
    }

    #[test]
    fn lag_must_fit() {
        assert!(matches!(
            log_returns(&series(vec![1.0, 2.0]), 2),
            Err(Error::SeriesTooShort { .. })
        ));
        let r = log_returns(&series(vec![1.0, 2.0, 4.0, 8.0]), 2).unwrap();
        assert_eq!(r.lag, 2);
        assert_eq!(r.len(), 2);
        assert!((r.values[0] - 4f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn calendar_skips_weekends() {
        // 2020-01-03 is a Friday.
        let cal = trading_calendar(NaiveDate::from_ymd_opt(2020, 1, 3).unwrap(), 3);
        assert_eq!(cal[1], NaiveDate::from_ymd_opt(2020, 1, 6).unwrap());
        assert_eq!(cal[2], NaiveDate::from_ymd_opt(2020, 1, 7).unwrap());
    }

    #[test]
    fn csv_round_trip_preserves_returns() {
        let r = ReturnSeries::new("RT", vec![0.01, -0.02, 0.005, 0.0]);
        let p = prices_from_returns(&r, NaiveDate::from_ymd_opt(2021, 3, 1).unwrap(), 100.0);
        let mut buf = Vec::new();
        write_prices(&p, &mut buf).unwrap();
        let back = log_returns(&read_prices(buf.as_slice(), "RT").unwrap(), 1).unwrap();
        for (a, b) in back.values.iter().zip(&r.values) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    proptest! {
        #[test]
        fn telescoping_sum(prices in prop::collection::vec(0.01f64..1e6, 2..200)) {
            let p = series(prices.clone());
            let r = log_returns(&p, 1).unwrap();
            let total: f64 = r.values.iter().sum();
            let expect = (prices[prices.len() - 1] / prices[0]).ln();
            prop_assert!((total - expect).abs() <= 1e-12 * expect.abs().max(1.0) * prices.len() as f64);
            prop_assert!(r.values.iter().all(|v| v.is_finite()));
        }

        #[test]
        fn scale_invariance(prices in prop::collection::vec(0.01f64..1e4, 2..100), c in 1e-3f64..1e3) {
            let a = log_returns(&series(prices.clone()), 1).unwrap();
            let b = log_returns(&series(prices.iter().map(|v| v * c).collect()), 1).unwrap();
            for (x, y) in a.values.iter().zip(&b.values) {
                prop_assert!((x - y).abs() <= 1e-12);
            }
        }
    }
}
