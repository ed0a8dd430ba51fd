//! Daily OHLCV bars, per-ticker series and the multi-ticker universe.
//!
//! Inputs are assumed to be split- and dividend-adjusted already. Series are
//! never forward-filled: a ticker without a bar on a calendar day is simply
//! absent from that day.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::math;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MarketError {
    #[error("bar on {date}: {reason}")]
    InvariantViolation {
        date: NaiveDate,
        reason: &'static str,
    },
    #[error("duplicate bar for {date}")]
    DuplicateDate { date: NaiveDate },
    #[error("series '{ticker}' has no bars")]
    EmptySeries { ticker: String },
    #[error("ticker '{0}' appears more than once")]
    DuplicateTicker(String),
    #[error("universe has no tickers")]
    EmptyUniverse,
    #[error("split would leave a segment empty ({train} train / {test} test bars)")]
    DegenerateSplit { train: usize, test: usize },
    #[error("train fraction {0} is outside (0, 1)")]
    InvalidFraction(f64),
    #[error("date range starts {start} after it ends {end}")]
    InvalidRange { start: NaiveDate, end: NaiveDate },
}

/// Half-open calendar window `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DateRange {
    pub start: NaiveDate,
    pub end: NaiveDate,
}

impl DateRange {
    pub fn new(start: NaiveDate, end: NaiveDate) -> Result<Self, MarketError> {
        if start > end {
            return Err(MarketError::InvalidRange { start, end });
        }
        Ok(Self { start, end })
    }

    /// Everything from the earliest to the latest representable date.
    pub fn unbounded() -> Self {
        Self {
            start: NaiveDate::MIN,
            end: NaiveDate::MAX,
        }
    }

    #[inline]
    pub fn contains(&self, date: NaiveDate) -> bool {
        self.start <= date && date < self.end
    }

    /// Length in years, counting 365.25 days per year.
    pub fn years(&self) -> f64 {
        (self.end - self.start).num_days() as f64 / 365.25
    }
}

/// One trading day of prices.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bar {
    pub date: NaiveDate,
    pub open: f64,
    pub high: f64,
    pub low: f64,
    pub close: f64,
    pub volume: u64,
}

impl Bar {
    /// Builds a bar, rejecting non-positive prices and inconsistent ranges.
    pub fn new(
        date: NaiveDate,
        open: f64,
        high: f64,
        low: f64,
        close: f64,
        volume: u64,
    ) -> Result<Self, MarketError> {
        let bar = Self {
            date,
            open,
            high,
            low,
            close,
            volume,
        };
        bar.validate()?;
        Ok(bar)
    }

    pub fn validate(&self) -> Result<(), MarketError> {
        let fail = |reason| {
            Err(MarketError::InvariantViolation {
                date: self.date,
                reason,
            })
        };
        let prices = [self.open, self.high, self.low, self.close];
        if prices.iter().any(|p| !p.is_finite()) {
            return fail("non-finite price");
        }
        if prices.iter().any(|&p| p <= 0.0) {
            return fail("prices must be positive");
        }
        if self.high < self.low {
            return fail("high below low");
        }
        if self.low > self.open.min(self.close) {
            return fail("low above open/close");
        }
        if self.high < self.open.max(self.close) {
            return fail("high below open/close");
        }
        Ok(())
    }
}

/// Chronologically ordered bars for one ticker.
#[derive(Debug, Clone, PartialEq)]
pub struct BarSeries {
    ticker: String,
    bars: Vec<Bar>,
}

impl BarSeries {
    /// Validates every bar, sorts ascending by date and rejects duplicate dates.
    pub fn new(ticker: impl Into<String>, mut bars: Vec<Bar>) -> Result<Self, MarketError> {
        let ticker = ticker.into();
        if bars.is_empty() {
            return Err(MarketError::EmptySeries { ticker });
        }
        for bar in &bars {
            bar.validate()?;
        }
        bars.sort_by_key(|b| b.date);
        if let Some(w) = bars.windows(2).find(|w| w[0].date == w[1].date) {
            return Err(MarketError::DuplicateDate { date: w[0].date });
        }
        Ok(Self { ticker, bars })
    }

    pub fn ticker(&self) -> &str {
        &self.ticker
    }

    pub fn bars(&self) -> &[Bar] {
        &self.bars
    }

    pub fn len(&self) -> usize {
        self.bars.len()
    }

    /// Always false for a constructed series; present for API symmetry.
    pub fn is_empty(&self) -> bool {
        self.bars.is_empty()
    }

    pub fn first_date(&self) -> NaiveDate {
        self.bars[0].date
    }

    pub fn last_date(&self) -> NaiveDate {
        self.bars[self.bars.len() - 1].date
    }

    pub fn closes(&self) -> Vec<f64> {
        self.bars.iter().map(|b| b.close).collect()
    }

    pub fn dates(&self) -> impl Iterator<Item = NaiveDate> + '_ {
        self.bars.iter().map(|b| b.date)
    }

    /// Index of the bar dated `date`, if the ticker traded that day.
    pub fn index_of(&self, date: NaiveDate) -> Option<usize> {
        self.bars.binary_search_by_key(&date, |b| b.date).ok()
    }

    /// Bars dated inside `range`, or `None` when nothing is left.
    pub fn restrict(&self, range: &DateRange) -> Option<BarSeries> {
        let lo = self.bars.partition_point(|b| b.date < range.start);
        let hi = self.bars.partition_point(|b| b.date < range.end);
        (lo < hi).then(|| BarSeries {
            ticker: self.ticker.clone(),
            bars: self.bars[lo..hi].to_vec(),
        })
    }

    /// Prefix of the series with every bar dated on or before `date`.
    pub fn truncate_after(&self, date: NaiveDate) -> Option<BarSeries> {
        let hi = self.bars.partition_point(|b| b.date <= date);
        (hi > 0).then(|| BarSeries {
            ticker: self.ticker.clone(),
            bars: self.bars[..hi].to_vec(),
        })
    }
}

/// Splits a series chronologically: the first `ceil(train_fraction * n)` bars
/// train, the remainder test.
pub fn train_test_split(
    series: &BarSeries,
    train_fraction: f64,
) -> Result<(BarSeries, BarSeries), MarketError> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(MarketError::InvalidFraction(train_fraction));
    }
    let n = series.len();
    let cut = split_point(n, train_fraction);
    if cut == 0 || cut >= n {
        return Err(MarketError::DegenerateSplit {
            train: cut.min(n),
            test: n.saturating_sub(cut),
        });
    }
    let (train, test) = series.bars.split_at(cut);
    Ok((
        BarSeries {
            ticker: series.ticker.clone(),
            bars: train.to_vec(),
        },
        BarSeries {
            ticker: series.ticker.clone(),
            bars: test.to_vec(),
        },
    ))
}

/// `ceil(fraction * n)`, ignoring representation error below 1e-9 so that
/// products such as `0.7 * 10` land on the intended integer.
pub(crate) fn split_point(n: usize, fraction: f64) -> usize {
    math::ceil(fraction * n as f64 - 1e-9).max(0.0) as usize
}

/// All tickers under study plus the sorted union of their trading dates.
#[derive(Debug, Clone, PartialEq)]
pub struct Universe {
    series: BTreeMap<String, BarSeries>,
    calendar: Vec<NaiveDate>,
}

impl Universe {
    pub fn new(series: impl IntoIterator<Item = BarSeries>) -> Result<Self, MarketError> {
        let mut map = BTreeMap::new();
        for s in series {
            let ticker = s.ticker.clone();
            if map.insert(ticker.clone(), s).is_some() {
                return Err(MarketError::DuplicateTicker(ticker));
            }
        }
        if map.is_empty() {
            return Err(MarketError::EmptyUniverse);
        }
        let mut calendar: Vec<NaiveDate> = map.values().flat_map(|s| s.dates()).collect();
        calendar.sort_unstable();
        calendar.dedup();
        Ok(Self {
            series: map,
            calendar,
        })
    }

    pub fn tickers(&self) -> impl Iterator<Item = &str> {
        self.series.keys().map(String::as_str)
    }

    pub fn get(&self, ticker: &str) -> Option<&BarSeries> {
        self.series.get(ticker)
    }

    /// Series in alphabetical ticker order.
    pub fn iter(&self) -> impl Iterator<Item = &BarSeries> {
        self.series.values()
    }

    pub fn len(&self) -> usize {
        self.series.len()
    }

    pub fn is_empty(&self) -> bool {
        self.series.is_empty()
    }

    pub fn calendar(&self) -> &[NaiveDate] {
        &self.calendar
    }

    /// Restricts every series to `range`. Tickers left without bars are
    /// dropped and returned alongside the new universe.
    pub fn align_to_calendar(
        &self,
        range: &DateRange,
    ) -> Result<(Universe, Vec<String>), MarketError> {
        let mut kept = Vec::new();
        let mut dropped = Vec::new();
        for s in self.series.values() {
            match s.restrict(range) {
                Some(r) => kept.push(r),
                None => dropped.push(s.ticker.clone()),
            }
        }
        Ok((Universe::new(kept)?, dropped))
    }

    /// Keeps only the named tickers; unknown names are ignored.
    pub fn select<S: AsRef<str>>(&self, tickers: &[S]) -> Result<Universe, MarketError> {
        let kept = self
            .series
            .values()
            .filter(|s| tickers.iter().any(|t| t.as_ref() == s.ticker))
            .cloned();
        Universe::new(kept)
    }

    /// Drops every bar dated after `date`.
    pub fn truncate_after(&self, date: NaiveDate) -> Result<Universe, MarketError> {
        Universe::new(self.series.values().filter_map(|s| s.truncate_after(date)))
    }
}
