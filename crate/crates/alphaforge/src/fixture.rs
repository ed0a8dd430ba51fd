//! Deterministic synthetic markets and news.
//!
//! Every ticker follows a geometric random walk whose drift and volatility
//! change by scripted segment. Random numbers come from ChaCha8
//! (`rand_chacha`), seeded with `seed_from_u64(seed)` and switched to stream
//! `k` for the `k`-th ticker, with normals drawn through `rand_distr`'s
//! `StandardNormal`. The generator description is written into the
//! `fixture.json` manifest next to the data, since the CSV headers are fixed.

use std::path::Path;

use alphaforge_core::{Bar, BarSeries, NaiveDate, ScoredArticle};
use chrono::{Datelike, NaiveTime, TimeZone};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::io::{self, DataError};

pub const GENERATOR: &str =
    "ChaCha8Rng (rand_chacha 0.9), seed_from_u64(seed), stream = ticker index; normals: rand_distr 0.5 StandardNormal";

#[derive(Debug, Error)]
pub enum FixtureError {
    #[error("invalid fixture spec: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Data(#[from] DataError),
}

/// A stretch of trading days with constant log drift and volatility per day.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub days: usize,
    pub drift: f64,
    pub volatility: f64,
}

impl Segment {
    pub fn new(days: usize, drift: f64, volatility: f64) -> Self {
        Self {
            days,
            drift,
            volatility,
        }
    }
}

/// One scripted article, published at 08:00 New York time on `date` so that
/// it counts toward that trading day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NewsInjection {
    pub ticker: String,
    pub date: NaiveDate,
    pub p_pos: f64,
    pub p_neu: f64,
    pub p_neg: f64,
}

impl NewsInjection {
    /// An article whose polarity `p_pos - p_neg` is exactly `score`.
    pub fn with_score(ticker: impl Into<String>, date: NaiveDate, score: f64) -> Self {
        let (p_pos, p_neg) = if score >= 0.0 {
            (score, 0.0)
        } else {
            (0.0, -score)
        };
        Self {
            ticker: ticker.into(),
            date,
            p_pos,
            p_neu: 1.0 - p_pos - p_neg,
            p_neg,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureSpec {
    pub tickers: Vec<String>,
    /// First trading day; weekends are skipped.
    pub start: NaiveDate,
    pub days: usize,
    pub segments: Vec<Segment>,
    pub news: Vec<NewsInjection>,
    pub seed: u64,
    pub start_price: f64,
}

impl FixtureSpec {
    /// `count` tickers named `SYM00`, `SYM01`, ... over `segments`.
    pub fn new(count: usize, start: NaiveDate, segments: Vec<Segment>, seed: u64) -> Self {
        Self {
            tickers: (0..count).map(|k| format!("SYM{k:02}")).collect(),
            start,
            days: segments.iter().map(|s| s.days).sum(),
            segments,
            news: Vec::new(),
            seed,
            start_price: 100.0,
        }
    }

    pub fn validate(&self) -> Result<(), FixtureError> {
        let invalid = |m: &str| Err(FixtureError::InvalidSpec(m.into()));
        if self.tickers.is_empty() {
            return invalid("no tickers");
        }
        if self.segments.iter().map(|s| s.days).sum::<usize>() != self.days {
            return invalid("segment lengths must sum to days");
        }
        if self
            .segments
            .iter()
            .any(|s| !(s.volatility >= 0.0) || !s.drift.is_finite() || !s.volatility.is_finite())
        {
            return invalid("volatility must be non-negative and finite");
        }
        if !(self.start_price > 0.0) {
            return invalid("start price must be positive");
        }
        let mut names = self.tickers.clone();
        names.sort();
        names.dedup();
        if names.len() != self.tickers.len() {
            return invalid("duplicate ticker");
        }
        Ok(())
    }

    /// The `days` weekdays starting at `start`.
    pub fn calendar(&self) -> Vec<NaiveDate> {
        self.start
            .iter_days()
            .filter(|d| d.weekday().number_from_monday() <= 5)
            .take(self.days)
            .collect()
    }
}

/// Five tickers over 780 weekdays from 2019-01-01 through an uptrend, a
/// drawdown, a recovery and a choppy stretch, with scripted news.
pub fn standard_spec() -> FixtureSpec {
    let start = NaiveDate::from_ymd_opt(2019, 1, 1).unwrap_or_default();
    let mut spec = FixtureSpec::new(
        5,
        start,
        vec![
            Segment::new(300, 0.0008, 0.015),
            Segment::new(120, -0.001, 0.02),
            Segment::new(200, 0.001, 0.012),
            Segment::new(160, -0.0002, 0.018),
        ],
        20190101,
    );
    let calendar = spec.calendar();
    let scores = [0.6, -0.3, -0.85, 0.2, -0.75, 0.9, -0.95];
    for (k, ticker) in spec.tickers.clone().into_iter().enumerate() {
        for (j, day) in calendar.iter().enumerate().skip(230 + 3 * k).step_by(17) {
            spec.news.push(NewsInjection::with_score(
                &ticker,
                *day,
                scores[(j + k) % scores.len()],
            ));
        }
    }
    spec
}

#[derive(Debug, Clone)]
pub struct Fixture {
    pub series: Vec<BarSeries>,
    pub articles: Vec<ScoredArticle>,
}

/// Builds the bars and scripted articles for `spec`.
pub fn generate(spec: &FixtureSpec) -> Result<Fixture, FixtureError> {
    spec.validate()?;
    let calendar = spec.calendar();
    let series = spec
        .tickers
        .iter()
        .enumerate()
        .map(|(k, ticker)| walk(spec, &calendar, k as u64, ticker))
        .collect::<Result<Vec<_>, _>>()?;
    let articles = spec
        .news
        .iter()
        .map(|n| {
            let local = n
                .date
                .and_time(NaiveTime::from_hms_opt(8, 0, 0).unwrap_or_default());
            let at = chrono_tz::America::New_York
                .from_local_datetime(&local)
                .single()
                .ok_or_else(|| FixtureError::InvalidSpec(format!("no 08:00 on {}", n.date)))?
                .fixed_offset();
            ScoredArticle::new(&n.ticker, at, n.p_pos, n.p_neu, n.p_neg)
                .map_err(|e| FixtureError::InvalidSpec(e.to_string()))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Fixture { series, articles })
}

fn walk(
    spec: &FixtureSpec,
    calendar: &[NaiveDate],
    stream: u64,
    ticker: &str,
) -> Result<BarSeries, FixtureError> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(stream);
    let mut prev_close = spec.start_price;
    let mut bars = Vec::with_capacity(spec.days);
    let mut dates = calendar.iter();
    for seg in &spec.segments {
        for _ in 0..seg.days {
            let date = *dates
                .next()
                .ok_or_else(|| FixtureError::InvalidSpec("calendar too short".into()))?;
            let gap: f64 = rng.sample(StandardNormal);
            let z: f64 = rng.sample(StandardNormal);
            let wick: f64 = rng.sample(StandardNormal);
            let volume = rng.random_range(500_000..1_500_000u64);
            let open = prev_close * (0.25 * seg.volatility * gap).exp();
            let close = prev_close * (seg.drift + seg.volatility * z).exp();
            let u = (0.5 * seg.volatility * wick.abs()).min(0.99);
            let high = open.max(close) * (1.0 + u);
            let low = open.min(close) * (1.0 - u);
            let bar = Bar::new(date, open, high, low, close, volume)
                .map_err(|e| FixtureError::InvalidSpec(format!("{ticker}: {e}")))?;
            bars.push(bar);
            prev_close = close;
        }
    }
    BarSeries::new(ticker, bars).map_err(|e| FixtureError::InvalidSpec(e.to_string()))
}

#[derive(Serialize)]
struct Manifest<'a> {
    generator: &'a str,
    spec: &'a FixtureSpec,
}

/// Writes `prices/<TICKER>.csv` per ticker plus `news.csv` and
/// `fixture.json` into `dir`.
pub fn write(dir: &Path, spec: &FixtureSpec, fixture: &Fixture) -> Result<(), FixtureError> {
    for s in &fixture.series {
        io::write_ohlcv(&dir.join("prices").join(format!("{}.csv", s.ticker())), s)?;
    }
    io::write_articles(&dir.join("news.csv"), &fixture.articles)?;
    let manifest = serde_json::to_string_pretty(&Manifest {
        generator: GENERATOR,
        spec,
    })
    .map_err(|source| DataError::Json {
        path: dir.join("fixture.json"),
        source,
    })?;
    std::fs::write(dir.join("fixture.json"), manifest + "\n").map_err(|source| DataError::Io {
        path: dir.join("fixture.json"),
        source,
    })?;
    Ok(())
}
