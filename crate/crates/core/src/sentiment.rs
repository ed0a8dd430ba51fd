//! Daily news sentiment per ticker and the negative-news gate.
//!
//! An article counts toward trading day `d` when it was published at or after
//! the previous trading day's 09:30 US Eastern open and strictly before
//! 09:30 Eastern on `d`, so every article lands on exactly one day. The
//! daily score is the mean of `p_pos - p_neg` over those articles. A day
//! without articles has no score, which never blocks a trade.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use chrono::{DateTime, Days, FixedOffset, LocalResult, NaiveDate, NaiveTime, TimeZone, Utc};
use chrono_tz::America::New_York;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Probabilities must sum to one within this tolerance.
pub const SIMPLEX_TOLERANCE: f64 = 1e-6;

/// Default gate level: a daily score strictly below this blocks entries and
/// forces exits.
pub const DEFAULT_GATE: f64 = -0.70;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SentimentError {
    #[error("article for {ticker} at {published_at}: probabilities ({p_pos}, {p_neu}, {p_neg}) are not on the simplex")]
    InvalidProbabilities {
        ticker: String,
        published_at: DateTime<FixedOffset>,
        p_pos: f64,
        p_neu: f64,
        p_neg: f64,
    },
}

/// One news article with classifier probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredArticle {
    pub ticker: String,
    pub published_at: DateTime<FixedOffset>,
    pub p_pos: f64,
    pub p_neu: f64,
    pub p_neg: f64,
}

impl ScoredArticle {
    pub fn new(
        ticker: impl Into<String>,
        published_at: DateTime<FixedOffset>,
        p_pos: f64,
        p_neu: f64,
        p_neg: f64,
    ) -> Result<Self, SentimentError> {
        let article = Self {
            ticker: ticker.into(),
            published_at,
            p_pos,
            p_neu,
            p_neg,
        };
        article.validate()?;
        Ok(article)
    }

    pub fn validate(&self) -> Result<(), SentimentError> {
        let probs = [self.p_pos, self.p_neu, self.p_neg];
        let in_range = probs.iter().all(|p| (0.0..=1.0).contains(p));
        let sum: f64 = probs.iter().sum();
        if in_range && (sum - 1.0).abs() <= SIMPLEX_TOLERANCE {
            Ok(())
        } else {
            Err(SentimentError::InvalidProbabilities {
                ticker: self.ticker.clone(),
                published_at: self.published_at,
                p_pos: self.p_pos,
                p_neu: self.p_neu,
                p_neg: self.p_neg,
            })
        }
    }

    /// `p_pos - p_neg`, in `[-1, 1]`.
    pub fn polarity(&self) -> f64 {
        self.p_pos - self.p_neg
    }
}

/// Aggregated sentiment for one ticker on one trading day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DailySentiment {
    pub ticker: String,
    pub date: NaiveDate,
    /// `None` when no article fell in the window.
    pub score: Option<f64>,
    pub n_articles: usize,
}

/// 09:30 US Eastern on `date` (daylight saving honored), as a UTC instant.
pub fn market_cutoff(date: NaiveDate) -> DateTime<Utc> {
    let open = NaiveTime::from_hms_opt(9, 30, 0).unwrap_or(NaiveTime::MIN);
    let local = date.and_time(open);
    match New_York.from_local_datetime(&local) {
        LocalResult::Single(t) | LocalResult::Ambiguous(t, _) => t.with_timezone(&Utc),
        // 09:30 is never skipped by US transitions; fall back to the EST offset.
        LocalResult::None => Utc.from_utc_datetime(&(local + chrono::Duration::hours(5))),
    }
}

/// Start of the attribution window for `date`.
fn window_start(date: NaiveDate, previous_trading_date: Option<NaiveDate>) -> DateTime<Utc> {
    let prev = previous_trading_date
        .or_else(|| date.checked_sub_days(Days::new(1)))
        .unwrap_or(date);
    market_cutoff(prev)
}

fn mean_polarity<'a>(articles: impl Iterator<Item = &'a ScoredArticle>) -> (Option<f64>, usize) {
    let (sum, n) = articles.fold((0.0, 0usize), |(s, n), a| (s + a.polarity(), n + 1));
    if n == 0 {
        (None, 0)
    } else {
        (Some((sum / n as f64).clamp(-1.0, 1.0)), n)
    }
}

/// Daily score for `ticker` on `trading_date`. Without a previous trading
/// date the window opens 24 hours before the cutoff.
pub fn aggregate_daily(
    articles: &[ScoredArticle],
    ticker: &str,
    trading_date: NaiveDate,
    previous_trading_date: Option<NaiveDate>,
) -> Result<DailySentiment, SentimentError> {
    let lo = window_start(trading_date, previous_trading_date);
    let hi = market_cutoff(trading_date);
    let mut selected = Vec::new();
    for a in articles.iter().filter(|a| a.ticker == ticker) {
        let t = a.published_at.with_timezone(&Utc);
        if lo <= t && t < hi {
            a.validate()?;
            selected.push(a);
        }
    }
    let (score, n_articles) = mean_polarity(selected.into_iter());
    Ok(DailySentiment {
        ticker: ticker.into(),
        date: trading_date,
        score,
        n_articles,
    })
}

/// True iff a score exists and is strictly below `threshold`.
pub fn gate_blocks_entry(sentiment: Option<&DailySentiment>, threshold: f64) -> bool {
    matches!(sentiment.and_then(|s| s.score), Some(s) if s < threshold)
}

/// Daily sentiment for every (ticker, trading day) that received news.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SentimentBook {
    days: BTreeMap<(String, NaiveDate), DailySentiment>,
}

impl SentimentBook {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Assigns each article to its trading day on `calendar` (sorted
    /// ascending) and aggregates. Articles outside every window are dropped.
    pub fn build(
        articles: &[ScoredArticle],
        calendar: &[NaiveDate],
    ) -> Result<Self, SentimentError> {
        let cutoffs: Vec<DateTime<Utc>> = calendar.iter().map(|&d| market_cutoff(d)).collect();
        let first_open = calendar.first().map(|&d| window_start(d, None));
        let mut grouped: BTreeMap<(String, NaiveDate), Vec<&ScoredArticle>> = BTreeMap::new();
        for a in articles {
            a.validate()?;
            let t = a.published_at.with_timezone(&Utc);
            let k = cutoffs.partition_point(|c| *c <= t);
            if k == calendar.len() || (k == 0 && first_open.is_some_and(|open| t < open)) {
                continue;
            }
            grouped
                .entry((a.ticker.clone(), calendar[k]))
                .or_default()
                .push(a);
        }
        let days = grouped
            .into_iter()
            .map(|((ticker, date), list)| {
                let (score, n_articles) = mean_polarity(list.into_iter());
                let day = DailySentiment {
                    ticker: ticker.clone(),
                    date,
                    score,
                    n_articles,
                };
                ((ticker, date), day)
            })
            .collect();
        Ok(Self { days })
    }

    pub fn get(&self, ticker: &str, date: NaiveDate) -> Option<&DailySentiment> {
        // BTreeMap lookups need an owned key for tuple keys
        self.days.get(&(String::from(ticker), date))
    }

    pub fn insert(&mut self, day: DailySentiment) {
        self.days.insert((day.ticker.clone(), day.date), day);
    }

    pub fn iter(&self) -> impl Iterator<Item = &DailySentiment> {
        self.days.values()
    }

    pub fn len(&self) -> usize {
        self.days.len()
    }

    pub fn is_empty(&self) -> bool {
        self.days.is_empty()
    }
}
