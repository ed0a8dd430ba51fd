//! Technical indicators and the per-ticker regime label.
//!
//! Conventions:
//!
//! * EMA(n) uses the multiplier `2 / (n + 1)` and is seeded with the first
//!   close. Its recursion starts on the first bar but values are reported
//!   from index `n - 1` onwards.
//! * MACD is EMA(12) - EMA(26). The signal line is EMA(9) of MACD, seeded
//!   with the first reported MACD value. Histogram = MACD - signal.
//! * RSI(14) and ATR(14) use Wilder smoothing, seeded with the simple mean of
//!   the first 14 gains/losses (RSI) or true ranges (ATR). The first true
//!   range is `high - low`.
//! * Bollinger bands are the 20-day mean of close +/- 2 population standard
//!   deviations; width is `(upper - lower) / mid`.
//! * `vol20` is the 20-day population standard deviation of one-day close
//!   returns, so it is scale free.
//! * The regime is the sign of the 20-day mean of one-day close returns; a
//!   mean of exactly zero is bearish.
//!
//! Every value at index `t` depends only on bars `0..=t`. Values inside a
//! field's warm-up prefix are `None`.

use alloc::vec;
use alloc::vec::Vec;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::market::BarSeries;
use crate::math;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IndicatorError {
    #[error("series has {len} bars, indicators need at least {required}")]
    SeriesTooShort { len: usize, required: usize },
    #[error("indicator period '{0}' must be positive")]
    InvalidPeriod(&'static str),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndicatorParams {
    pub ema_fast: usize,
    pub ema_slow: usize,
    pub macd_fast: usize,
    pub macd_slow: usize,
    pub macd_signal: usize,
    pub rsi: usize,
    pub bollinger: usize,
    pub bollinger_k: f64,
    pub atr: usize,
    pub volatility: usize,
    pub regime: usize,
    pub sma_fast: usize,
    pub sma_slow: usize,
}

impl Default for IndicatorParams {
    fn default() -> Self {
        Self {
            ema_fast: 50,
            ema_slow: 200,
            macd_fast: 12,
            macd_slow: 26,
            macd_signal: 9,
            rsi: 14,
            bollinger: 20,
            bollinger_k: 2.0,
            atr: 14,
            volatility: 20,
            regime: 20,
            sma_fast: 50,
            sma_slow: 200,
        }
    }
}

impl IndicatorParams {
    fn validate(&self) -> Result<(), IndicatorError> {
        let periods = [
            ("ema_fast", self.ema_fast),
            ("ema_slow", self.ema_slow),
            ("macd_fast", self.macd_fast),
            ("macd_slow", self.macd_slow),
            ("macd_signal", self.macd_signal),
            ("rsi", self.rsi),
            ("bollinger", self.bollinger),
            ("atr", self.atr),
            ("volatility", self.volatility),
            ("regime", self.regime),
            ("sma_fast", self.sma_fast),
            ("sma_slow", self.sma_slow),
        ];
        if let Some((name, _)) = periods.iter().find(|(_, p)| *p == 0) {
            return Err(IndicatorError::InvalidPeriod(name));
        }
        if !(self.bollinger_k >= 0.0) {
            return Err(IndicatorError::InvalidPeriod("bollinger_k"));
        }
        Ok(())
    }

    fn macd_warmup(&self) -> usize {
        self.macd_fast.max(self.macd_slow) - 1
    }

    fn signal_warmup(&self) -> usize {
        self.macd_warmup() + self.macd_signal - 1
    }

    /// Fewest bars for which every field has at least one defined value.
    pub fn required_len(&self) -> usize {
        [
            self.ema_fast,
            self.ema_slow,
            self.sma_fast,
            self.sma_slow,
            self.signal_warmup() + 1,
            self.rsi + 1,
            self.bollinger,
            self.atr,
            self.volatility + 1,
            self.regime + 1,
        ]
        .into_iter()
        .max()
        .unwrap_or(1)
    }
}

/// Bullish (+1) or bearish (-1) market state of one ticker.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Regime {
    Bullish,
    Bearish,
}

impl Regime {
    pub fn from_mean_return(r: f64) -> Self {
        if r > 0.0 {
            Regime::Bullish
        } else {
            Regime::Bearish
        }
    }

    pub fn label(self) -> i8 {
        match self {
            Regime::Bullish => 1,
            Regime::Bearish => -1,
        }
    }

    pub fn is_bullish(self) -> bool {
        self == Regime::Bullish
    }
}

/// One indicator over a whole series with its warm-up prefix undefined.
#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    values: Vec<f64>,
    warmup: usize,
}

impl Column {
    fn new(values: Vec<f64>, warmup: usize) -> Self {
        Self { values, warmup }
    }

    /// First index with a defined value.
    pub fn warmup(&self) -> usize {
        self.warmup
    }

    pub fn at(&self, i: usize) -> Option<f64> {
        if i < self.warmup {
            None
        } else {
            self.values.get(i).copied()
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Defined values as `(index, value)` pairs.
    pub fn defined(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.values.iter().copied().enumerate().skip(self.warmup)
    }
}

/// Per-date indicator values for one ticker, aligned with its bar dates.
#[derive(Debug, Clone, PartialEq)]
pub struct IndicatorFrame {
    pub dates: Vec<NaiveDate>,
    pub close: Vec<f64>,
    pub ema50: Column,
    pub ema200: Column,
    pub ema_ratio: Column,
    pub macd: Column,
    pub macd_signal: Column,
    pub macd_hist: Column,
    pub rsi14: Column,
    pub bb_upper: Column,
    pub bb_mid: Column,
    pub bb_lower: Column,
    pub bb_width: Column,
    pub atr14: Column,
    pub vol20: Column,
    pub sma50: Column,
    pub sma200: Column,
    regime: Vec<Option<Regime>>,
}

impl IndicatorFrame {
    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    pub fn index_of(&self, date: NaiveDate) -> Option<usize> {
        self.dates.binary_search(&date).ok()
    }

    pub fn regime(&self, i: usize) -> Option<Regime> {
        self.regime.get(i).copied().flatten()
    }

    /// Columns in indicator-dump order (regime is emitted separately).
    pub fn dump_columns(&self) -> [(&'static str, &Column); 13] {
        [
            ("ema50", &self.ema50),
            ("ema200", &self.ema200),
            ("ema_ratio", &self.ema_ratio),
            ("macd", &self.macd),
            ("macd_signal", &self.macd_signal),
            ("macd_hist", &self.macd_hist),
            ("rsi14", &self.rsi14),
            ("bb_upper", &self.bb_upper),
            ("bb_mid", &self.bb_mid),
            ("bb_lower", &self.bb_lower),
            ("bb_width", &self.bb_width),
            ("atr14", &self.atr14),
            ("vol20", &self.vol20),
        ]
    }
}

/// Computes every indicator and the regime label for `series`.
pub fn compute_indicators(
    series: &BarSeries,
    params: &IndicatorParams,
) -> Result<IndicatorFrame, IndicatorError> {
    params.validate()?;
    let n = series.len();
    let required = params.required_len();
    if n < required {
        return Err(IndicatorError::SeriesTooShort { len: n, required });
    }
    let bars = series.bars();
    let close: Vec<f64> = bars.iter().map(|b| b.close).collect();
    let returns = pct_changes(&close);

    let ema_fast = ema(&close, params.ema_fast);
    let ema_slow = ema(&close, params.ema_slow);
    let ema_ratio: Vec<f64> = ema_fast.iter().zip(&ema_slow).map(|(a, b)| a / b).collect();

    let macd_start = params.macd_warmup();
    let fast = ema(&close, params.macd_fast);
    let slow = ema(&close, params.macd_slow);
    let macd: Vec<f64> = fast.iter().zip(&slow).map(|(a, b)| a - b).collect();
    let mut signal = vec![f64::NAN; n];
    signal[macd_start..].copy_from_slice(&ema(&macd[macd_start..], params.macd_signal));
    let hist: Vec<f64> = macd.iter().zip(&signal).map(|(m, s)| m - s).collect();

    let rsi = wilder_rsi(&close, params.rsi);

    let mut bb_mid = vec![f64::NAN; n];
    let mut bb_upper = vec![f64::NAN; n];
    let mut bb_lower = vec![f64::NAN; n];
    let mut bb_width = vec![f64::NAN; n];
    let w = params.bollinger;
    for i in (w - 1)..n {
        let window = &close[i + 1 - w..=i];
        let mid = math::mean(window);
        let band = params.bollinger_k * math::population_std(window);
        bb_mid[i] = mid;
        bb_upper[i] = mid + band;
        bb_lower[i] = mid - band;
        bb_width[i] = (bb_upper[i] - bb_lower[i]) / mid;
    }

    let true_range: Vec<f64> = bars
        .iter()
        .enumerate()
        .map(|(i, b)| {
            let hl = b.high - b.low;
            if i == 0 {
                hl
            } else {
                let prev = bars[i - 1].close;
                hl.max((b.high - prev).abs()).max((b.low - prev).abs())
            }
        })
        .collect();
    let atr = wilder_average(&true_range, params.atr);

    let vol = rolling_returns(&returns, params.volatility, math::population_std);
    let regime_mean = rolling_returns(&returns, params.regime, math::mean);
    let regime = regime_mean
        .iter()
        .enumerate()
        .map(|(i, r)| (i >= params.regime).then(|| Regime::from_mean_return(*r)))
        .collect();

    let sma_fast = sma(&close, params.sma_fast);
    let sma_slow = sma(&close, params.sma_slow);

    let ema_slow_warmup = params.ema_slow - 1;
    let signal_warmup = params.signal_warmup();
    Ok(IndicatorFrame {
        dates: series.dates().collect(),
        ema50: Column::new(ema_fast, params.ema_fast - 1),
        ema200: Column::new(ema_slow, ema_slow_warmup),
        ema_ratio: Column::new(ema_ratio, (params.ema_fast - 1).max(ema_slow_warmup)),
        macd: Column::new(macd, macd_start),
        macd_signal: Column::new(signal, signal_warmup),
        macd_hist: Column::new(hist, signal_warmup),
        rsi14: Column::new(rsi, params.rsi),
        bb_upper: Column::new(bb_upper, w - 1),
        bb_mid: Column::new(bb_mid, w - 1),
        bb_lower: Column::new(bb_lower, w - 1),
        bb_width: Column::new(bb_width, w - 1),
        atr14: Column::new(atr, params.atr - 1),
        vol20: Column::new(vol, params.volatility),
        sma50: Column::new(sma_fast, params.sma_fast - 1),
        sma200: Column::new(sma_slow, params.sma_slow - 1),
        close,
        regime,
    })
}

/// Regime label per bar using a `window`-day mean of one-day returns.
pub fn detect_regime(
    series: &BarSeries,
    window: usize,
) -> Result<Vec<Option<Regime>>, IndicatorError> {
    if window == 0 {
        return Err(IndicatorError::InvalidPeriod("regime"));
    }
    if series.len() <= window {
        return Err(IndicatorError::SeriesTooShort {
            len: series.len(),
            required: window + 1,
        });
    }
    let returns = pct_changes(&series.closes());
    Ok(rolling_returns(&returns, window, math::mean)
        .into_iter()
        .enumerate()
        .map(|(i, r)| (i >= window).then(|| Regime::from_mean_return(r)))
        .collect())
}

/// One-day percentage changes; index 0 is NaN.
fn pct_changes(close: &[f64]) -> Vec<f64> {
    let mut out = vec![f64::NAN; close.len()];
    for i in 1..close.len() {
        out[i] = close[i] / close[i - 1] - 1.0;
    }
    out
}

/// Applies `stat` to each trailing window of `window` returns. Returns start
/// at index 1, so the first value lands on index `window`.
fn rolling_returns(returns: &[f64], window: usize, stat: fn(&[f64]) -> f64) -> Vec<f64> {
    let mut out = vec![f64::NAN; returns.len()];
    for i in window..returns.len() {
        out[i] = stat(&returns[i + 1 - window..=i]);
    }
    out
}

fn ema(values: &[f64], period: usize) -> Vec<f64> {
    let alpha = 2.0 / (period as f64 + 1.0);
    let mut out = Vec::with_capacity(values.len());
    let mut prev = values[0];
    for &x in values {
        prev += alpha * (x - prev);
        out.push(prev);
    }
    out
}

fn sma(values: &[f64], period: usize) -> Vec<f64> {
    let mut out = vec![f64::NAN; values.len()];
    for i in (period - 1)..values.len() {
        out[i] = math::mean(&values[i + 1 - period..=i]);
    }
    out
}

/// Wilder smoothing seeded with the simple mean of the first `period` values.
fn wilder_average(values: &[f64], period: usize) -> Vec<f64> {
    let mut out = vec![f64::NAN; values.len()];
    if values.len() < period {
        return out;
    }
    let p = period as f64;
    let mut avg = math::mean(&values[..period]);
    out[period - 1] = avg;
    for i in period..values.len() {
        avg = (avg * (p - 1.0) + values[i]) / p;
        out[i] = avg;
    }
    out
}

fn wilder_rsi(close: &[f64], period: usize) -> Vec<f64> {
    let mut gains = Vec::with_capacity(close.len().saturating_sub(1));
    let mut losses = Vec::with_capacity(close.len().saturating_sub(1));
    for w in close.windows(2) {
        let change = w[1] - w[0];
        gains.push(change.max(0.0));
        losses.push((-change).max(0.0));
    }
    let avg_gain = wilder_average(&gains, period);
    let avg_loss = wilder_average(&losses, period);
    let mut out = vec![f64::NAN; close.len()];
    for i in period..close.len() {
        out[i] = rsi_from_averages(avg_gain[i - 1], avg_loss[i - 1]);
    }
    out
}

/// A zero average loss gives 100 (including the flat case); otherwise a
/// zero average gain gives 0.
pub(crate) fn rsi_from_averages(avg_gain: f64, avg_loss: f64) -> f64 {
    if avg_loss == 0.0 {
        100.0
    } else if avg_gain == 0.0 {
        0.0
    } else {
        100.0 - 100.0 / (1.0 + avg_gain / avg_loss)
    }
}
