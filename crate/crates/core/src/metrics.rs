//! Performance metrics over the equity curve and trade log, plus the
//! buy-and-hold benchmark comparison.
//!
//! Sharpe uses daily simple returns, a zero risk-free rate, the sample
//! standard deviation and `sqrt(252)` annualization; a curve with zero
//! return variance has Sharpe 0. Holding periods are calendar days.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backtest::{EquityPoint, TradeAction, TradeRecord};
use crate::market::{BarSeries, DateRange};
use crate::math;

pub const TRADING_DAYS_PER_YEAR: f64 = 252.0;

/// Daily-return standard deviations at or below this are treated as zero.
pub const ZERO_VARIANCE_STD: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("SELL of {symbol} on {date} has no matching open position")]
    UnmatchedSell { symbol: String, date: NaiveDate },
    #[error("index '{0}' has no bars inside the comparison range")]
    MissingRangeData(String),
    #[error("equity curve is empty")]
    EmptyEquityCurve,
}

/// Percent change from `initial` to `final_value`.
pub fn total_return(initial: f64, final_value: f64) -> f64 {
    (final_value / initial - 1.0) * 100.0
}

/// Compound annual growth rate in percent.
pub fn cagr(initial: f64, final_value: f64, years: f64) -> f64 {
    (math::powf(final_value / initial, 1.0 / years) - 1.0) * 100.0
}

/// Deepest peak-to-trough decline in percent (0 or negative).
pub fn max_drawdown(values: &[f64]) -> f64 {
    let mut peak = f64::NEG_INFINITY;
    let mut worst = 0.0_f64;
    for &v in values {
        peak = peak.max(v);
        worst = worst.min((v / peak - 1.0) * 100.0);
    }
    worst
}

/// Annualized Sharpe ratio of daily simple returns.
pub fn sharpe(values: &[f64]) -> f64 {
    if values.len() < 3 {
        return 0.0;
    }
    let returns: Vec<f64> = values.windows(2).map(|w| w[1] / w[0] - 1.0).collect();
    let n = returns.len() as f64;
    let mean = returns.iter().sum::<f64>() / n;
    let var = returns.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / (n - 1.0);
    let sd = math::sqrt(var);
    // a spread this small is rounding noise in the returns themselves
    if sd <= ZERO_VARIANCE_STD {
        return 0.0;
    }
    mean / sd * math::sqrt(TRADING_DAYS_PER_YEAR)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TradeStats {
    pub win_ratio_pct: f64,
    pub avg_holding_days: f64,
    pub n_round_trips: usize,
}

/// Pairs each ticker's buys with the sell that closes them. Adds before the
/// sell merge into one round trip; a trip wins when sell proceeds exceed the
/// total buy cost. Positions still open at the end are ignored.
pub fn trade_stats(trades: &[TradeRecord]) -> Result<TradeStats, MetricsError> {
    struct Open {
        shares: u64,
        cost: f64,
        entry: NaiveDate,
    }
    let mut open: BTreeMap<&str, Open> = BTreeMap::new();
    let mut wins = 0usize;
    let mut trips = 0usize;
    let mut held_days = 0i64;
    for t in trades {
        match t.action {
            TradeAction::Buy => {
                let slot = open.entry(t.symbol.as_str()).or_insert(Open {
                    shares: 0,
                    cost: 0.0,
                    entry: t.date,
                });
                slot.shares += t.size;
                slot.cost += t.size as f64 * t.fill_price;
            }
            TradeAction::Sell => {
                let unmatched = || MetricsError::UnmatchedSell {
                    symbol: t.symbol.clone(),
                    date: t.date,
                };
                let slot = open.remove(t.symbol.as_str()).ok_or_else(unmatched)?;
                if slot.shares != t.size {
                    return Err(unmatched());
                }
                trips += 1;
                if t.size as f64 * t.fill_price > slot.cost {
                    wins += 1;
                }
                held_days += (t.date - slot.entry).num_days();
            }
        }
    }
    let (win_ratio_pct, avg_holding_days) = if trips == 0 {
        (0.0, 0.0)
    } else {
        (
            wins as f64 / trips as f64 * 100.0,
            held_days as f64 / trips as f64,
        )
    };
    Ok(TradeStats {
        win_ratio_pct,
        avg_holding_days,
        n_round_trips: trips,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub initial_cash: f64,
    pub final_value: f64,
    pub remaining_cash: f64,
    pub positions_value: f64,
    pub total_return_pct: f64,
    pub cagr_pct: f64,
    pub max_drawdown_pct: f64,
    pub sharpe: f64,
    pub win_ratio_pct: f64,
    pub avg_holding_days: f64,
    pub n_round_trips: usize,
}

impl MetricsReport {
    /// Report for a finished run; `years` is the backtest window length.
    pub fn compute(
        initial_cash: f64,
        equity: &[EquityPoint],
        trades: &[TradeRecord],
        years: f64,
    ) -> Result<Self, MetricsError> {
        let last = equity.last().ok_or(MetricsError::EmptyEquityCurve)?;
        let values: Vec<f64> = equity.iter().map(|p| p.total_value).collect();
        let stats = trade_stats(trades)?;
        Ok(Self {
            initial_cash,
            final_value: last.total_value,
            remaining_cash: last.cash,
            positions_value: last.positions_value,
            total_return_pct: total_return(initial_cash, last.total_value),
            cagr_pct: cagr(initial_cash, last.total_value, years),
            max_drawdown_pct: max_drawdown(&values),
            sharpe: sharpe(&values),
            win_ratio_pct: stats.win_ratio_pct,
            avg_holding_days: stats.avg_holding_days,
            n_round_trips: stats.n_round_trips,
        })
    }

    /// `key: value` lines in the portfolio log order.
    pub fn log_lines(&self) -> [(&'static str, String); 9] {
        [
            ("Final Portfolio Value", fixed2(self.final_value)),
            ("Market Value of Positions", fixed2(self.positions_value)),
            ("Cash Balance", fixed2(self.remaining_cash)),
            ("Total Return (%)", fixed2(self.total_return_pct)),
            ("CAGR (%)", fixed2(self.cagr_pct)),
            ("Max Drawdown (%)", fixed2(self.max_drawdown_pct)),
            ("Sharpe Ratio", fixed2(self.sharpe)),
            ("Win Ratio (%)", fixed2(self.win_ratio_pct)),
            ("Avg Holding Period (days)", fixed2(self.avg_holding_days)),
        ]
    }
}

/// Two decimals, with values that round to zero printed without a sign.
pub fn fixed2(v: f64) -> String {
    let s = alloc::format!("{v:.2}");
    if s == "-0.00" {
        "0.00".into()
    } else {
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRow {
    pub name: String,
    pub final_value: f64,
    pub return_pct: f64,
    pub cagr_pct: f64,
}

impl BenchmarkRow {
    pub fn from_final(name: impl Into<String>, initial: f64, final_value: f64, years: f64) -> Self {
        Self {
            name: name.into(),
            final_value,
            return_pct: total_return(initial, final_value),
            cagr_pct: cagr(initial, final_value, years),
        }
    }
}

/// First and last close inside `range`.
pub fn range_closes(series: &BarSeries, range: &DateRange) -> Option<(f64, f64)> {
    let inside = series.restrict(range)?;
    let bars = inside.bars();
    Some((bars[0].close, bars[bars.len() - 1].close))
}

/// Buy-and-hold of each index from the first to the last close in `range`,
/// scaled to `initial`. Rows are sorted by return, best first.
pub fn benchmark_compare(
    indices: &BTreeMap<String, BarSeries>,
    initial: f64,
    range: &DateRange,
) -> Result<Vec<BenchmarkRow>, MetricsError> {
    let years = range.years();
    let mut rows = Vec::with_capacity(indices.len());
    for (name, series) in indices {
        let (start, end) = range_closes(series, range)
            .ok_or_else(|| MetricsError::MissingRangeData(name.clone()))?;
        rows.push(BenchmarkRow::from_final(
            name.clone(),
            initial,
            initial * end / start,
            years,
        ));
    }
    rows.sort_by(|a, b| {
        b.return_pct
            .total_cmp(&a.return_pct)
            .then_with(|| a.name.cmp(&b.name))
    });
    Ok(rows)
}
