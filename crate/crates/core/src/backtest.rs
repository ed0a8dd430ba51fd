//! Daily event-driven backtester.
//!
//! Each calendar day runs three phases in order:
//!
//! 1. orders queued on earlier days fill at today's open for every ticker
//!    that has a bar today (queue order, which is alphabetical per day);
//! 2. after the close, every ticker with a bar today and fully warmed-up
//!    indicators is asked for a decision, in alphabetical order;
//! 3. the portfolio is marked at the latest close of every holding.
//!
//! Decisions on day `t` read only bars, indicators and sentiment up to `t`.
//! An order for a ticker without a bar on `t + 1` waits for its next bar;
//! orders still queued when the range ends are dropped. Buy sizing sees the
//! free cash minus the notional already reserved by queued buys, valued at
//! their decision-day close.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::FeatureVector;
use crate::indicators::IndicatorFrame;
use crate::market::{DateRange, Universe};
use crate::sentiment::SentimentBook;
use crate::strategy::{DecisionInputs, Strategy, TradeAction as Decision};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BacktestError {
    #[error("buy of {shares} {ticker} costs {cost:.2} but only {cash:.2} cash is free")]
    OverdraftRejected {
        ticker: String,
        shares: u64,
        cost: f64,
        cash: f64,
    },
    #[error("sell of {shares} {ticker} does not match the open position ({held})")]
    NoMatchingPosition {
        ticker: String,
        shares: u64,
        held: u64,
    },
    #[error("fill price {0} is not positive")]
    InvalidFillPrice(f64),
    #[error("no indicator frame for ticker '{0}'")]
    MissingFrame(String),
    #[error("invalid backtest config: {0}")]
    InvalidConfig(&'static str),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BacktestConfig {
    pub initial_cash: f64,
    pub range: DateRange,
    /// Flat fee per filled order, in currency units.
    pub commission: f64,
    /// Adverse fill adjustment in basis points of the open price.
    pub slippage_bps: f64,
}

impl Default for BacktestConfig {
    fn default() -> Self {
        Self {
            initial_cash: 100_000.0,
            range: DateRange::unbounded(),
            commission: 0.0,
            slippage_bps: 0.0,
        }
    }
}

impl BacktestConfig {
    fn validate(&self) -> Result<(), BacktestError> {
        if !(self.initial_cash > 0.0) || !self.initial_cash.is_finite() {
            return Err(BacktestError::InvalidConfig(
                "initial_cash must be positive",
            ));
        }
        if !(self.commission >= 0.0) || !(self.slippage_bps >= 0.0) {
            return Err(BacktestError::InvalidConfig(
                "commission and slippage must be non-negative",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TradeAction {
    #[serde(rename = "BUY")]
    Buy,
    #[serde(rename = "SELL")]
    Sell,
}

impl TradeAction {
    pub fn as_str(self) -> &'static str {
        match self {
            TradeAction::Buy => "BUY",
            TradeAction::Sell => "SELL",
        }
    }
}

/// One fill in the trade log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TradeRecord {
    pub date: NaiveDate,
    pub symbol: String,
    pub action: TradeAction,
    pub size: u64,
    pub fill_price: f64,
    pub portfolio_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Position {
    pub shares: u64,
    pub avg_cost: f64,
    pub entry_date: NaiveDate,
}

/// A market order waiting for the next open.
#[derive(Debug, Clone, PartialEq)]
pub struct Order {
    pub ticker: String,
    pub side: TradeAction,
    pub shares: u64,
    pub decided_on: NaiveDate,
    pub decision_price: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PortfolioState {
    pub cash: f64,
    pub positions: BTreeMap<String, Position>,
    /// Realized profit net of every commission paid.
    pub realized_pnl: f64,
    pub commissions: f64,
    pub trades: Vec<TradeRecord>,
}

impl PortfolioState {
    pub fn new(cash: f64) -> Self {
        Self {
            cash,
            ..Self::default()
        }
    }

    pub fn shares(&self, ticker: &str) -> u64 {
        self.positions.get(ticker).map_or(0, |p| p.shares)
    }

    /// Market value of positions; holdings without a mark are valued at cost.
    pub fn positions_value(&self, marks: &BTreeMap<String, f64>) -> f64 {
        self.positions.iter().fold(0.0, |acc, (t, p)| {
            acc + p.shares as f64 * marks.get(t).copied().unwrap_or(p.avg_cost)
        })
    }

    pub fn total_value(&self, marks: &BTreeMap<String, f64>) -> f64 {
        self.cash + self.positions_value(marks)
    }

    pub fn unrealized_pnl(&self, marks: &BTreeMap<String, f64>) -> f64 {
        self.positions
            .iter()
            .map(|(t, p)| {
                let mark = marks.get(t).copied().unwrap_or(p.avg_cost);
                p.shares as f64 * (mark - p.avg_cost)
            })
            .sum()
    }

    /// Fills `order` at `fill_price`, appends the trade record and returns it.
    /// `marks` values every other holding for the record's portfolio value.
    pub fn execute_order(
        &mut self,
        order: &Order,
        fill_price: f64,
        date: NaiveDate,
        commission: f64,
        marks: &BTreeMap<String, f64>,
    ) -> Result<&TradeRecord, BacktestError> {
        if !(fill_price > 0.0) || !fill_price.is_finite() {
            return Err(BacktestError::InvalidFillPrice(fill_price));
        }
        let ticker = &order.ticker;
        match order.side {
            TradeAction::Buy => {
                let cost = order.shares as f64 * fill_price + commission;
                if cost > self.cash {
                    return Err(BacktestError::OverdraftRejected {
                        ticker: ticker.clone(),
                        shares: order.shares,
                        cost,
                        cash: self.cash,
                    });
                }
                self.cash -= cost;
                let pos = self.positions.entry(ticker.clone()).or_insert(Position {
                    shares: 0,
                    avg_cost: 0.0,
                    entry_date: date,
                });
                let total = pos.shares + order.shares;
                pos.avg_cost = (pos.shares as f64 * pos.avg_cost
                    + order.shares as f64 * fill_price)
                    / total as f64;
                pos.shares = total;
            }
            TradeAction::Sell => {
                let held = self.shares(ticker);
                if held == 0 || held != order.shares {
                    return Err(BacktestError::NoMatchingPosition {
                        ticker: ticker.clone(),
                        shares: order.shares,
                        held,
                    });
                }
                if let Some(pos) = self.positions.remove(ticker) {
                    self.cash += order.shares as f64 * fill_price - commission;
                    self.realized_pnl += order.shares as f64 * (fill_price - pos.avg_cost);
                }
            }
        }
        self.realized_pnl -= commission;
        self.commissions += commission;
        let value = self.cash
            + self
                .positions
                .iter()
                .map(|(t, p)| {
                    let mark = if t == ticker {
                        fill_price
                    } else {
                        marks.get(t).copied().unwrap_or(p.avg_cost)
                    };
                    p.shares as f64 * mark
                })
                .sum::<f64>();
        self.trades.push(TradeRecord {
            date,
            symbol: ticker.clone(),
            action: order.side,
            size: order.shares,
            fill_price,
            portfolio_value: value,
        });
        Ok(&self.trades[self.trades.len() - 1])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquityPoint {
    pub date: NaiveDate,
    pub cash: f64,
    pub positions_value: f64,
    pub total_value: f64,
}

/// Inputs behind one emitted buy, kept so sizing caps can be audited.
#[derive(Debug, Clone, PartialEq)]
pub struct BuyAudit {
    pub date: NaiveDate,
    pub ticker: String,
    pub shares: u64,
    pub price: f64,
    pub atr: f64,
    pub cash: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BacktestResult {
    pub trades: Vec<TradeRecord>,
    pub equity: Vec<EquityPoint>,
    pub final_state: PortfolioState,
    /// Latest close per ticker at the end of the run.
    pub final_marks: BTreeMap<String, f64>,
    pub buys: Vec<BuyAudit>,
    /// Orders that could not be filled, with the reason.
    pub rejected: Vec<(NaiveDate, BacktestError)>,
}

/// Runs `strategy` over the calendar days of `universe` inside `config.range`.
///
/// `frames` must hold indicators computed on each ticker's full history so
/// that warm-up can finish before the range starts.
pub fn run_backtest(
    universe: &Universe,
    frames: &BTreeMap<String, IndicatorFrame>,
    sentiment: &SentimentBook,
    strategy: &dyn Strategy,
    config: &BacktestConfig,
) -> Result<BacktestResult, BacktestError> {
    config.validate()?;
    for ticker in universe.tickers() {
        if !frames.contains_key(ticker) {
            return Err(BacktestError::MissingFrame(ticker.into()));
        }
    }

    let mut state = PortfolioState::new(config.initial_cash);
    let mut marks: BTreeMap<String, f64> = BTreeMap::new();
    let mut pending: Vec<Order> = Vec::new();
    let mut equity = Vec::new();
    let mut buys = Vec::new();
    let mut rejected = Vec::new();
    let mut warming: BTreeMap<&str, bool> = universe.tickers().map(|t| (t, false)).collect();

    for &date in universe
        .calendar()
        .iter()
        .filter(|d| config.range.contains(**d))
    {
        // phase 1: fills at the open
        let queued = core::mem::take(&mut pending);
        for order in queued {
            let Some(bar) = universe
                .get(&order.ticker)
                .and_then(|s| s.index_of(date).map(|i| s.bars()[i]))
            else {
                pending.push(order);
                continue;
            };
            let slip = config.slippage_bps / 10_000.0;
            let price = match order.side {
                TradeAction::Buy => bar.open * (1.0 + slip),
                TradeAction::Sell => bar.open * (1.0 - slip),
            };
            if let Err(e) = state.execute_order(&order, price, date, config.commission, &marks) {
                log::warn!("{date}: order rejected: {e}");
                rejected.push((date, e));
            }
        }

        // phase 2: decisions after the close
        for series in universe.iter() {
            let ticker = series.ticker();
            if let Some(i) = series.index_of(date) {
                marks.insert(ticker.into(), series.bars()[i].close);
            }
        }
        let mut reserved: f64 = pending
            .iter()
            .filter(|o| o.side == TradeAction::Buy)
            .map(|o| o.shares as f64 * o.decision_price)
            .sum();
        for series in universe.iter() {
            let ticker = series.ticker();
            if series.index_of(date).is_none() || pending.iter().any(|o| o.ticker == ticker) {
                continue;
            }
            let frame = &frames[ticker];
            let Some(i) = frame.index_of(date) else {
                continue;
            };
            let cash = (state.cash - reserved).max(0.0);
            let held = state.shares(ticker);
            let Some(inputs) = decision_inputs(frame, i, ticker, sentiment, cash, held > 0) else {
                if let Some(flag) = warming.get_mut(ticker) {
                    if !*flag {
                        log::info!(
                            "{ticker}: insufficient history on {date}, skipping until warmed up"
                        );
                        *flag = true;
                    }
                }
                continue;
            };
            match strategy.decide(&inputs) {
                Decision::Hold => {}
                Decision::Buy(shares) if held == 0 => {
                    buys.push(BuyAudit {
                        date,
                        ticker: ticker.into(),
                        shares,
                        price: inputs.price,
                        atr: inputs.atr,
                        cash,
                    });
                    reserved += shares as f64 * inputs.price;
                    pending.push(Order {
                        ticker: ticker.into(),
                        side: TradeAction::Buy,
                        shares,
                        decided_on: date,
                        decision_price: inputs.price,
                    });
                }
                Decision::SellAll if held > 0 => pending.push(Order {
                    ticker: ticker.into(),
                    side: TradeAction::Sell,
                    shares: held,
                    decided_on: date,
                    decision_price: inputs.price,
                }),
                other => log::warn!("{ticker} {date}: ignoring {other:?} for position of {held}"),
            }
        }

        // phase 3: mark to market
        let positions_value = state.positions_value(&marks);
        equity.push(EquityPoint {
            date,
            cash: state.cash,
            positions_value,
            total_value: state.cash + positions_value,
        });
    }
    for order in &pending {
        log::info!(
            "{}: {} order for {} decided {} left unfilled at range end",
            order.ticker,
            order.side.as_str(),
            order.shares,
            order.decided_on
        );
    }

    Ok(BacktestResult {
        trades: state.trades.clone(),
        equity,
        final_state: state,
        final_marks: marks,
        buys,
        rejected,
    })
}

/// Decision inputs at bar `i`, or `None` while anything is still undefined.
fn decision_inputs(
    frame: &IndicatorFrame,
    i: usize,
    ticker: &str,
    sentiment: &SentimentBook,
    cash: f64,
    has_open_position: bool,
) -> Option<DecisionInputs> {
    let date = frame.dates[i];
    Some(DecisionInputs {
        ticker: ticker.into(),
        date,
        price: frame.close[i],
        features: FeatureVector::from_frame(frame, i)?,
        ema50: frame.ema50.at(i)?,
        ema200: frame.ema200.at(i)?,
        macd: frame.macd.at(i)?,
        macd_signal: frame.macd_signal.at(i)?,
        rsi14: frame.rsi14.at(i)?,
        atr: frame.atr14.at(i)?,
        regime: frame.regime(i)?,
        sentiment: sentiment.get(ticker, date).and_then(|s| s.score),
        cash,
        has_open_position,
        sma50: frame.sma50.at(i),
        sma200: frame.sma200.at(i),
    })
}
