//! Hybrid decision rule, the SMA/RSI baseline and volatility-based sizing.
//!
//! The hybrid rule, evaluated once per ticker after the close:
//!
//! 1. scale the raw feature vector with the model's scaler;
//! 2. predict the next-day direction `y`;
//! 3. score = `y`, +1 if price > EMA50 and MACD > signal, +1 if RSI14 < 30;
//! 4. without a position, buy when the regime is bullish, price > EMA200,
//!    score >= 2 and the sentiment gate is not breached;
//! 5. with a position, sell everything when `y` = 0, the regime is bearish,
//!    RSI14 > 70 or the daily sentiment is below the gate.
//!
//! Buys are sized as `min(floor(0.01 cash / ATR), floor(0.1 cash / price))`.

use alloc::string::String;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::FeatureVector;
use crate::gbdt::Ensemble;
use crate::indicators::Regime;
use crate::math;
use crate::sentiment::DEFAULT_GATE;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StrategyError {
    #[error("ATR {0} is not positive")]
    ZeroAtr(f64),
    #[error("price {0} is not positive")]
    InvalidPrice(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StrategyMode {
    #[default]
    Hybrid,
    Baseline,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Thresholds {
    pub score_min: u8,
    pub rsi_entry: f64,
    pub rsi_exit: f64,
    pub sentiment_gate: f64,
    pub risk_frac: f64,
    pub notional_cap_frac: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            score_min: 2,
            rsi_entry: 30.0,
            rsi_exit: 70.0,
            sentiment_gate: DEFAULT_GATE,
            risk_frac: 0.01,
            notional_cap_frac: 0.1,
        }
    }
}

/// Strategy config file contents.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct StrategyConfig {
    pub mode: StrategyMode,
    pub thresholds: Thresholds,
}

/// What a strategy wants to do with one ticker.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TradeAction {
    Buy(u64),
    SellAll,
    Hold,
}

/// Everything known about one ticker at the close of `date`.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionInputs {
    pub ticker: String,
    pub date: NaiveDate,
    pub price: f64,
    pub features: FeatureVector,
    pub ema50: f64,
    pub ema200: f64,
    pub macd: f64,
    pub macd_signal: f64,
    pub rsi14: f64,
    pub atr: f64,
    pub regime: Regime,
    /// Daily sentiment score; `None` on days without news.
    pub sentiment: Option<f64>,
    pub cash: f64,
    pub has_open_position: bool,
    pub sma50: Option<f64>,
    pub sma200: Option<f64>,
}

impl DecisionInputs {
    fn sentiment_breached(&self, gate: f64) -> bool {
        matches!(self.sentiment, Some(s) if s < gate)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HybridScore {
    pub ml_component: u8,
    pub trend_bonus: u8,
    pub meanrev_bonus: u8,
    pub total: u8,
}

pub fn hybrid_score(
    prediction: u8,
    price: f64,
    ema50: f64,
    macd: f64,
    signal: f64,
    rsi14: f64,
    rsi_entry: f64,
) -> HybridScore {
    let ml_component = u8::from(prediction == 1);
    let trend_bonus = u8::from(price > ema50 && macd > signal);
    let meanrev_bonus = u8::from(rsi14 < rsi_entry);
    HybridScore {
        ml_component,
        trend_bonus,
        meanrev_bonus,
        total: ml_component + trend_bonus + meanrev_bonus,
    }
}

/// Shares to buy: the smaller of the ATR risk budget and the notional cap,
/// both floored. The result always satisfies `shares * atr <= risk_frac * cash`
/// and `shares * price <= notional_cap_frac * cash` in floating point.
pub fn size_position(
    cash: f64,
    atr: f64,
    price: f64,
    thresholds: &Thresholds,
) -> Result<u64, StrategyError> {
    if !(atr > 0.0) || !atr.is_finite() {
        return Err(StrategyError::ZeroAtr(atr));
    }
    if !(price > 0.0) || !price.is_finite() {
        return Err(StrategyError::InvalidPrice(price));
    }
    if !(cash > 0.0) {
        return Ok(0);
    }
    let by_risk = whole_units(thresholds.risk_frac * cash, atr);
    let by_notional = whole_units(thresholds.notional_cap_frac * cash, price);
    Ok(by_risk.min(by_notional))
}

/// `floor(budget / unit)`, stepped down if rounding put it over budget.
fn whole_units(budget: f64, unit: f64) -> u64 {
    let mut k = math::floor(budget / unit).max(0.0) as u64;
    while k > 0 && k as f64 * unit > budget {
        k -= 1;
    }
    k
}

/// Hybrid rule. Sizing failures (non-positive ATR) turn an entry into `Hold`.
pub fn decide(inputs: &DecisionInputs, model: &Ensemble, thresholds: &Thresholds) -> TradeAction {
    let scaled = model.scale(&inputs.features);
    let prediction = model.predict(&scaled);
    let gate = inputs.sentiment_breached(thresholds.sentiment_gate);

    if inputs.has_open_position {
        let exit = prediction == 0
            || !inputs.regime.is_bullish()
            || inputs.rsi14 > thresholds.rsi_exit
            || gate;
        return if exit {
            TradeAction::SellAll
        } else {
            TradeAction::Hold
        };
    }

    let score = hybrid_score(
        prediction,
        inputs.price,
        inputs.ema50,
        inputs.macd,
        inputs.macd_signal,
        inputs.rsi14,
        thresholds.rsi_entry,
    );
    let enter = inputs.regime.is_bullish()
        && inputs.price > inputs.ema200
        && score.total >= thresholds.score_min
        && !gate;
    if enter {
        buy_sized(inputs, thresholds)
    } else {
        TradeAction::Hold
    }
}

/// SMA-50/200 crossover with an RSI(14) mean-reversion trigger; no model,
/// sentiment or regime.
pub fn decide_baseline(inputs: &DecisionInputs, thresholds: &Thresholds) -> TradeAction {
    let (Some(fast), Some(slow)) = (inputs.sma50, inputs.sma200) else {
        return TradeAction::Hold;
    };
    if inputs.has_open_position {
        if fast < slow || inputs.rsi14 > thresholds.rsi_exit {
            TradeAction::SellAll
        } else {
            TradeAction::Hold
        }
    } else if fast > slow && inputs.rsi14 < thresholds.rsi_entry {
        buy_sized(inputs, thresholds)
    } else {
        TradeAction::Hold
    }
}

fn buy_sized(inputs: &DecisionInputs, thresholds: &Thresholds) -> TradeAction {
    match size_position(inputs.cash, inputs.atr, inputs.price, thresholds) {
        Ok(0) => TradeAction::Hold,
        Ok(shares) => TradeAction::Buy(shares),
        Err(e) => {
            log::warn!("{} {}: entry skipped: {}", inputs.ticker, inputs.date, e);
            TradeAction::Hold
        }
    }
}

/// A per-ticker decision rule the backtester can drive.
pub trait Strategy {
    fn decide(&self, inputs: &DecisionInputs) -> TradeAction;

    fn mode(&self) -> StrategyMode;
}

#[derive(Debug, Clone)]
pub struct HybridStrategy {
    pub model: Ensemble,
    pub thresholds: Thresholds,
}

impl Strategy for HybridStrategy {
    fn decide(&self, inputs: &DecisionInputs) -> TradeAction {
        decide(inputs, &self.model, &self.thresholds)
    }

    fn mode(&self) -> StrategyMode {
        StrategyMode::Hybrid
    }
}

#[derive(Debug, Clone, Default)]
pub struct BaselineStrategy {
    pub thresholds: Thresholds,
}

impl Strategy for BaselineStrategy {
    fn decide(&self, inputs: &DecisionInputs) -> TradeAction {
        decide_baseline(inputs, &self.thresholds)
    }

    fn mode(&self) -> StrategyMode {
        StrategyMode::Baseline
    }
}
