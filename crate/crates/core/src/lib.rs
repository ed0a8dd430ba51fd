//! Core of the alphaforge trading system.
//!
//! Everything in this crate is a pure function of in-memory inputs: technical
//! indicators and regime labels, the pooled feature/label pipeline, a
//! second-order gradient-boosted tree classifier, daily sentiment aggregation
//! and gating, the hybrid and baseline decision rules, the daily event-driven
//! backtester and the performance metrics computed from its logs.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, fixtures and
//! the command line live in the `alphaforge` companion crate.

#![no_std]
#![forbid(unsafe_code)]
// `!(x > 0.0)` is used on purpose so that NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod backtest;
pub mod features;
pub mod gbdt;
pub mod indicators;
pub mod market;
pub mod metrics;
pub mod sentiment;
pub mod strategy;

mod math;

pub use chrono::NaiveDate;

pub use backtest::{
    run_backtest, BacktestConfig, BacktestError, BacktestResult, BuyAudit, EquityPoint, Order,
    PortfolioState, Position, TradeAction as TradeSide, TradeRecord,
};
pub use features::{
    build_dataset, fit_scaler, make_labels, transform, Dataset, DatasetRow, FeatureError,
    FeatureVector, ScalerParams, FEATURE_COUNT, FEATURE_NAMES,
};
pub use gbdt::{train, Ensemble, GbdtError, Hyperparams, TrainingReport, TreeNode};
pub use indicators::{
    compute_indicators, detect_regime, Column, IndicatorError, IndicatorFrame, IndicatorParams,
    Regime,
};
pub use market::{train_test_split, Bar, BarSeries, DateRange, MarketError, Universe};
pub use metrics::{
    benchmark_compare, cagr, max_drawdown, sharpe, total_return, trade_stats, BenchmarkRow,
    MetricsError, MetricsReport, TradeStats,
};
pub use sentiment::{
    aggregate_daily, gate_blocks_entry, market_cutoff, DailySentiment, ScoredArticle,
    SentimentBook, SentimentError,
};
pub use strategy::{
    decide, decide_baseline, hybrid_score, size_position, BaselineStrategy, DecisionInputs,
    HybridScore, HybridStrategy, Strategy, StrategyConfig, StrategyError, StrategyMode, Thresholds,
    TradeAction,
};
