//! Shared fixtures, the recording strategy wrapper and the audit that every
//! backtest in this suite passes through.

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::sync::Mutex;

use alphaforge::fixture::{self, FixtureSpec};
use alphaforge_core::backtest::TradeAction as Side;
use alphaforge_core::strategy::StrategyMode;
use alphaforge_core::{
    build_dataset, compute_indicators, run_backtest, train, BacktestConfig, BacktestResult,
    DateRange, DecisionInputs, Ensemble, Hyperparams, IndicatorFrame, IndicatorParams, NaiveDate,
    ScoredArticle, SentimentBook, Strategy, TradeAction, Universe,
};

pub struct Market {
    pub universe: Universe,
    pub frames: BTreeMap<String, IndicatorFrame>,
    pub articles: Vec<ScoredArticle>,
    pub book: SentimentBook,
}

impl Market {
    pub fn from_spec(spec: &FixtureSpec) -> Self {
        let data = fixture::generate(spec).expect("fixture");
        Self::new(Universe::new(data.series).expect("universe"), data.articles)
    }

    pub fn new(universe: Universe, articles: Vec<ScoredArticle>) -> Self {
        let frames = frames_for(&universe);
        let book = SentimentBook::build(&articles, universe.calendar()).expect("sentiment");
        Self {
            universe,
            frames,
            articles,
            book,
        }
    }

    /// Same bars, different articles.
    pub fn with_articles(&self, articles: Vec<ScoredArticle>) -> Self {
        let book = SentimentBook::build(&articles, self.universe.calendar()).expect("sentiment");
        Self {
            universe: self.universe.clone(),
            frames: self.frames.clone(),
            articles,
            book,
        }
    }

    pub fn calendar(&self) -> &[NaiveDate] {
        self.universe.calendar()
    }

    /// Fits on the earliest 70% of the labelable dates in `range`.
    pub fn train(&self, range: &DateRange) -> Ensemble {
        let dataset = build_dataset(&self.universe, &self.frames, range).expect("dataset");
        let (fit, _) = dataset.chronological_split(0.7).expect("split");
        train(&fit, &Hyperparams::default(), 0).expect("train")
    }

    pub fn run(&self, strategy: &dyn Strategy, config: &BacktestConfig) -> BacktestResult {
        let result = run_backtest(&self.universe, &self.frames, &self.book, strategy, config)
            .expect("backtest");
        audit(self, config, &result);
        result
    }
}

pub fn frames_for(universe: &Universe) -> BTreeMap<String, IndicatorFrame> {
    universe
        .iter()
        .map(|s| {
            let frame = compute_indicators(s, &IndicatorParams::default()).expect("indicators");
            (s.ticker().to_string(), frame)
        })
        .collect()
}

pub fn range(start: NaiveDate, end: NaiveDate) -> DateRange {
    DateRange::new(start, end).expect("range")
}

pub fn config(range: DateRange) -> BacktestConfig {
    BacktestConfig {
        range,
        ..BacktestConfig::default()
    }
}

/// Every decision a strategy made, in call order.
pub struct Recorder<'a> {
    pub inner: &'a dyn Strategy,
    pub log: RefCell<Vec<Decision>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    pub ticker: String,
    pub date: NaiveDate,
    pub held: bool,
    pub action: TradeAction,
}

impl<'a> Recorder<'a> {
    pub fn new(inner: &'a dyn Strategy) -> Self {
        Self {
            inner,
            log: RefCell::new(Vec::new()),
        }
    }

    pub fn decisions(&self) -> Vec<Decision> {
        self.log.borrow().clone()
    }
}

impl Strategy for Recorder<'_> {
    fn decide(&self, inputs: &DecisionInputs) -> TradeAction {
        let action = self.inner.decide(inputs);
        self.log.borrow_mut().push(Decision {
            ticker: inputs.ticker.clone(),
            date: inputs.date,
            held: inputs.has_open_position,
            action,
        });
        action
    }

    fn mode(&self) -> StrategyMode {
        self.inner.mode()
    }
}

#[derive(Default)]
pub struct AuditLog {
    pub runs: usize,
    pub days: usize,
    pub buys: usize,
    pub accounting: Vec<String>,
    pub caps: Vec<String>,
}

pub static AUDIT: Mutex<AuditLog> = Mutex::new(AuditLog {
    runs: 0,
    days: 0,
    buys: 0,
    accounting: Vec::new(),
    caps: Vec::new(),
});

/// Replays the trade log against the bars and records any broken
/// accounting identity or sizing cap.
fn audit(market: &Market, config: &BacktestConfig, result: &BacktestResult) {
    let mut bad = Vec::new();
    let mut cash = config.initial_cash;
    let mut shares: BTreeMap<&str, i64> = BTreeMap::new();
    let mut by_date: BTreeMap<NaiveDate, Vec<_>> = BTreeMap::new();
    for t in &result.trades {
        by_date.entry(t.date).or_default().push(t);
    }
    let mut bought: BTreeMap<&str, u64> = BTreeMap::new();
    let mut sold: BTreeMap<&str, u64> = BTreeMap::new();
    for p in &result.equity {
        for t in by_date.get(&p.date).into_iter().flatten() {
            let notional = t.size as f64 * t.fill_price;
            let held = shares.entry(t.symbol.as_str()).or_insert(0);
            match t.action {
                Side::Buy => {
                    cash -= notional + config.commission;
                    *held += t.size as i64;
                    *bought.entry(t.symbol.as_str()).or_insert(0) += t.size;
                }
                Side::Sell => {
                    if *held != t.size as i64 {
                        bad.push(format!(
                            "{} {}: sold {} of {}",
                            p.date, t.symbol, t.size, held
                        ));
                    }
                    cash += notional - config.commission;
                    *held -= t.size as i64;
                    *sold.entry(t.symbol.as_str()).or_insert(0) += t.size;
                }
            }
            if *held < 0 {
                bad.push(format!("{} {}: {} shares", p.date, t.symbol, held));
            }
        }
        let marked: f64 = shares
            .iter()
            .map(|(t, &n)| n as f64 * last_close(market, t, p.date))
            .sum();
        if p.cash < 0.0 {
            bad.push(format!("{}: cash {}", p.date, p.cash));
        }
        if (p.cash - cash).abs() > 1e-6 {
            bad.push(format!(
                "{}: cash {} but the log replays to {}",
                p.date, p.cash, cash
            ));
        }
        if (p.cash + p.positions_value - p.total_value).abs() > 1e-6
            || (cash + marked - p.total_value).abs() > 1e-6
        {
            bad.push(format!(
                "{}: cash {} + positions {} != total {}",
                p.date, p.cash, marked, p.total_value
            ));
        }
    }
    for (t, n) in &shares {
        let expected = bought.get(t).copied().unwrap_or(0) - sold.get(t).copied().unwrap_or(0);
        if *n as u64 != result.final_state.shares(t) || *n as u64 != expected {
            bad.push(format!(
                "{t}: ends with {} shares, log says {n}",
                result.final_state.shares(t)
            ));
        }
    }

    let mut caps = Vec::new();
    for b in &result.buys {
        if !(b.shares as f64 * b.price <= 0.1 * b.cash)
            || !(b.shares as f64 * b.atr <= 0.01 * b.cash)
        {
            caps.push(format!(
                "{} {}: {} shares at {} (ATR {}) with cash {}",
                b.date, b.ticker, b.shares, b.price, b.atr, b.cash
            ));
        }
    }

    let mut log = AUDIT.lock().unwrap_or_else(|e| e.into_inner());
    log.runs += 1;
    log.days += result.equity.len();
    log.buys += result.buys.len();
    log.accounting.extend(bad);
    log.caps.extend(caps);
}

fn last_close(market: &Market, ticker: &str, date: NaiveDate) -> f64 {
    let bars = market.universe.get(ticker).expect("ticker").bars();
    let k = bars.partition_point(|b| b.date <= date);
    bars[k - 1].close
}

/// `|a - b| <= tol * max(|b|, floor)`.
pub fn near(a: f64, b: f64, tol: f64, floor: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(floor)
}

pub fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}
