//! The five CLI commands as library functions.
//!
//! Each command prints its human-readable summary to the supplied writer and
//! returns a structured result. Problems with inputs (config, data files,
//! model file, missing artifacts) are [`CommandError::Invalid`]; failures
//! while producing outputs are [`CommandError::Runtime`].

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use alphaforge_core::{
    benchmark_compare, build_dataset, compute_indicators, run_backtest, train, BacktestConfig,
    BacktestResult, BarSeries, BaselineStrategy, BenchmarkRow, Dataset, Ensemble, HybridStrategy,
    IndicatorError, IndicatorFrame, IndicatorParams, MetricsReport, SentimentBook, Strategy,
    StrategyMode, Universe,
};
use thiserror::Error;

use crate::config::{ConfigError, RunConfig};
use alphaforge_core::metrics::fixed2;

use crate::io::{self, DataError};

pub const TRADES_FILE: &str = "trades.csv";
pub const EQUITY_FILE: &str = "equity.csv";
pub const PORTFOLIO_LOG_FILE: &str = "portfolio_log.txt";
pub const REPORT_FILE: &str = "report.json";
pub const BENCHMARK_FILE: &str = "benchmark.csv";
pub const PLOT_FILE: &str = "plot_data.csv";
pub const SCALER_FILE: &str = "scaler.json";
pub const SENTIMENT_DUMP_FILE: &str = "daily_sentiment.csv";
pub const COMPARE_FILE: &str = "compare.csv";

#[derive(Debug, Error)]
pub enum CommandError {
    #[error("{0}")]
    Invalid(String),
    #[error("{0}")]
    Runtime(String),
}

impl CommandError {
    /// 2 for validation and config problems, 3 for runtime failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CommandError::Invalid(_) => 2,
            CommandError::Runtime(_) => 3,
        }
    }
}

impl From<ConfigError> for CommandError {
    fn from(e: ConfigError) -> Self {
        CommandError::Invalid(e.to_string())
    }
}

fn invalid(e: impl std::fmt::Display) -> CommandError {
    CommandError::Invalid(e.to_string())
}

fn runtime(e: impl std::fmt::Display) -> CommandError {
    CommandError::Runtime(e.to_string())
}

fn say(out: &mut dyn Write, line: impl std::fmt::Display) -> Result<(), CommandError> {
    writeln!(out, "{line}").map_err(runtime)
}

/// Command-line values that take precedence over the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub mode: Option<StrategyMode>,
    pub output_dir: Option<PathBuf>,
    pub tickers: Option<Vec<String>>,
    pub seed: Option<u64>,
}

impl Overrides {
    pub fn apply(self, cfg: &mut RunConfig) {
        if let Some(m) = self.mode {
            cfg.strategy.mode = m;
        }
        if let Some(o) = self.output_dir {
            cfg.paths.output_dir = o;
        }
        if let Some(t) = self.tickers {
            cfg.tickers = t;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
    }
}

/// Outcome of loading one data file.
#[derive(Debug)]
pub struct IngestEntry {
    pub ticker: String,
    pub path: PathBuf,
    pub result: Result<BarSeries, DataError>,
}

/// Loads every selected ticker file, keeping per-file outcomes.
pub fn scan_data_dir(cfg: &RunConfig) -> Result<Vec<IngestEntry>, CommandError> {
    let files = io::list_ticker_files(&cfg.paths.data_dir).map_err(invalid)?;
    if let Some(missing) = cfg
        .tickers
        .iter()
        .find(|t| !files.iter().any(|(name, _)| name == *t))
    {
        return Err(invalid(format!(
            "ticker {missing} has no file in {}",
            cfg.paths.data_dir.display()
        )));
    }
    Ok(files
        .into_iter()
        .filter(|(t, _)| cfg.tickers.is_empty() || cfg.tickers.contains(t))
        .map(|(ticker, path)| {
            let result = io::read_ohlcv(&path, &ticker);
            IngestEntry {
                ticker,
                path,
                result,
            }
        })
        .collect())
}

/// The validated universe; any unreadable file is an error.
pub fn load_universe(cfg: &RunConfig) -> Result<Universe, CommandError> {
    let mut series = Vec::new();
    for entry in scan_data_dir(cfg)? {
        series.push(entry.result.map_err(invalid)?);
    }
    Universe::new(series).map_err(invalid)
}

/// Indicator frames on each ticker's full history. Tickers too short for
/// the longest warm-up are dropped with a warning.
pub fn prepare(
    universe: &Universe,
) -> Result<(Universe, BTreeMap<String, IndicatorFrame>), CommandError> {
    let params = IndicatorParams::default();
    let mut frames = BTreeMap::new();
    for s in universe.iter() {
        match compute_indicators(s, &params) {
            Ok(f) => {
                frames.insert(s.ticker().to_string(), f);
            }
            Err(IndicatorError::SeriesTooShort { len, required }) => {
                log::warn!(
                    "{}: {len} bars, {required} needed for indicators; dropped",
                    s.ticker()
                );
            }
            Err(e) => return Err(invalid(e)),
        }
    }
    let kept: Vec<&str> = frames.keys().map(String::as_str).collect();
    let universe = universe.select(&kept).map_err(|_| {
        invalid(format!(
            "no ticker has the {} bars needed for indicators",
            params.required_len()
        ))
    })?;
    Ok((universe, frames))
}

pub fn load_sentiment(cfg: &RunConfig, universe: &Universe) -> Result<SentimentBook, CommandError> {
    match &cfg.paths.sentiment_file {
        None => Ok(SentimentBook::empty()),
        Some(path) => {
            let articles = io::read_articles(path).map_err(invalid)?;
            SentimentBook::build(&articles, universe.calendar()).map_err(invalid)
        }
    }
}

/// Prints per-ticker bar counts and diagnostics; fails if any file is bad.
pub fn cmd_ingest(cfg: &RunConfig, out: &mut dyn Write) -> Result<Vec<IngestEntry>, CommandError> {
    let entries = scan_data_dir(cfg)?;
    say(
        out,
        format!(
            "{:<10} {:>6} {:>6} {:>6}  first       last",
            "ticker", "bars", "train", "test"
        ),
    )?;
    let mut failed = 0;
    for e in &entries {
        match &e.result {
            Ok(s) => {
                let count = |r| {
                    s.bars()
                        .iter()
                        .filter(|b| alphaforge_core::DateRange::contains(r, b.date))
                        .count()
                };
                say(
                    out,
                    format!(
                        "{:<10} {:>6} {:>6} {:>6}  {}  {}",
                        e.ticker,
                        s.len(),
                        count(&cfg.train_range),
                        count(&cfg.backtest_range),
                        s.first_date(),
                        s.last_date()
                    ),
                )?;
            }
            Err(err) => {
                failed += 1;
                say(out, format!("{:<10} INVALID {err}", e.ticker))?;
            }
        }
    }
    say(
        out,
        format!("{} tickers, {} invalid", entries.len(), failed),
    )?;
    if entries.is_empty() {
        return Err(invalid(format!(
            "no CSV files in {}",
            cfg.paths.data_dir.display()
        )));
    }
    if failed > 0 {
        return Err(invalid(format!(
            "{failed} of {} files failed validation",
            entries.len()
        )));
    }
    Ok(entries)
}

#[derive(Debug, Clone)]
pub struct TrainSummary {
    pub model: Ensemble,
    pub n_fit: usize,
    pub n_held_out: usize,
    pub fit_accuracy: f64,
    pub held_out_accuracy: f64,
}

pub fn accuracy(model: &Ensemble, data: &Dataset) -> f64 {
    if data.is_empty() {
        return 0.0;
    }
    let hits = data
        .rows
        .iter()
        .filter(|r| model.predict(&model.scale(&r.features)) == r.label)
        .count();
    hits as f64 / data.len() as f64
}

/// Fits on the earliest `train_fraction` of training dates and reports
/// accuracy on both parts. The fitted model is what gets written.
pub fn train_on(
    cfg: &RunConfig,
    universe: &Universe,
    frames: &BTreeMap<String, IndicatorFrame>,
) -> Result<TrainSummary, CommandError> {
    let dataset = build_dataset(universe, frames, &cfg.train_range).map_err(invalid)?;
    let (fit, held) = dataset
        .chronological_split(cfg.train_fraction)
        .map_err(invalid)?;
    let model = train(&fit, &cfg.model, cfg.seed).map_err(invalid)?;
    Ok(TrainSummary {
        fit_accuracy: accuracy(&model, &fit),
        held_out_accuracy: accuracy(&model, &held),
        n_fit: fit.len(),
        n_held_out: held.len(),
        model,
    })
}

pub fn cmd_train(cfg: &RunConfig, out: &mut dyn Write) -> Result<TrainSummary, CommandError> {
    let (universe, frames) = prepare(&load_universe(cfg)?)?;
    let summary = train_on(cfg, &universe, &frames)?;
    io::save_model(&cfg.paths.model_file, &summary.model).map_err(runtime)?;
    io::save_scaler(
        &cfg.paths.output_dir.join(SCALER_FILE),
        &summary.model.scaler,
    )
    .map_err(runtime)?;
    say(
        out,
        format!(
            "rows: {} fit, {} held out",
            summary.n_fit, summary.n_held_out
        ),
    )?;
    say(out, format!("train accuracy: {:.4}", summary.fit_accuracy))?;
    say(
        out,
        format!("held-out accuracy: {:.4}", summary.held_out_accuracy),
    )?;
    say(
        out,
        format!("model written to {}", cfg.paths.model_file.display()),
    )?;
    Ok(summary)
}

fn strategy_for(cfg: &RunConfig, mode: StrategyMode) -> Result<Box<dyn Strategy>, CommandError> {
    let thresholds = cfg.strategy.thresholds.clone();
    Ok(match mode {
        StrategyMode::Hybrid => {
            let model = io::load_model(&cfg.paths.model_file).map_err(invalid)?;
            Box::new(HybridStrategy { model, thresholds })
        }
        StrategyMode::Baseline => Box::new(BaselineStrategy { thresholds }),
    })
}

pub fn backtest_config(cfg: &RunConfig) -> BacktestConfig {
    BacktestConfig {
        initial_cash: cfg.execution.initial_cash,
        range: cfg.backtest_range,
        commission: cfg.execution.commission,
        slippage_bps: cfg.execution.slippage_bps,
    }
}

/// Runs one backtest in memory and computes its metrics.
pub fn simulate(
    cfg: &RunConfig,
    universe: &Universe,
    frames: &BTreeMap<String, IndicatorFrame>,
    book: &SentimentBook,
    strategy: &dyn Strategy,
) -> Result<(BacktestResult, MetricsReport), CommandError> {
    let result =
        run_backtest(universe, frames, book, strategy, &backtest_config(cfg)).map_err(invalid)?;
    if result.equity.is_empty() {
        return Err(invalid(format!(
            "no trading days between {} and {}",
            cfg.backtest_range.start, cfg.backtest_range.end
        )));
    }
    let report = MetricsReport::compute(
        cfg.execution.initial_cash,
        &result.equity,
        &result.trades,
        cfg.backtest_range.years(),
    )
    .map_err(runtime)?;
    Ok((result, report))
}

pub fn cmd_backtest(cfg: &RunConfig, out: &mut dyn Write) -> Result<MetricsReport, CommandError> {
    let (universe, frames) = prepare(&load_universe(cfg)?)?;
    let book = load_sentiment(cfg, &universe)?;
    let strategy = strategy_for(cfg, cfg.strategy.mode)?;
    let (result, report) = simulate(cfg, &universe, &frames, &book, strategy.as_ref())?;

    let dir = &cfg.paths.output_dir;
    io::write_trades(&dir.join(TRADES_FILE), &result.trades).map_err(runtime)?;
    io::write_equity(&dir.join(EQUITY_FILE), &result.equity).map_err(runtime)?;
    io::write_portfolio_log(&dir.join(PORTFOLIO_LOG_FILE), &report).map_err(runtime)?;
    if cfg.paths.sentiment_file.is_some() {
        io::write_daily_sentiment(&dir.join(SENTIMENT_DUMP_FILE), book.iter()).map_err(runtime)?;
    }
    if cfg.dump_indicators {
        for (ticker, frame) in &frames {
            io::write_indicators(&dir.join("indicators").join(format!("{ticker}.csv")), frame)
                .map_err(runtime)?;
        }
    }
    for (date, e) in &result.rejected {
        say(out, format!("rejected on {date}: {e}"))?;
    }
    say(
        out,
        format!(
            "mode: {:?}, {} fills",
            cfg.strategy.mode,
            result.trades.len()
        ),
    )?;
    for (key, value) in report.log_lines() {
        say(out, format!("{key}: {value}"))?;
    }
    Ok(report)
}

fn load_indices(cfg: &RunConfig) -> Result<BTreeMap<String, BarSeries>, CommandError> {
    let Some(dir) = &cfg.paths.index_dir else {
        return Ok(BTreeMap::new());
    };
    let mut out = BTreeMap::new();
    for (name, path) in io::list_ticker_files(dir).map_err(invalid)? {
        let s = io::read_ohlcv(&path, &name).map_err(invalid)?;
        out.insert(name, s);
    }
    Ok(out)
}

fn artifact(dir: &Path, name: &str) -> Result<PathBuf, CommandError> {
    let path = dir.join(name);
    if path.is_file() {
        Ok(path)
    } else {
        Err(invalid(format!(
            "missing backtest artifact {}",
            path.display()
        )))
    }
}

/// Report JSON, benchmark table and plot data from saved backtest artifacts.
pub fn cmd_report(
    cfg: &RunConfig,
    out: &mut dyn Write,
) -> Result<(MetricsReport, Vec<BenchmarkRow>), CommandError> {
    let dir = &cfg.paths.output_dir;
    let equity = io::read_equity(&artifact(dir, EQUITY_FILE)?).map_err(invalid)?;
    let trades = io::read_trades(&artifact(dir, TRADES_FILE)?).map_err(invalid)?;
    let initial = cfg.execution.initial_cash;
    let report = MetricsReport::compute(initial, &equity, &trades, cfg.backtest_range.years())
        .map_err(invalid)?;
    let indices = load_indices(cfg)?;
    let benchmarks = benchmark_compare(&indices, initial, &cfg.backtest_range).map_err(invalid)?;

    io::write_report(&dir.join(REPORT_FILE), &report).map_err(runtime)?;
    io::write_plot_data(&dir.join(PLOT_FILE), &equity, &indices, initial).map_err(runtime)?;
    if !indices.is_empty() {
        io::write_benchmarks(&dir.join(BENCHMARK_FILE), &benchmarks).map_err(runtime)?;
    }
    for (key, value) in report.log_lines() {
        say(out, format!("{key}: {value}"))?;
    }
    say(out, format!("Round trips: {}", report.n_round_trips))?;
    for b in &benchmarks {
        say(
            out,
            format!(
                "{:<10} {:>14.2} {:>8.2}% {:>8.2}%",
                b.name, b.final_value, b.return_pct, b.cagr_pct
            ),
        )?;
    }
    Ok((report, benchmarks))
}

/// Hybrid and baseline side by side, plus any benchmark indices.
pub fn cmd_compare(
    cfg: &RunConfig,
    out: &mut dyn Write,
) -> Result<Vec<(String, MetricsReport)>, CommandError> {
    let (universe, frames) = prepare(&load_universe(cfg)?)?;
    let book = load_sentiment(cfg, &universe)?;
    let mut rows = Vec::new();
    for mode in [StrategyMode::Hybrid, StrategyMode::Baseline] {
        let strategy = strategy_for(cfg, mode)?;
        let (_, report) = simulate(cfg, &universe, &frames, &book, strategy.as_ref())?;
        rows.push((format!("{mode:?}").to_lowercase(), report));
    }
    let benchmarks = benchmark_compare(
        &load_indices(cfg)?,
        cfg.execution.initial_cash,
        &cfg.backtest_range,
    )
    .map_err(invalid)?;

    let header = "strategy,final_value,positions_value,cash,total_return_pct,cagr_pct,max_drawdown_pct,sharpe,win_ratio_pct,avg_holding_days";
    let mut lines = vec![header.to_string()];
    for (name, r) in &rows {
        let cells = [
            r.final_value,
            r.positions_value,
            r.remaining_cash,
            r.total_return_pct,
            r.cagr_pct,
            r.max_drawdown_pct,
            r.sharpe,
            r.win_ratio_pct,
            r.avg_holding_days,
        ]
        .map(fixed2);
        lines.push(format!("{name},{}", cells.join(",")));
    }
    for b in &benchmarks {
        lines.push(format!(
            "{},{},,,{},{},,,,",
            b.name,
            fixed2(b.final_value),
            fixed2(b.return_pct),
            fixed2(b.cagr_pct)
        ));
    }
    let path = cfg.paths.output_dir.join(COMPARE_FILE);
    std::fs::create_dir_all(&cfg.paths.output_dir).map_err(runtime)?;
    std::fs::write(&path, lines.join("\n") + "\n").map_err(runtime)?;
    for line in &lines {
        say(out, line)?;
    }
    Ok(rows)
}
