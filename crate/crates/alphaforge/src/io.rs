//! Reading and writing every file the system exchanges.
//!
//! Machine-read files (bars, articles, trade log, equity curve, model) print
//! floats with Rust's shortest round-trip representation so that a value
//! written and read back is bit-identical.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use alphaforge_core::backtest::{EquityPoint, TradeAction, TradeRecord};
use alphaforge_core::gbdt::MODEL_SCHEMA_VERSION;
use alphaforge_core::metrics::fixed2;
use alphaforge_core::{
    Bar, BarSeries, BenchmarkRow, DailySentiment, Ensemble, GbdtError, IndicatorFrame, MarketError,
    MetricsReport, NaiveDate, ScalerParams, ScoredArticle, SentimentError,
};
use chrono::DateTime;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const OHLCV_HEADER: [&str; 6] = ["date", "open", "high", "low", "close", "volume"];
pub const ARTICLE_HEADER: [&str; 5] = ["ticker", "published_at", "p_pos", "p_neu", "p_neg"];
pub const TRADE_HEADER: [&str; 6] = [
    "date",
    "symbol",
    "action",
    "size",
    "fill_price",
    "portfolio_value",
];
pub const EQUITY_HEADER: [&str; 4] = ["date", "cash", "positions_value", "total_value"];

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: file has no data rows")]
    EmptyFile { path: PathBuf },
    #[error("{path}: expected header `{expected}`, found `{found}`")]
    BadHeader {
        path: PathBuf,
        expected: String,
        found: String,
    },
    #[error("{path}:{line}: {reason}")]
    MalformedRow {
        path: PathBuf,
        line: u64,
        reason: String,
    },
    #[error("{path}:{line}: {source}")]
    InvariantViolation {
        path: PathBuf,
        line: u64,
        source: MarketError,
    },
    #[error("{path}: duplicate date {date}")]
    DuplicateDate { path: PathBuf, date: NaiveDate },
    #[error("{path}:{line}: {source}")]
    InvalidArticle {
        path: PathBuf,
        line: u64,
        source: SentimentError,
    },
    #[error("{path}: {source}")]
    Model { path: PathBuf, source: GbdtError },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        source: serde_json::Error,
    },
}

impl DataError {
    fn io(path: &Path, source: std::io::Error) -> Self {
        DataError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    fn malformed(path: &Path, line: u64, reason: impl Into<String>) -> Self {
        DataError::MalformedRow {
            path: path.to_path_buf(),
            line,
            reason: reason.into(),
        }
    }
}

fn reader(path: &Path, header: &[&str]) -> Result<csv::Reader<File>, DataError> {
    let file = File::open(path).map_err(|e| DataError::io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::None)
        .from_reader(file);
    let found = rdr
        .headers()
        .map_err(|e| DataError::malformed(path, 1, e.to_string()))?
        .clone();
    if found.iter().ne(header.iter().copied()) {
        if found.is_empty() {
            return Err(DataError::EmptyFile {
                path: path.to_path_buf(),
            });
        }
        return Err(DataError::BadHeader {
            path: path.to_path_buf(),
            expected: header.join(","),
            found: found.iter().collect::<Vec<_>>().join(","),
        });
    }
    Ok(rdr)
}

fn writer(path: &Path) -> Result<BufWriter<File>, DataError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| DataError::io(dir, e))?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| DataError::io(path, e))
}

/// Writes `rows` of pre-formatted fields under `header`.
fn write_rows<I, R>(path: &Path, header: &[&str], rows: I) -> Result<(), DataError>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut out = writer(path)?;
    let emit = || -> std::io::Result<()> {
        writeln!(out, "{}", header.join(","))?;
        for row in rows {
            let fields: Vec<String> = row.into_iter().collect();
            writeln!(out, "{}", fields.join(","))?;
        }
        out.flush()
    };
    emit().map_err(|e| DataError::io(path, e))
}

/// `YYYY-MM-DD` with zero padding and nothing else.
pub fn parse_date(s: &str) -> Option<NaiveDate> {
    let b = s.as_bytes();
    let shape_ok = b.len() == 10
        && b[4] == b'-'
        && b[7] == b'-'
        && b.iter()
            .enumerate()
            .all(|(i, c)| i == 4 || i == 7 || c.is_ascii_digit());
    if !shape_ok {
        return None;
    }
    NaiveDate::parse_from_str(s, "%Y-%m-%d").ok()
}

fn parse_field<T: std::str::FromStr>(
    path: &Path,
    line: u64,
    name: &str,
    raw: &str,
) -> Result<T, DataError> {
    raw.parse()
        .map_err(|_| DataError::malformed(path, line, format!("{name} `{raw}` is not a number")))
}

fn parse_price(path: &Path, line: u64, name: &str, raw: &str) -> Result<f64, DataError> {
    let v: f64 = parse_field(path, line, name, raw)?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(DataError::malformed(
            path,
            line,
            format!("{name} `{raw}` is not finite"),
        ))
    }
}

/// Loads one ticker's OHLCV CSV.
pub fn read_ohlcv(path: &Path, ticker: &str) -> Result<BarSeries, DataError> {
    let mut rdr = reader(path, &OHLCV_HEADER)?;
    let mut bars = Vec::new();
    let mut seen = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            DataError::malformed(path, line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        let date = parse_date(&rec[0]).ok_or_else(|| {
            DataError::malformed(path, line, format!("date `{}` is not YYYY-MM-DD", &rec[0]))
        })?;
        let open = parse_price(path, line, "open", &rec[1])?;
        let high = parse_price(path, line, "high", &rec[2])?;
        let low = parse_price(path, line, "low", &rec[3])?;
        let close = parse_price(path, line, "close", &rec[4])?;
        let volume: u64 = parse_field(path, line, "volume", &rec[5])?;
        let bar = Bar::new(date, open, high, low, close, volume).map_err(|source| {
            DataError::InvariantViolation {
                path: path.to_path_buf(),
                line,
                source,
            }
        })?;
        if seen.insert(date, line).is_some() {
            return Err(DataError::DuplicateDate {
                path: path.to_path_buf(),
                date,
            });
        }
        bars.push(bar);
    }
    if bars.is_empty() {
        return Err(DataError::EmptyFile {
            path: path.to_path_buf(),
        });
    }
    BarSeries::new(ticker, bars).map_err(|source| DataError::InvariantViolation {
        path: path.to_path_buf(),
        line: 0,
        source,
    })
}

pub fn write_ohlcv(path: &Path, series: &BarSeries) -> Result<(), DataError> {
    let rows = series.bars().iter().map(|b| {
        [
            b.date.to_string(),
            b.open.to_string(),
            b.high.to_string(),
            b.low.to_string(),
            b.close.to_string(),
            b.volume.to_string(),
        ]
    });
    write_rows(path, &OHLCV_HEADER, rows)
}

/// Per-ticker CSV files in `dir`, sorted by ticker. The ticker is the file stem.
pub fn list_ticker_files(dir: &Path) -> Result<Vec<(String, PathBuf)>, DataError> {
    let entries = fs::read_dir(dir).map_err(|e| DataError::io(dir, e))?;
    let mut files = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| DataError::io(dir, e))?.path();
        if path.extension().is_some_and(|e| e == "csv") && path.is_file() {
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                files.push((stem.to_string(), path));
            }
        }
    }
    files.sort();
    Ok(files)
}

/// Loads the scored-article CSV.
pub fn read_articles(path: &Path) -> Result<Vec<ScoredArticle>, DataError> {
    let mut rdr = reader(path, &ARTICLE_HEADER)?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            DataError::malformed(path, line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        let published_at = DateTime::parse_from_rfc3339(&rec[1]).map_err(|_| {
            DataError::malformed(
                path,
                line,
                format!("timestamp `{}` is not ISO-8601 with an offset", &rec[1]),
            )
        })?;
        let p_pos = parse_price(path, line, "p_pos", &rec[2])?;
        let p_neu = parse_price(path, line, "p_neu", &rec[3])?;
        let p_neg = parse_price(path, line, "p_neg", &rec[4])?;
        let article =
            ScoredArticle::new(&rec[0], published_at, p_pos, p_neu, p_neg).map_err(|source| {
                DataError::InvalidArticle {
                    path: path.to_path_buf(),
                    line,
                    source,
                }
            })?;
        out.push(article);
    }
    Ok(out)
}

pub fn write_articles(path: &Path, articles: &[ScoredArticle]) -> Result<(), DataError> {
    let rows = articles.iter().map(|a| {
        [
            a.ticker.clone(),
            a.published_at.to_rfc3339(),
            a.p_pos.to_string(),
            a.p_neu.to_string(),
            a.p_neg.to_string(),
        ]
    });
    write_rows(path, &ARTICLE_HEADER, rows)
}

pub fn write_daily_sentiment<'a>(
    path: &Path,
    days: impl IntoIterator<Item = &'a DailySentiment>,
) -> Result<(), DataError> {
    let rows = days.into_iter().map(|d| {
        [
            d.ticker.clone(),
            d.date.to_string(),
            d.score.map(|s| s.to_string()).unwrap_or_default(),
            d.n_articles.to_string(),
        ]
    });
    write_rows(path, &["ticker", "date", "score", "n_articles"], rows)
}

/// Indicator dump; undefined values are empty fields.
pub fn write_indicators(path: &Path, frame: &IndicatorFrame) -> Result<(), DataError> {
    let cols = frame.dump_columns();
    let mut header: Vec<&str> = vec!["date"];
    header.extend(cols.iter().map(|(name, _)| *name));
    header.push("regime");
    let rows = (0..frame.len()).map(|i| {
        let mut row = vec![frame.dates[i].to_string()];
        row.extend(
            cols.iter()
                .map(|(_, c)| c.at(i).map(|v| v.to_string()).unwrap_or_default()),
        );
        row.push(
            frame
                .regime(i)
                .map(|r| r.label().to_string())
                .unwrap_or_default(),
        );
        row
    });
    write_rows(path, &header, rows)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), DataError> {
    let mut out = writer(path)?;
    serde_json::to_writer_pretty(&mut out, value).map_err(|source| DataError::Json {
        path: path.to_path_buf(),
        source,
    })?;
    writeln!(out)
        .and_then(|_| out.flush())
        .map_err(|e| DataError::io(path, e))
}

fn read_json_value(path: &Path) -> Result<serde_json::Value, DataError> {
    let text = fs::read_to_string(path).map_err(|e| DataError::io(path, e))?;
    serde_json::from_str(&text).map_err(|source| DataError::Json {
        path: path.to_path_buf(),
        source,
    })
}

pub fn save_model(path: &Path, model: &Ensemble) -> Result<(), DataError> {
    write_json(path, model)
}

/// Loads and validates a model file. The schema version is checked before
/// anything else so that files from other versions get a precise error.
pub fn load_model(path: &Path) -> Result<Ensemble, DataError> {
    let model_err = |source| DataError::Model {
        path: path.to_path_buf(),
        source,
    };
    let value = read_json_value(path).map_err(|e| match e {
        DataError::Json { source, .. } => {
            model_err(GbdtError::CorruptModelFile(source.to_string()))
        }
        other => other,
    })?;
    let version = value.get("schema_version").and_then(|v| v.as_u64());
    match version {
        None => {
            return Err(model_err(GbdtError::CorruptModelFile(
                "missing schema_version".into(),
            )))
        }
        Some(v) if v != u64::from(MODEL_SCHEMA_VERSION) => {
            return Err(model_err(GbdtError::SchemaVersionMismatch {
                found: u32::try_from(v).unwrap_or(u32::MAX),
                expected: MODEL_SCHEMA_VERSION,
            }))
        }
        Some(_) => {}
    }
    let model: Ensemble = serde_json::from_value(value)
        .map_err(|e| model_err(GbdtError::CorruptModelFile(e.to_string())))?;
    model.validate().map_err(model_err)?;
    Ok(model)
}

/// Scaler document with exactly four keys.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalerFile {
    pub features: Vec<String>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub constant_flags: Vec<bool>,
}

impl From<&ScalerParams> for ScalerFile {
    fn from(s: &ScalerParams) -> Self {
        Self {
            features: s.features.clone(),
            mean: s.mean.to_vec(),
            std: s.std.to_vec(),
            constant_flags: s.constant_flags.to_vec(),
        }
    }
}

pub fn save_scaler(path: &Path, scaler: &ScalerParams) -> Result<(), DataError> {
    write_json(path, &ScalerFile::from(scaler))
}

pub fn write_trades(path: &Path, trades: &[TradeRecord]) -> Result<(), DataError> {
    write_rows(path, &TRADE_HEADER, trades.iter().map(trade_fields))
}

/// Trade-log fields in column order; also used to compare logs byte for byte.
pub fn trade_fields(t: &TradeRecord) -> [String; 6] {
    [
        t.date.to_string(),
        t.symbol.clone(),
        t.action.as_str().to_string(),
        t.size.to_string(),
        t.fill_price.to_string(),
        t.portfolio_value.to_string(),
    ]
}

pub fn read_trades(path: &Path) -> Result<Vec<TradeRecord>, DataError> {
    let mut rdr = reader(path, &TRADE_HEADER)?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| DataError::malformed(path, 0, e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line());
        let date = parse_date(&rec[0])
            .ok_or_else(|| DataError::malformed(path, line, format!("bad date `{}`", &rec[0])))?;
        let action = match &rec[2] {
            "BUY" => TradeAction::Buy,
            "SELL" => TradeAction::Sell,
            other => {
                return Err(DataError::malformed(
                    path,
                    line,
                    format!("unknown action `{other}`"),
                ))
            }
        };
        out.push(TradeRecord {
            date,
            symbol: rec[1].to_string(),
            action,
            size: parse_field(path, line, "size", &rec[3])?,
            fill_price: parse_price(path, line, "fill_price", &rec[4])?,
            portfolio_value: parse_price(path, line, "portfolio_value", &rec[5])?,
        });
    }
    Ok(out)
}

pub fn write_equity(path: &Path, equity: &[EquityPoint]) -> Result<(), DataError> {
    let rows = equity.iter().map(|p| {
        [
            p.date.to_string(),
            p.cash.to_string(),
            p.positions_value.to_string(),
            p.total_value.to_string(),
        ]
    });
    write_rows(path, &EQUITY_HEADER, rows)
}

pub fn read_equity(path: &Path) -> Result<Vec<EquityPoint>, DataError> {
    let mut rdr = reader(path, &EQUITY_HEADER)?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| DataError::malformed(path, 0, e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line());
        let date = parse_date(&rec[0])
            .ok_or_else(|| DataError::malformed(path, line, format!("bad date `{}`", &rec[0])))?;
        out.push(EquityPoint {
            date,
            cash: parse_price(path, line, "cash", &rec[1])?,
            positions_value: parse_price(path, line, "positions_value", &rec[2])?,
            total_value: parse_price(path, line, "total_value", &rec[3])?,
        });
    }
    if out.is_empty() {
        return Err(DataError::EmptyFile {
            path: path.to_path_buf(),
        });
    }
    Ok(out)
}

/// `portfolio_log.txt`: one `key: value` line per metric.
pub fn write_portfolio_log(path: &Path, report: &MetricsReport) -> Result<(), DataError> {
    let mut out = writer(path)?;
    let mut emit = || -> std::io::Result<()> {
        for (key, value) in report.log_lines() {
            writeln!(out, "{key}: {value}")?;
        }
        out.flush()
    };
    emit().map_err(|e| DataError::io(path, e))
}

pub fn write_report(path: &Path, report: &MetricsReport) -> Result<(), DataError> {
    write_json(path, report)
}

pub fn write_benchmarks(path: &Path, rows: &[BenchmarkRow]) -> Result<(), DataError> {
    let rows = rows.iter().map(|r| {
        [
            r.name.clone(),
            fixed2(r.final_value),
            fixed2(r.return_pct),
            fixed2(r.cagr_pct),
        ]
    });
    write_rows(
        path,
        &["name", "final_value", "return_pct", "cagr_pct"],
        rows,
    )
}

/// Strategy value per equity date next to each index rebased to the same
/// starting capital. An index without a close yet on a date is left empty;
/// after its first close the latest close carries forward.
pub fn write_plot_data(
    path: &Path,
    equity: &[EquityPoint],
    indices: &BTreeMap<String, BarSeries>,
    initial: f64,
) -> Result<(), DataError> {
    let mut header = vec!["date", "strategy_value"];
    header.extend(indices.keys().map(String::as_str));
    let start = equity.first().map(|p| p.date);
    let bases: Vec<Option<f64>> = indices
        .values()
        .map(|s| {
            let from = start?;
            s.bars().iter().find(|b| b.date >= from).map(|b| b.close)
        })
        .collect();
    let rows = equity.iter().map(|p| {
        let mut row = vec![p.date.to_string(), fixed2(p.total_value)];
        for (series, base) in indices.values().zip(&bases) {
            let hi = series.bars().partition_point(|b| b.date <= p.date);
            let cell = match (base, hi.checked_sub(1).map(|i| series.bars()[i])) {
                (Some(base), Some(bar)) if Some(bar.date) >= start => {
                    fixed2(initial * bar.close / base)
                }
                _ => String::new(),
            };
            row.push(cell);
        }
        row
    });
    write_rows(path, &header, rows)
}
