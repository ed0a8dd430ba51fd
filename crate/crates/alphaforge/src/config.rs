//! Run configuration file.
//!
//! Relative paths are resolved against the directory holding the config file.

use std::path::{Path, PathBuf};

use alphaforge_core::{DateRange, Hyperparams, StrategyConfig};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("config {path}: {source}")]
    Parse {
        path: PathBuf,
        source: serde_json::Error,
    },
    #[error("config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Paths {
    /// Directory of `<TICKER>.csv` files.
    pub data_dir: PathBuf,
    /// Scored-article CSV; optional, no file means no news.
    #[serde(default)]
    pub sentiment_file: Option<PathBuf>,
    pub model_file: PathBuf,
    pub output_dir: PathBuf,
    /// Directory of index CSVs for the benchmark table.
    #[serde(default)]
    pub index_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Execution {
    pub initial_cash: f64,
    /// Flat fee per filled order.
    pub commission: f64,
    pub slippage_bps: f64,
}

impl Default for Execution {
    fn default() -> Self {
        Self {
            initial_cash: 100_000.0,
            commission: 0.0,
            slippage_bps: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub paths: Paths,
    pub train_range: DateRange,
    pub backtest_range: DateRange,
    /// Ticker subset; empty means every file in `data_dir`.
    #[serde(default)]
    pub tickers: Vec<String>,
    #[serde(default)]
    pub strategy: StrategyConfig,
    #[serde(default)]
    pub execution: Execution,
    #[serde(default)]
    pub model: Hyperparams,
    /// Share of training dates used to fit; the rest report held-out accuracy.
    #[serde(default = "default_train_fraction")]
    pub train_fraction: f64,
    #[serde(default)]
    pub seed: u64,
    /// Also write per-ticker indicator dumps during a backtest.
    #[serde(default)]
    pub dump_indicators: bool,
}

fn default_train_fraction() -> f64 {
    0.7
}

impl RunConfig {
    /// Reads, resolves relative paths and checks the ranges.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg: RunConfig =
            serde_json::from_str(&text).map_err(|source| ConfigError::Parse {
                path: path.to_path_buf(),
                source,
            })?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve(base);
        cfg.validate()?;
        Ok(cfg)
    }

    fn resolve(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.paths.data_dir);
        fix(&mut self.paths.model_file);
        fix(&mut self.paths.output_dir);
        if let Some(p) = self.paths.sentiment_file.as_mut() {
            fix(p);
        }
        if let Some(p) = self.paths.index_dir.as_mut() {
            fix(p);
        }
    }

    /// Range and parameter checks. Input paths must exist; outputs are created.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |m: String| Err(ConfigError::Invalid(m));
        for (name, r) in [
            ("train_range", &self.train_range),
            ("backtest_range", &self.backtest_range),
        ] {
            if r.start >= r.end {
                return invalid(format!("{name} is empty ({} to {})", r.start, r.end));
            }
        }
        if self.train_range.end > self.backtest_range.start {
            return invalid(format!(
                "train_range ends {} after backtest_range starts {}; the backtest must be out of sample",
                self.train_range.end, self.backtest_range.start
            ));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return invalid(format!(
                "train_fraction {} must lie in (0, 1)",
                self.train_fraction
            ));
        }
        if !(self.execution.initial_cash > 0.0)
            || !(self.execution.commission >= 0.0)
            || !(self.execution.slippage_bps >= 0.0)
        {
            return invalid("execution values must be positive cash and non-negative costs".into());
        }
        self.model
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if !self.paths.data_dir.is_dir() {
            return invalid(format!(
                "data_dir {} is not a directory",
                self.paths.data_dir.display()
            ));
        }
        if let Some(f) = self.paths.sentiment_file.as_ref().filter(|f| !f.is_file()) {
            return invalid(format!("sentiment_file {} does not exist", f.display()));
        }
        if let Some(d) = self.paths.index_dir.as_ref().filter(|d| !d.is_dir()) {
            return invalid(format!("index_dir {} is not a directory", d.display()));
        }
        Ok(())
    }
}
