//! Feature matrix, next-day direction labels and z-score scaling.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::indicators::IndicatorFrame;
use crate::market::{split_point, BarSeries, DateRange, Universe};
use crate::math;

pub const FEATURE_COUNT: usize = 10;

/// Model input order. Serialized models and scalers carry these names.
pub const FEATURE_NAMES: [&str; FEATURE_COUNT] = [
    "ema50",
    "ema200",
    "ema_ratio",
    "macd",
    "macd_signal",
    "macd_hist",
    "rsi14",
    "bb_width",
    "atr14",
    "vol20",
];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FeatureError {
    #[error("series has {len} bars, labels need at least 2")]
    SeriesTooShort { len: usize },
    #[error("scaler needs at least 2 rows, got {0}")]
    TooFewRows(usize),
    #[error("no indicator frame for ticker '{0}'")]
    MissingFrame(String),
    #[error("no labelable rows with fully defined features in range")]
    EmptyDataset,
    #[error("split of {dates} dates at fraction {fraction} leaves a side empty")]
    DegenerateSplit { dates: usize, fraction: f64 },
    #[error("scaler feature names do not match the pipeline order")]
    FeatureMismatch,
}

/// The ten model inputs for one ticker-day.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector(pub [f64; FEATURE_COUNT]);

impl FeatureVector {
    /// Reads the features at bar `i`, or `None` while any is still warming up.
    pub fn from_frame(frame: &IndicatorFrame, i: usize) -> Option<Self> {
        Some(Self([
            frame.ema50.at(i)?,
            frame.ema200.at(i)?,
            frame.ema_ratio.at(i)?,
            frame.macd.at(i)?,
            frame.macd_signal.at(i)?,
            frame.macd_hist.at(i)?,
            frame.rsi14.at(i)?,
            frame.bb_width.at(i)?,
            frame.atr14.at(i)?,
            frame.vol20.at(i)?,
        ]))
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

impl core::ops::Index<usize> for FeatureVector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Labels each bar except the last: 1 when the next close is strictly higher.
pub fn make_labels(series: &BarSeries) -> Result<Vec<(NaiveDate, u8)>, FeatureError> {
    if series.len() < 2 {
        return Err(FeatureError::SeriesTooShort { len: series.len() });
    }
    Ok(series
        .bars()
        .windows(2)
        .map(|w| (w[0].date, next_day_label(w[0].close, w[1].close)))
        .collect())
}

#[inline]
pub(crate) fn next_day_label(today: f64, tomorrow: f64) -> u8 {
    u8::from(tomorrow - today > 0.0)
}

/// Per-feature standardization statistics fitted on training rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalerParams {
    pub features: Vec<String>,
    pub mean: [f64; FEATURE_COUNT],
    pub std: [f64; FEATURE_COUNT],
    pub constant_flags: [bool; FEATURE_COUNT],
    pub n_rows: usize,
}

impl ScalerParams {
    /// Scaler that leaves vectors unchanged.
    pub fn identity() -> Self {
        Self {
            features: feature_names(),
            mean: [0.0; FEATURE_COUNT],
            std: [1.0; FEATURE_COUNT],
            constant_flags: [false; FEATURE_COUNT],
            n_rows: 0,
        }
    }

    pub fn transform(&self, x: &FeatureVector) -> FeatureVector {
        let mut out = [0.0; FEATURE_COUNT];
        for (i, o) in out.iter_mut().enumerate() {
            *o = (x.0[i] - self.mean[i]) / self.std[i];
        }
        FeatureVector(out)
    }

    /// Checks names, finiteness and strictly positive deviations.
    pub fn validate(&self) -> Result<(), FeatureError> {
        let names_ok = self.features.len() == FEATURE_COUNT
            && self.features.iter().zip(FEATURE_NAMES).all(|(a, b)| a == b);
        let stats_ok = self.mean.iter().all(|m| m.is_finite())
            && self.std.iter().all(|s| s.is_finite() && *s > 0.0);
        if names_ok && stats_ok {
            Ok(())
        } else {
            Err(FeatureError::FeatureMismatch)
        }
    }
}

pub(crate) fn feature_names() -> Vec<String> {
    FEATURE_NAMES.iter().map(|s| s.to_string()).collect()
}

/// Fits mean and population standard deviation per feature. A feature whose
/// deviation is zero (up to rounding) is flagged constant and gets std 1.
pub fn fit_scaler(rows: &[FeatureVector]) -> Result<ScalerParams, FeatureError> {
    if rows.len() < 2 {
        return Err(FeatureError::TooFewRows(rows.len()));
    }
    let n = rows.len() as f64;
    let mut mean = [0.0; FEATURE_COUNT];
    let mut std = [0.0; FEATURE_COUNT];
    let mut constant_flags = [false; FEATURE_COUNT];
    for j in 0..FEATURE_COUNT {
        let m = rows.iter().map(|r| r.0[j]).sum::<f64>() / n;
        let var = rows
            .iter()
            .map(|r| (r.0[j] - m) * (r.0[j] - m))
            .sum::<f64>()
            / n;
        let s = math::sqrt(var);
        mean[j] = m;
        if s <= 1e-12 * m.abs().max(1.0) {
            std[j] = 1.0;
            constant_flags[j] = true;
        } else {
            std[j] = s;
        }
    }
    Ok(ScalerParams {
        features: feature_names(),
        mean,
        std,
        constant_flags,
        n_rows: rows.len(),
    })
}

/// Applies a fitted scaler.
pub fn transform(scaler: &ScalerParams, x: &FeatureVector) -> FeatureVector {
    scaler.transform(x)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetRow {
    pub ticker: String,
    pub date: NaiveDate,
    pub features: FeatureVector,
    pub label: u8,
}

/// Pooled multi-ticker rows ordered by ticker, then date.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    pub rows: Vec<DatasetRow>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn features(&self) -> Vec<FeatureVector> {
        self.rows.iter().map(|r| r.features).collect()
    }

    pub fn labels(&self) -> Vec<u8> {
        self.rows.iter().map(|r| r.label).collect()
    }

    /// Splits on distinct dates: rows on the earliest `ceil(fraction * d)`
    /// dates train, later dates test. Row order is kept on both sides.
    pub fn chronological_split(&self, fraction: f64) -> Result<(Dataset, Dataset), FeatureError> {
        let mut dates: Vec<NaiveDate> = self.rows.iter().map(|r| r.date).collect();
        dates.sort_unstable();
        dates.dedup();
        let cut = split_point(dates.len(), fraction);
        if !(fraction > 0.0 && fraction < 1.0) || cut == 0 || cut >= dates.len() {
            return Err(FeatureError::DegenerateSplit {
                dates: dates.len(),
                fraction,
            });
        }
        let boundary = dates[cut];
        let (train, test): (Vec<_>, Vec<_>) =
            self.rows.iter().cloned().partition(|r| r.date < boundary);
        Ok((Dataset { rows: train }, Dataset { rows: test }))
    }
}

/// Rows for every ticker whose features are defined on a date in `range`
/// and whose next bar also falls inside `range`, so that no label reads a
/// price from outside the window.
pub fn build_dataset(
    universe: &Universe,
    frames: &BTreeMap<String, IndicatorFrame>,
    range: &DateRange,
) -> Result<Dataset, FeatureError> {
    let mut rows = Vec::new();
    for series in universe.iter() {
        let frame = frames
            .get(series.ticker())
            .ok_or_else(|| FeatureError::MissingFrame(series.ticker().to_string()))?;
        rows.extend(ticker_rows(series.ticker(), frame, range));
    }
    if rows.is_empty() {
        return Err(FeatureError::EmptyDataset);
    }
    Ok(Dataset { rows })
}

fn ticker_rows<'a>(
    ticker: &'a str,
    frame: &'a IndicatorFrame,
    range: &'a DateRange,
) -> impl Iterator<Item = DatasetRow> + 'a {
    (0..frame.len().saturating_sub(1)).filter_map(move |i| {
        if !range.contains(frame.dates[i]) || !range.contains(frame.dates[i + 1]) {
            return None;
        }
        let features = FeatureVector::from_frame(frame, i)?;
        features.is_finite().then(|| DatasetRow {
            ticker: ticker.to_string(),
            date: frame.dates[i],
            features,
            label: next_day_label(frame.close[i], frame.close[i + 1]),
        })
    })
}
