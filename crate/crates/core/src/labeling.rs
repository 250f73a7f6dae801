//! Trend-class labeling.
//!
//! A series is labeled from its first three hours only (the final hour tends
//! to sit in a stable regime): smooth with a centered moving average, take
//! first differences, and test the sign pattern against slope and net-change
//! tolerances. Flat series fall into the non-monotonic class, which keeps the
//! labeling antisymmetric under negation.

use crate::dataio::SeriesRecord;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Trend class of a series.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TrendClass {
    MonotonicPositive = 0,
    MonotonicNegative = 1,
    NonMonotonic = 2,
}

impl TrendClass {
    pub const ALL: [TrendClass; 3] = [
        TrendClass::MonotonicPositive,
        TrendClass::MonotonicNegative,
        TrendClass::NonMonotonic,
    ];

    pub fn from_u8(v: u8) -> Result<TrendClass> {
        match v {
            0 => Ok(TrendClass::MonotonicPositive),
            1 => Ok(TrendClass::MonotonicNegative),
            2 => Ok(TrendClass::NonMonotonic),
            _ => Err(Error::UnknownClass(v)),
        }
    }

    pub fn as_u8(self) -> u8 {
        self as u8
    }
}

/// Labeling tolerances, in the units of the series values.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct LabelConfig {
    /// Slope violations smaller than this (per minute) do not break monotonicity.
    pub eps_slope: f64,
    /// Minimum net change over the labeled window for a monotone class.
    pub eps_net: f64,
}

impl Default for LabelConfig {
    fn default() -> Self {
        LabelConfig {
            eps_slope: 0.01,
            eps_net: 0.2,
        }
    }
}

/// Samples considered by the labeler: the initial three hours.
pub const LABEL_WINDOW: usize = 180;
/// Moving-average width used before differencing.
pub const SMOOTH_WINDOW: usize = 5;

/// Centered moving average after repeating each edge value (window-1)/2
/// times. Output length equals input length.
pub fn smooth_ma(x: &[f64], window: usize) -> Result<Vec<f64>> {
    if window % 2 == 0 || window == 0 || window > x.len() {
        return Err(Error::BadWindow {
            window,
            len: x.len(),
        });
    }
    let half = window / 2;
    let mut padded = Vec::with_capacity(x.len() + 2 * half);
    padded.extend(std::iter::repeat(x[0]).take(half));
    padded.extend_from_slice(x);
    padded.extend(std::iter::repeat(x[x.len() - 1]).take(half));
    Ok(padded
        .windows(window)
        .map(|w| w.iter().sum::<f64>() / window as f64)
        .collect())
}

/// Label a raw sample vector using its first [`LABEL_WINDOW`] entries.
pub fn label_values(values: &[f64], cfg: &LabelConfig) -> Result<TrendClass> {
    if values.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let segment = &values[..values.len().min(LABEL_WINDOW)];
    let window = if segment.len() >= SMOOTH_WINDOW {
        SMOOTH_WINDOW
    } else if segment.len() % 2 == 1 {
        segment.len()
    } else {
        segment.len() - 1
    };
    let smoothed = smooth_ma(segment, window.max(1))?;
    let net = smoothed[smoothed.len() - 1] - smoothed[0];
    let mut min_d = f64::INFINITY;
    let mut max_d = f64::NEG_INFINITY;
    for w in smoothed.windows(2) {
        let d = w[1] - w[0];
        min_d = min_d.min(d);
        max_d = max_d.max(d);
    }
    if min_d >= -cfg.eps_slope && net > cfg.eps_net {
        Ok(TrendClass::MonotonicPositive)
    } else if max_d <= cfg.eps_slope && net < -cfg.eps_net {
        Ok(TrendClass::MonotonicNegative)
    } else {
        Ok(TrendClass::NonMonotonic)
    }
}

/// Label one series record.
pub fn label_series(series: &SeriesRecord, cfg: &LabelConfig) -> Result<TrendClass> {
    label_values(&series.values, cfg)
}

/// Return a copy of the records with labels filled in (existing labels are
/// recomputed).
pub fn label_all(records: &[SeriesRecord], cfg: &LabelConfig) -> Result<Vec<SeriesRecord>> {
    records
        .iter()
        .map(|r| {
            let mut r = r.clone();
            r.label = Some(label_values(&r.values, cfg)?);
            Ok(r)
        })
        .collect()
}
