use chrono::{Datelike, NaiveDateTime, Timelike};
use serde::{Deserialize, Serialize};

use super::record::MarketRecord;
use crate::error::{Error, Result};

pub const HOURS: usize = 24;
pub const WEEKDAYS: usize = 7;
pub const MONTHS: usize = 12;

pub const TEMPERATURE_FEATURE: usize = HOURS + WEEKDAYS + MONTHS;
pub const LOAD_FEATURE: usize = TEMPERATURE_FEATURE + 1;
pub const PRICE_FEATURE: usize = TEMPERATURE_FEATURE + 2;
/// Width of an encoded hour: three one-hot calendar groups plus scaled
/// temperature, load and price.
pub const FEATURE_DIM: usize = PRICE_FEATURE + 1;

/// Indices of the hot entries: hour of day (0-23), weekday (0 = Monday),
/// month (0 = January).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CalendarIndex {
    pub hour: usize,
    pub weekday: usize,
    pub month: usize,
}

pub fn calendar_index(ts: NaiveDateTime) -> CalendarIndex {
    CalendarIndex {
        hour: ts.hour() as usize,
        weekday: ts.weekday().num_days_from_monday() as usize,
        month: ts.month0() as usize,
    }
}

/// The three one-hot groups concatenated, `[24 | 7 | 12]`.
pub fn encode_calendar(ts: NaiveDateTime) -> [f64; HOURS + WEEKDAYS + MONTHS] {
    let idx = calendar_index(ts);
    let mut out = [0.0; HOURS + WEEKDAYS + MONTHS];
    out[idx.hour] = 1.0;
    out[HOURS + idx.weekday] = 1.0;
    out[HOURS + WEEKDAYS + idx.month] = 1.0;
    out
}

/// Maps `x` to `(x - min) / (max - min)`. A scaler must be fitted before
/// use; a degenerate range (`max == min`) maps everything to 0.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct MinMaxScaler {
    range: Option<(f64, f64)>,
}

impl MinMaxScaler {
    pub fn unfitted() -> Self {
        MinMaxScaler::default()
    }

    pub fn fitted(values: &[f64]) -> Result<Self> {
        let mut s = MinMaxScaler::unfitted();
        s.fit(values)?;
        Ok(s)
    }

    pub fn fit(&mut self, values: &[f64]) -> Result<()> {
        if values.is_empty() {
            return Err(Error::Sizing("cannot fit a scaler on an empty set".into()));
        }
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &v in values {
            if !v.is_finite() {
                return Err(Error::config("cannot fit a scaler on non-finite values"));
            }
            lo = lo.min(v);
            hi = hi.max(v);
        }
        self.range = Some((lo, hi));
        Ok(())
    }

    pub fn is_fitted(&self) -> bool {
        self.range.is_some()
    }

    pub fn min(&self) -> Option<f64> {
        self.range.map(|r| r.0)
    }

    pub fn max(&self) -> Option<f64> {
        self.range.map(|r| r.1)
    }

    pub fn is_degenerate(&self) -> bool {
        matches!(self.range, Some((lo, hi)) if hi == lo)
    }

    fn bounds(&self) -> Result<(f64, f64)> {
        self.range
            .ok_or_else(|| Error::State("scaler used before being fitted".into()))
    }

    pub fn transform(&self, x: f64) -> Result<f64> {
        let (lo, hi) = self.bounds()?;
        if hi == lo {
            return Ok(0.0);
        }
        Ok((x - lo) / (hi - lo))
    }

    pub fn inverse(&self, scaled: f64) -> Result<f64> {
        let (lo, hi) = self.bounds()?;
        Ok(lo + scaled * (hi - lo))
    }

    /// Multiplier converting a difference in scaled units back to raw units.
    pub fn span(&self) -> Result<f64> {
        let (lo, hi) = self.bounds()?;
        Ok(hi - lo)
    }
}

/// Scalers for the three continuous inputs, fitted on training records.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureScalers {
    pub temperature: MinMaxScaler,
    pub load: MinMaxScaler,
    pub price: MinMaxScaler,
    /// Number of records the scalers were fitted on.
    pub fitted_on: usize,
}

impl FeatureScalers {
    pub fn fit(records: &[MarketRecord]) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::Sizing(
                "scalers need at least one training record".into(),
            ));
        }
        let col = |f: fn(&MarketRecord) -> f64| records.iter().map(f).collect::<Vec<_>>();
        let scalers = FeatureScalers {
            temperature: MinMaxScaler::fitted(&col(|r| r.temperature))?,
            load: MinMaxScaler::fitted(&col(|r| r.load))?,
            price: MinMaxScaler::fitted(&col(|r| r.price))?,
            fitted_on: records.len(),
        };
        for (name, s) in [
            ("temperature", scalers.temperature),
            ("load", scalers.load),
            ("price", scalers.price),
        ] {
            if s.is_degenerate() {
                log::warn!("{name} is constant over the fit set; its scaled value will be 0");
            }
        }
        Ok(scalers)
    }

    pub fn inverse_price(&self, scaled: f64) -> Result<f64> {
        self.price.inverse(scaled)
    }

    pub fn scale_price(&self, raw: f64) -> Result<f64> {
        self.price.transform(raw)
    }
}

/// Encodes one record as a `FEATURE_DIM`-long feature vector.
pub fn encode_record(record: &MarketRecord, scalers: &FeatureScalers) -> Result<Vec<f64>> {
    let mut v = Vec::with_capacity(FEATURE_DIM);
    v.extend_from_slice(&encode_calendar(record.timestamp));
    v.push(scalers.temperature.transform(record.temperature)?);
    v.push(scalers.load.transform(record.load)?);
    v.push(scalers.price.transform(record.price)?);
    Ok(v)
}
