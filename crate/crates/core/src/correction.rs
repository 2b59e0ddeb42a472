//! Conditional residual correction layered on top of LRCN forecasts.
//!
//! All quantities here are raw currency. A forecast for target `t` may add
//! the recent residual `P - F` when the most recent known price was high and
//! its forecast missed by more than a threshold.

use std::collections::VecDeque;

use chrono::{NaiveDateTime, TimeDelta};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::data::Horizon;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CorrectionConfig {
    /// Quantile of training prices at or above which a price counts as high.
    pub high_price_quantile: f64,
    /// Absolute error (currency) the previous forecast must exceed. May be
    /// `"inf"` in JSON to disable correction.
    #[serde(serialize_with = "ser_threshold", deserialize_with = "de_threshold")]
    pub error_threshold: f64,
    /// Number of most recent residuals averaged into the correction.
    pub residual_lookback: usize,
}

impl Default for CorrectionConfig {
    fn default() -> Self {
        CorrectionConfig {
            high_price_quantile: 0.9,
            error_threshold: 3.0,
            residual_lookback: 1,
        }
    }
}

impl CorrectionConfig {
    pub fn disabled() -> Self {
        CorrectionConfig {
            error_threshold: f64::INFINITY,
            ..CorrectionConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.high_price_quantile > 0.0 && self.high_price_quantile < 1.0) {
            return Err(Error::config(format!(
                "high_price_quantile must lie in (0, 1), got {}",
                self.high_price_quantile
            )));
        }
        if self.error_threshold.is_nan() || self.error_threshold <= 0.0 {
            return Err(Error::config(format!(
                "error_threshold must be positive, got {}",
                self.error_threshold
            )));
        }
        if self.residual_lookback == 0 {
            return Err(Error::config("residual_lookback must be at least 1"));
        }
        Ok(())
    }
}

fn ser_threshold<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_infinite() && *v > 0.0 {
        s.serialize_str("inf")
    } else {
        s.serialize_f64(*v)
    }
}

fn de_threshold<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }
    match Repr::deserialize(d)? {
        Repr::Num(v) => Ok(v),
        Repr::Text(t) if matches!(t.to_ascii_lowercase().as_str(), "inf" | "infinity") => {
            Ok(f64::INFINITY)
        }
        Repr::Text(t) => Err(serde::de::Error::custom(format!(
            "error_threshold must be a number or \"inf\", got {t:?}"
        ))),
    }
}

/// `P - F` for one interval.
pub fn compute_residual(actual: f64, forecast: f64) -> f64 {
    actual - forecast
}

pub fn should_correct(
    prev_actual: f64,
    prev_abs_error: f64,
    config: &CorrectionConfig,
    cutoff: f64,
) -> bool {
    prev_actual >= cutoff && prev_abs_error > config.error_threshold
}

/// `F + E*` when gated, `F` otherwise.
pub fn apply_correction(forecast: f64, residual: f64, gate: bool) -> f64 {
    if gate {
        forecast + residual
    } else {
        forecast
    }
}

/// Linear-interpolation quantile (type 7) of `values`.
pub fn quantile(values: &[f64], q: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Sizing("quantile of an empty set".into()));
    }
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::config(format!(
            "quantile must lie in [0, 1], got {q}"
        )));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(interpolate(&sorted, q))
}

fn interpolate(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Training-price quantiles at every 0.1 percent, so the high-price cutoff
/// can be chosen after training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceQuantiles {
    pub table: Vec<f64>,
}

impl PriceQuantiles {
    pub const STEPS: usize = 1000;

    pub fn from_prices(prices: &[f64]) -> Result<Self> {
        if prices.is_empty() {
            return Err(Error::Sizing(
                "price quantiles need at least one price".into(),
            ));
        }
        let mut sorted = prices.to_vec();
        sorted.sort_by(f64::total_cmp);
        let table = (0..=Self::STEPS)
            .map(|i| interpolate(&sorted, i as f64 / Self::STEPS as f64))
            .collect();
        Ok(PriceQuantiles { table })
    }

    pub fn quantile(&self, q: f64) -> Result<f64> {
        if self.table.len() < 2 {
            return Err(Error::State("price quantile table is incomplete".into()));
        }
        if !(0.0..=1.0).contains(&q) {
            return Err(Error::config(format!(
                "quantile must lie in [0, 1], got {q}"
            )));
        }
        Ok(interpolate(&self.table, q))
    }
}

/// The last `lookback` known (actual, forecast) pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrectionState {
    lookback: usize,
    pairs: VecDeque<(f64, f64)>,
}

impl CorrectionState {
    pub fn new(lookback: usize) -> Self {
        CorrectionState {
            lookback: lookback.max(1),
            pairs: VecDeque::new(),
        }
    }

    pub fn push(&mut self, actual: f64, forecast: f64) {
        if self.pairs.len() == self.lookback {
            self.pairs.pop_front();
        }
        self.pairs.push_back((actual, forecast));
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn latest(&self) -> Option<(f64, f64)> {
        self.pairs.back().copied()
    }

    /// Mean residual over the ring; `None` before any pair is known.
    pub fn residual(&self) -> Option<f64> {
        if self.pairs.is_empty() {
            return None;
        }
        let sum: f64 = self
            .pairs
            .iter()
            .map(|&(p, f)| compute_residual(p, f))
            .sum();
        Some(sum / self.pairs.len() as f64)
    }

    /// Gate decision and residual for the next forecast.
    pub fn decide(&self, config: &CorrectionConfig, cutoff: f64) -> (bool, f64) {
        match (self.latest(), self.residual()) {
            (Some((p, f)), Some(e)) => (should_correct(p, (p - f).abs(), config, cutoff), e),
            _ => (false, 0.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrectedForecast {
    pub raw: f64,
    pub corrected: f64,
    pub fired: bool,
}

/// Chronological correction over a forecast stream. A pair for target `s`
/// becomes usable for target `t` once `s <= t - offset`, so day-ahead
/// forecasts only see residuals at least 24 hours old.
#[derive(Debug, Clone)]
pub struct CorrectionStream {
    config: CorrectionConfig,
    cutoff: f64,
    delay: TimeDelta,
    state: CorrectionState,
    pending: VecDeque<(NaiveDateTime, f64, f64)>,
    last: Option<NaiveDateTime>,
}

impl CorrectionStream {
    pub fn new(config: CorrectionConfig, cutoff: f64, horizon: Horizon) -> Result<Self> {
        config.validate()?;
        Ok(CorrectionStream {
            config,
            cutoff,
            delay: TimeDelta::hours(horizon.offset() as i64),
            state: CorrectionState::new(config.residual_lookback),
            pending: VecDeque::new(),
            last: None,
        })
    }

    pub fn cutoff(&self) -> f64 {
        self.cutoff
    }

    /// Corrects the raw LRCN forecast for `target`, then records the pair
    /// `(actual, raw)` for later targets. Targets must increase strictly.
    pub fn step(
        &mut self,
        target: NaiveDateTime,
        raw: f64,
        actual: f64,
    ) -> Result<CorrectedForecast> {
        if self.last.is_some_and(|prev| target <= prev) {
            return Err(Error::config(format!(
                "correction stream targets must increase; {target} follows {}",
                self.last.unwrap()
            )));
        }
        self.last = Some(target);
        let horizon_start = target - self.delay;
        while let Some(&(ts, p, f)) = self.pending.front() {
            if ts > horizon_start {
                break;
            }
            self.state.push(p, f);
            self.pending.pop_front();
        }
        let (fired, residual) = self.state.decide(&self.config, self.cutoff);
        self.pending.push_back((target, actual, raw));
        Ok(CorrectedForecast {
            raw,
            corrected: apply_correction(raw, residual, fired),
            fired,
        })
    }
}
